"""Planar ingredients of the field and the characteristic functions h, sigma, alpha, beta.

Along a field line of phi_i the quantity G(tau_i.p) - F_i(nu_i.p) is conserved,
where G' = g and F_i' = (-1)^{i+1} f.  This turns the crossing abscissa h_i
into the root of a monotone scalar equation and the transport integrals for
alpha_i, beta_i into one-dimensional quadratures in the coordinate nu_i.p.
The same quantities are also available by direct field-line integration
(``trace_h``, ``transport_alpha_beta``), which serves as the cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NoCrossing
from .harmonic import GEOMETRY, SQRT3, SectorHarmonicTriple

_H = SQRT3 / 2.0

# gradients of the affine functions v_0, v_1, v_2
GRAD_V = (np.array([-0.5, _H]), np.array([1.0, 0.0]), np.array([-0.5, -_H]))


@dataclass(frozen=True)
class FieldIngredients:
    epsilon: float
    fpp: float

    def v(self, j: int, x, y):
        gv = GRAD_V[j]
        return gv[0] * np.asarray(x, float) + gv[1] * np.asarray(y, float) + self.epsilon

    @staticmethod
    def grad_v(j: int) -> np.ndarray:
        return GRAD_V[j]

    def g(self, t):
        e = self.epsilon
        return 1.0 - SQRT3 * e * e / (e - 0.5 * np.asarray(t, float))

    def g1(self, t):
        e = self.epsilon
        return -_H * e * e / (e - 0.5 * np.asarray(t, float)) ** 2

    def g2(self, t):
        e = self.epsilon
        return -_H * e * e / (e - 0.5 * np.asarray(t, float)) ** 3

    def G(self, t):
        """Antiderivative of g vanishing at 0."""
        e = self.epsilon
        t = np.asarray(t, float)
        return t + 2.0 * SQRT3 * e * e * np.log1p(-0.5 * t / e)

    def f(self, s):
        return 0.5 * self.fpp * np.asarray(s, float) ** 2

    def f1(self, s):
        return self.fpp * np.asarray(s, float)

    def F(self, i: int, s):
        """Antiderivative of (-1)^{i+1} f."""
        sign = 1.0 if i % 2 == 1 else -1.0
        return sign * self.fpp / 6.0 * np.asarray(s, float) ** 3

    def phi(self, i: int, x, y):
        """phi_i = (-1)^{i+1} f(nu_i.p) tau_i + g(tau_i.p) nu_i, trailing axis 2."""
        tau, nu = GEOMETRY.tau[i], GEOMETRY.nu[i]
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        T = tau[0] * x + tau[1] * y
        N = nu[0] * x + nu[1] * y
        a = (1.0 if i == 1 else -1.0) * self.f(N)
        b = self.g(T)
        return np.stack([a * tau[0] + b * nu[0], a * tau[1] + b * nu[1]], axis=-1)

    def phi_y_on_axis(self, h):
        """phi_i^y(h, 0); the same for i = 1, 2."""
        h = np.asarray(h, float)
        return -3.0 * SQRT3 / 16.0 * self.fpp * h * h + 0.5 * self.g(-0.5 * h)

    def omega_branch(self, triple: SectorHarmonicTriple, j: int, x, y):
        gu = triple.gradient(j, x, y, allow_cut=True, check=False)
        return self.epsilon ** 2 / self.v(j, x, y) ** 2 - np.sum(gu * gu, axis=-1)


def _newton(fun, dfun, x0, target, iters: int = 40):
    x = np.array(x0, dtype=float, copy=True)
    for _ in range(iters):
        step = (fun(x) - target) / dfun(x)
        x = x - step
        if np.all(np.abs(step) <= 4e-16 * (1.0 + np.abs(x))):
            break
    return x


class Characteristics:
    """Evaluators for h_i, sigma_i, alpha_i, beta_i (i = 1, 2).

    ``branch`` selects a smooth extension instead of the glued function:
    "N" always uses the ray datum with sigma = 1, "P" always uses the
    x-axis datum with the corresponding sigma.
    """

    def __init__(self, triple: SectorHarmonicTriple, ingredients: FieldIngredients,
                 lam: float, mu: float, u_radius: float, n_gauss: int = 24,
                 ode_step: float | None = None, quad_tol: float = 1e-10):
        self.triple = triple
        self.ing = ingredients
        self.lam = float(lam)
        self.mu = float(mu)
        self.r = float(u_radius)
        self.n_gauss = int(n_gauss)
        self.ode_step = float(ode_step) if ode_step else 1e-4 * self.r
        self.quad_tol = float(quad_tol)
        self._gx, self._gw = np.polynomial.legendre.leggauss(self.n_gauss)

    # coordinates along tau_i and nu_i
    @staticmethod
    def coords(i: int, x, y):
        tau, nu = GEOMETRY.tau[i], GEOMETRY.nu[i]
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return tau[0] * x + tau[1] * y, nu[0] * x + nu[1] * y

    def invariant(self, i: int, x, y):
        T, N = self.coords(i, x, y)
        return self.ing.G(T) - self.ing.F(i, N)

    def _axis_invariant(self, h):
        return self.ing.G(-0.5 * h) + SQRT3 * self.ing.fpp / 16.0 * h ** 3

    def _axis_invariant_d(self, h):
        return -0.5 * self.ing.g(-0.5 * h) + 3.0 * SQRT3 * self.ing.fpp / 16.0 * h * h

    def h(self, i: int, x, y):
        """Abscissa where the field line of phi_i through (x, y) meets the x-axis."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        T, _ = self.coords(i, x, y)
        phi0 = self.invariant(i, x, y)
        h = _newton(self._axis_invariant, self._axis_invariant_d, -2.0 * T, phi0)
        return np.where(y == 0.0, x, h)

    def sigma_from_h(self, h, branch: str | None = None):
        h = np.asarray(h, float)
        hat = self.ing.g(h) / (2.0 * self.ing.phi_y_on_axis(h))
        if branch == "N":
            return np.ones_like(h)
        if branch == "P":
            return hat
        return np.where(h <= 0.0, 1.0, hat)

    def sigma(self, i: int, x, y, branch: str | None = None):
        return self.sigma_from_h(self.h(i, x, y), branch)

    def _T_on_line(self, i: int, level, N, T0):
        # solve G(T) = level + F_i(N) for T
        return _newton(self.ing.G, self.ing.g, T0, level + self.ing.F(i, N))

    def evaluate(self, i: int, x, y, branch: str | None = None) -> dict:
        """h, sigma, alpha, beta at the points (x, y), vectorised."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        shape = x.shape
        x = x.ravel()
        y = y.ravel()
        T, N = self.coords(i, x, y)
        level = self.ing.G(T) - self.ing.F(i, N)
        h = _newton(self._axis_invariant, self._axis_invariant_d, -2.0 * T, level)
        h = np.where(y == 0.0, x, h)
        use_p = h > 0.0
        if branch == "N":
            use_p = np.zeros_like(use_p)
        elif branch == "P":
            use_p = np.ones_like(use_p)
        sigma = np.where(use_p, self.ing.g(h) / (2.0 * self.ing.phi_y_on_axis(h)), 1.0)
        sign = 1.0 if i % 2 == 0 else -1.0
        Nd = np.where(use_p, sign * _H * h, 0.0)
        # Gauss-Legendre nodes between the datum and the query point
        half = 0.5 * (N - Nd)
        mid = 0.5 * (N + Nd)
        Nk = mid[:, None] + half[:, None] * self._gx[None, :]
        Tk = self._T_on_line(i, level[:, None], Nk, np.broadcast_to(T[:, None], Nk.shape))
        tau, nu = GEOMETRY.tau[i], GEOMETRY.nu[i]
        xk = Tk * tau[0] + Nk * nu[0]
        yk = Tk * tau[1] + Nk * nu[1]
        gk = self.ing.g(Tk)
        e2 = self.ing.epsilon ** 2
        out = {}
        for name, j in (("alpha", i - 1), ("beta", i)):
            gu = self.triple.gradient(j, xk, yk, allow_cut=True, check=False)
            w = self.mu - e2 / self.ing.v(j, xk, yk) ** 2 + np.sum(gu * gu, axis=-1)
            integral = half * ((w / gk) @ self._gw)
            out[name] = (self.lam / sigma * integral).reshape(shape)
        out["h"] = h.reshape(shape)
        out["sigma"] = sigma.reshape(shape)
        return out

    def alpha_beta(self, i: int, x, y, branch: str | None = None):
        d = self.evaluate(i, x, y, branch)
        return d["alpha"], d["beta"]

    # ------------------------------------------------------------------
    # direct field-line integration
    def _slope(self, i: int, x: float, y: float):
        ph = self.ing.phi(i, x, y)
        return ph[1] / ph[0], ph

    def _events(self, i: int, target: str):
        r2 = 2.0 * self.r
        nu = GEOMETRY.nu[i]

        def exit_disc(x, s):
            return x * x + s[0] * s[0] - r2 * r2
        exit_disc.terminal = True

        if target == "axis":
            def hit(x, s):
                return s[0]
        else:
            def hit(x, s):
                return nu[0] * x + nu[1] * s[0]
        hit.terminal = True
        return hit, exit_disc

    def trace_h(self, i: int, p) -> float:
        """h_i(p) by integrating dy/dx = phi^y/phi^x towards the x-axis."""
        x0, y0 = float(p[0]), float(p[1])
        if y0 == 0.0:
            return x0
        slope, _ = self._slope(i, x0, y0)
        direction = -math.copysign(1.0, y0 * slope)
        hit, exit_disc = self._events(i, "axis")

        def rhs(x, s):
            return [self._slope(i, x, s[0])[0]]

        sol = solve_ivp(rhs, (x0, x0 + direction * 4.0 * self.r), [y0], method="DOP853",
                        rtol=1e-12, atol=1e-15, max_step=self.ode_step,
                        events=(hit, exit_disc))
        if sol.t_events[0].size:
            return float(sol.t_events[0][0])
        raise NoCrossing(f"field line of phi_{i} from {p} does not reach the x-axis")

    def transport_alpha_beta(self, i: int, p) -> tuple[float, float]:
        """alpha_i, beta_i at p by integrating along the field line to the datum curve."""
        x0, y0 = float(p[0]), float(p[1])
        h = self.trace_h(i, p)
        sigma = float(self.sigma_from_h(h))
        target = "axis" if h > 0.0 else "ray"
        nu = GEOMETRY.nu[i]
        if target == "axis":
            if y0 == 0.0:
                return 0.0, 0.0
            dist = y0
        else:
            dist = nu[0] * x0 + nu[1] * y0
            if dist == 0.0:
                return 0.0, 0.0
        slope, _ = self._slope(i, x0, y0)
        ddx = slope if target == "axis" else nu[0] + nu[1] * slope
        direction = -math.copysign(1.0, dist * ddx)
        hit, exit_disc = self._events(i, target)
        lam, mu, e2 = self.lam, self.mu, self.ing.epsilon ** 2
        tri, ing = self.triple, self.ing

        def rhs(x, s):
            y = s[0]
            sl, ph = self._slope(i, x, y)
            out = [sl]
            for j in (i - 1, i):
                gu = tri.gradient(j, x, y, allow_cut=True, check=False)
                w = mu - e2 / float(ing.v(j, x, y)) ** 2 + float(gu @ gu)
                out.append(lam * w / (sigma * ph[0]))
            return out

        sol = solve_ivp(rhs, (x0, x0 + direction * 4.0 * self.r), [y0, 0.0, 0.0],
                        method="DOP853", rtol=1e-12, atol=1e-15, max_step=self.ode_step,
                        events=(hit, exit_disc))
        if not sol.t_events[0].size:
            raise NoCrossing(f"characteristic of phi_{i} from {p} does not reach its datum")
        end = sol.y_events[0][0]
        return -float(end[1]), -float(end[2])
