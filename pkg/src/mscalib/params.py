"""Calibration parameters, their admissibility checks and automatic selection."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .characteristics import Characteristics, FieldIngredients
from .errors import InfeasibleParams
from .harmonic import GEOMETRY, SQRT3, SectorHarmonicTriple

log = logging.getLogger(__name__)

START_RADIUS = 0.02
MIN_RADIUS = 1e-4


@dataclass(frozen=True)
class CalibrationParams:
    epsilon: float
    lam: float
    mu: float
    l1: float
    l2: float
    fpp: float
    u_radius: float
    ode_step: float | None = None
    quad_tol: float = 1e-10
    n_gauss: int = 24

    @property
    def l(self) -> tuple:
        return (None, self.l1, self.l2)

    @property
    def step(self) -> float:
        return self.ode_step if self.ode_step else 1e-2 * self.u_radius

    def ingredients(self) -> FieldIngredients:
        return FieldIngredients(self.epsilon, self.fpp)

    def characteristics(self, triple: SectorHarmonicTriple) -> Characteristics:
        return Characteristics(triple, self.ingredients(), self.lam, self.mu, self.u_radius,
                               n_gauss=self.n_gauss, ode_step=self.step,
                               quad_tol=self.quad_tol)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ode_step"] = self.step
        return d


def condf_bound(triple: SectorHarmonicTriple, epsilon: float) -> float:
    """Upper bound that f''(0) must stay strictly below."""
    _, _, H0 = triple.evaluate(0, 0.0, 0.0)
    _, _, H2 = triple.evaluate(2, 0.0, 0.0)
    return (-2.0 * SQRT3 - 2.0 / epsilon
            - 2.0 * epsilon / 3.0 * (H0[1, 1] ** 2 + H2[1, 1] ** 2))


def probe_points(radius: float, n_radii: int = 8, n_angles: int = 48):
    """Polar probe grid of the closed disc of the given radius (origin included)."""
    rad = radius * np.arange(1, n_radii + 1) / n_radii
    ang = 2.0 * math.pi * np.arange(n_angles) / n_angles
    R, A = np.meshgrid(rad, ang, indexing="ij")
    x = np.concatenate([[0.0], (R * np.cos(A)).ravel()])
    y = np.concatenate([[0.0], (R * np.sin(A)).ravel()])
    # exact points on the three rays
    for d in (GEOMETRY.tau[1], GEOMETRY.tau[2], GEOMETRY.ex):
        x = np.concatenate([x, rad * d[0]])
        y = np.concatenate([y, rad * d[1]])
    return x, y


def static_violations(triple: SectorHarmonicTriple, p: CalibrationParams) -> list[str]:
    """Checks that do not depend on the working radius."""
    out = []
    a = triple.constants
    e = p.epsilon
    if not a[0] < a[1] < a[2]:
        out.append("constants must satisfy a_0 < a_1 < a_2")
    if e <= 0:
        out.append(f"epsilon = {e} must be positive")
        return out
    if p.lam <= 0:
        out.append(f"lambda = {p.lam} must be positive")
    if 1.0 - SQRT3 * e <= 0:
        out.append(f"g(0) = 1 - sqrt(3)*epsilon = {1.0 - SQRT3 * e:.6g} must be positive")
    if e >= SQRT3:
        out.append(f"epsilon = {e} must be below sqrt(3)")
    if 0.75 - SQRT3 / (2.0 * e) >= 0:
        out.append(f"3/4 - sqrt(3)/(2 epsilon) = {0.75 - SQRT3 / (2 * e):.6g} must be negative")
    bound = condf_bound(triple, e)
    if not p.fpp < bound:
        out.append(f"f''(0) = {p.fpp:.6g} must be below {bound:.6g}")
    if p.lam > 0 and p.mu <= 1.0 / (4.0 * p.lam ** 2):
        out.append(f"mu = {p.mu:.6g} must exceed 1/(4 lambda^2) = {1 / (4 * p.lam ** 2):.6g}")
    if not a[0] < p.l1 < a[1]:
        out.append(f"l_1 = {p.l1} must lie in (a_0, a_1)")
    if not a[1] < p.l2 < a[2]:
        out.append(f"l_2 = {p.l2} must lie in (a_1, a_2)")
    if p.u_radius <= 0 or p.u_radius >= 0.5:
        out.append(f"u_radius = {p.u_radius} must lie in (0, 0.5)")
    return out


def sup_sigma_phi_sq(triple: SectorHarmonicTriple, p: CalibrationParams) -> float:
    ch = p.characteristics(triple)
    x, y = probe_points(p.u_radius)
    best = 0.0
    for i in (1, 2):
        sig = ch.sigma(i, x, y)
        ph = ch.ing.phi(i, x, y)
        best = max(best, float(np.max(sig ** 2 * np.sum(ph * ph, axis=-1))))
    return best


def radius_violations(triple: SectorHarmonicTriple, p: CalibrationParams) -> list[str]:
    """Inequalities that must hold on the working neighbourhood U."""
    out = []
    ch = p.characteristics(triple)
    ing = ch.ing
    x, y = probe_points(p.u_radius)
    e, lam = p.epsilon, p.lam
    u = [triple.value(j, x, y, allow_cut=True, check=False) for j in range(3)]
    for j in range(3):
        v = ing.v(j, x, y)
        if np.min(v) <= 0:
            out.append(f"v_{j} must stay positive on U (min {np.min(v):.3e})")
        om = ing.omega_branch(triple, j, x, y)
        if np.min(om) <= 0:
            out.append(f"omega branch {j} must stay positive on U (min {np.min(om):.3e})")
    for i in (1, 2):
        d = ch.evaluate(i, x, y)
        li = p.l[i]
        gap_lo = li + d["alpha"] - (u[i - 1] + e)
        if np.min(gap_lo) <= 0:
            out.append(f"G_{i-1} must lie below K_{i}: margin {np.min(gap_lo):.3e}")
        gap_hi = (u[i] - e) - (li + 2 * lam + d["beta"])
        if np.min(gap_hi) <= 0:
            out.append(f"K_{i} must lie below G_{i}: margin {np.min(gap_hi):.3e}")
        if np.max(d["alpha"]) >= lam / 2:
            out.append(f"max alpha_{i} = {np.max(d['alpha']):.4g} must stay below lambda/2")
        if np.min(d["beta"]) <= -lam / 2:
            out.append(f"min beta_{i} = {np.min(d['beta']):.4g} must stay above -lambda/2")
        ph = ing.phi(i, x, y)
        bmax = float(np.max(d["sigma"] ** 2 * np.sum(ph * ph, axis=-1))) / lam ** 2
        if bmax > 4 * p.mu:
            out.append(f"|sigma_{i} phi_{i}|^2/lambda^2 = {bmax:.4g} exceeds 4 mu")
        if np.max(np.abs(d["h"])) > 2 * p.u_radius:
            out.append(f"field lines of phi_{i} leave the tracing disc")
        s = np.linspace(0.0, p.u_radius, 17)
        tau = GEOMETRY.tau[i]
        hr = ch.h(i, s * tau[0], s * tau[1])
        if np.max(hr) > 0:
            out.append(f"h_{i}(s tau_{i}) must be <= 0 (max {np.max(hr):.3e})")
    return out


def validate_params(triple: SectorHarmonicTriple, p: CalibrationParams) -> list[str]:
    out = static_violations(triple, p)
    if out:
        return out
    return radius_violations(triple, p)


_ALIASES = {"lambda": "lam"}


def select_params(triple: SectorHarmonicTriple, overrides: dict | None = None,
                  start_radius: float = START_RADIUS,
                  min_radius: float = MIN_RADIUS) -> CalibrationParams:
    """Fill parameters that were not given and shrink U until every inequality holds."""
    ov = {_ALIASES.get(k, k): v for k, v in (overrides or {}).items() if v is not None}
    a = triple.constants
    gap = min(a[1] - a[0], a[2] - a[1])
    if gap <= 0:
        raise InfeasibleParams("constants must satisfy a_0 < a_1 < a_2",
                               ["constants must satisfy a_0 < a_1 < a_2"])
    eps = float(ov.get("epsilon", min(0.05, 0.2 * gap)))
    lam = float(ov.get("lam", min(0.2 * gap, 0.1)))
    fpp = ov.get("fpp")
    if fpp is None:
        fpp = 1.1 * condf_bound(triple, eps) if eps > 0 else -1.0
    base = CalibrationParams(
        epsilon=eps, lam=lam, mu=float(ov.get("mu", 0.0)),
        l1=float(ov.get("l1", 0.5 * (a[0] + a[1]))),
        l2=float(ov.get("l2", 0.5 * (a[1] + a[2]))),
        fpp=float(fpp),
        u_radius=float(ov.get("u_radius", start_radius)),
        ode_step=ov.get("ode_step"),
        quad_tol=float(ov.get("quad_tol", 1e-10)),
        n_gauss=int(ov.get("n_gauss", 24)))
    fixed_radius = "u_radius" in ov
    fixed_mu = "mu" in ov
    while True:
        p = base
        if not fixed_mu and lam > 0:
            p = replace(p, mu=1.0 / (4.0 * lam * lam))
            try:
                sup = sup_sigma_phi_sq(triple, p)
            except (FloatingPointError, ValueError):
                sup = 0.0
            p = replace(p, mu=1.5 * max(1.0, sup) / (4.0 * lam * lam))
        static = static_violations(triple, p)
        if static:
            raise InfeasibleParams("; ".join(static), static)
        bad = radius_violations(triple, p)
        if not bad:
            log.info("selected u_radius = %g, mu = %g", p.u_radius, p.mu)
            return p
        log.debug("u_radius %g rejected: %s", p.u_radius, "; ".join(bad))
        if fixed_radius:
            raise InfeasibleParams("; ".join(bad), bad)
        if p.u_radius / 2 < min_radius:
            raise InfeasibleParams(
                f"no u_radius >= {min_radius:g} satisfies the band conditions: " + "; ".join(bad),
                bad)
        base = replace(base, u_radius=p.u_radius / 2)
