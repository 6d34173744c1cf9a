"""Polygon containments of the third step and the M-function maxima.

All sets live in the plane of values of I.  With g0 = 1 - sqrt(3) eps:

    R1 = parallelogram spanned by eps tau_1 and -(eps - delta^2/eps) e^x
    R2 = parallelogram spanned by eps tau_1 and -(eps - delta^2/eps) tau_2
    C  = {nu_2 . p >= g0} intersected with the open unit ball
    D  = -T_2,   T_i = [0, g0 nu_i]
    E  = parallelogram with consecutive sides T_1, T_2,   F = E - g0 e^y
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryViolated
from .field import CalibrationField
from .harmonic import GEOMETRY, SQRT3

EX = np.array([1.0, 0.0])
EY = np.array([0.0, 1.0])
TAU1, TAU2 = GEOMETRY.tau[1], GEOMETRY.tau[2]
NU1, NU2 = GEOMETRY.nu[1], GEOMETRY.nu[2]


def _parallelogram(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.array([np.zeros(2), a, a + b, b])


def _minkowski_vertices(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    return (P[:, None, :] + Q[None, :, :]).reshape(-1, 2)


@dataclass(frozen=True)
class Step3Geometry:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not 0 < self.delta < self.epsilon:
            raise ValueError("delta must lie in (0, epsilon)")

    @property
    def g0(self) -> float:
        return 1.0 - SQRT3 * self.epsilon

    @property
    def hypotheses_hold(self) -> bool:
        return self.epsilon < SQRT3

    @property
    def shrink(self) -> float:
        return self.epsilon - self.delta ** 2 / self.epsilon

    def R1(self) -> np.ndarray:
        return _parallelogram(self.epsilon * TAU1, -self.shrink * EX)

    def R2(self) -> np.ndarray:
        return _parallelogram(self.epsilon * TAU1, -self.shrink * TAU2)

    def T(self, i: int) -> np.ndarray:
        return np.array([np.zeros(2), self.g0 * GEOMETRY.nu[i]])

    def D(self) -> np.ndarray:
        return -self.T(2)

    def E(self) -> np.ndarray:
        return _parallelogram(self.g0 * NU1, self.g0 * NU2)

    def F(self) -> np.ndarray:
        return self.E() - self.g0 * EY

    def in_C(self, p, tol: float = 1e-12) -> np.ndarray:
        p = np.atleast_2d(p)
        return (p @ NU2 >= self.g0 - tol) & (np.sum(p * p, axis=1) < 1.0)

    def C_boundary(self, n: int = 4096) -> np.ndarray:
        """Points of the arc of the closure of C (the chord endpoints lie on it)."""
        # arc: unit vectors with nu_2 . p >= g0, centred on nu_2
        half = math.acos(max(-1.0, min(1.0, self.g0)))
        th0 = math.atan2(NU2[1], NU2[0])
        th = th0 + np.linspace(-half, half, n)
        return np.stack([np.cos(th), np.sin(th)], axis=-1)


@dataclass
class ContainmentCheck:
    name: str
    passed: bool
    slack: float
    witness: list | None = None
    expected_failure: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        status = "pass" if self.passed else ("FAIL-expected" if self.expected_failure else "fail")
        return {"status": status, "pass": self.passed, "slack": self.slack,
                "witness": self.witness, **self.extra}


@dataclass
class Step3Report:
    epsilon: float
    delta: float
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def min_slack(self) -> float:
        return min(c.slack for c in self.checks)

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "delta": self.delta, "pass": self.passed,
                "hypothesis_violated": self.epsilon >= SQRT3,
                "min_slack": self.min_slack,
                "checks": {c.name: c.to_dict() for c in self.checks}}


def step3_containment(geom: Step3Geometry, raise_on_violation: bool = False,
                      n_arc: int = 4096, n_seg: int = 257) -> Step3Report:
    """Run the three containments; slack > 0 means strict containment."""
    rep = Step3Report(geom.epsilon, geom.delta)
    expected = not geom.hypotheses_hold

    # (1) nu_2 - (delta^2/eps) e^x + R1 inside C: both sets are convex.  The
    # vertex nu_2 + eps (tau_1 - e^x) lies on the closed half-plane for every
    # delta, so only the open-ball part can have positive slack.
    V = NU2 - geom.delta ** 2 / geom.epsilon * EX + geom.R1()
    half_plane = V @ NU2 - geom.g0
    ball = 1.0 - np.sqrt(np.sum(V * V, axis=1))
    hp_ok = bool(half_plane.min() >= -1e-12)
    s1 = float(ball.min())
    k = int(np.argmin(ball)) if hp_ok else int(np.argmin(half_plane))
    rep.checks.append(ContainmentCheck(
        "R1_in_C", hp_ok and s1 > 0, s1 if hp_ok else float(half_plane.min()),
        V[k].tolist(), expected, {"half_plane_margin": float(half_plane.min())}))

    # (2) C + D inside the open ball.  On the closure |c + d|^2 - 1 vanishes
    # only for d = 0 (a point of C, hence inside), so the slack is measured as
    # the worst normalised decrease -(|c + d|^2 - 1)/s with d = -s g0 nu_2.
    arc = geom.C_boundary(n_arc)
    s = np.linspace(0.0, 1.0, n_seg)[1:]
    d = -s[:, None] * geom.g0 * NU2
    S = arc[None, :, :] + d[:, None, :]
    q = (np.sum(S * S, axis=-1) - 1.0) / s[:, None]
    # s -> 0 limit of the quotient: -2 g0 nu_2 . c
    q0 = -2.0 * geom.g0 * (arc @ NU2)
    worst = max(float(q.max()), float(q0.max()))
    kk = np.unravel_index(int(np.argmax(q)), q.shape)
    s2 = -worst
    rep.checks.append(ContainmentCheck("C_plus_D_in_ball", s2 > 0, s2,
                                       S[kk].tolist(), expected))

    # (3) vertices of e^y - (delta^2/eps) tau_2 + R2 + F in the open ball
    V3 = EY - geom.delta ** 2 / geom.epsilon * TAU2 + _minkowski_vertices(geom.R2(), geom.F())
    nrm = np.sqrt(np.sum(V3 * V3, axis=1))
    k3 = int(np.argmax(nrm))
    s3 = float(1.0 - nrm[k3])
    rep.checks.append(ContainmentCheck("vertices_in_ball", s3 > 0, s3, V3[k3].tolist(), expected))

    if raise_on_violation and not expected:
        for c in rep.checks:
            if not c.passed:
                raise GeometryViolated(f"containment {c.name} failed (slack {c.slack:.3e})",
                                       c.name, c.witness)
    return rep


# ----------------------------------------------------------------------
# M-functions: constrained maxima of rho over (t1, t2) at fixed points

M_CONSTRAINTS = {1: ((0, 1), ()), 2: ((), (1, 2)), 3: ((0,), (2,))}


def _feasible(lo: float, hi: float, centres, delta: float) -> list[tuple[float, float]]:
    ivs = [(lo, hi)]
    for c in centres:
        nxt = []
        for a, b in ivs:
            if b <= c - delta or a >= c + delta:
                nxt.append((a, b))
                continue
            if a <= c - delta:
                nxt.append((a, c - delta))
            if b >= c + delta:
                nxt.append((c + delta, b))
        ivs = nxt
    return [(a, b) for a, b in ivs if b >= a]


def _golden(f, a: np.ndarray, b: np.ndarray, iters: int = 24) -> np.ndarray:
    """Vectorised golden-section maximisation of f on the brackets [a, b]."""
    gr = (math.sqrt(5) - 1) / 2
    a, b = a.copy(), b.copy()
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = np.where(left, b - gr * (b - a), d)
        d_new = np.where(left, c, a + gr * (b - a))
        f_eval = f(np.where(left, c_new, d_new))
        fc, fd = np.where(left, f_eval, fd), np.where(left, fc, f_eval)
        c, d = c_new, d_new
    return np.where(fc > fd, c, d)


def m_function(field: CalibrationField, k: int, x: float, y: float, delta: float,
               n: int = 200, pd=None) -> dict:
    """M_k(x, y) by a projected grid over the feasible (t1, t2) set plus golden-section polish."""
    e = field.params.epsilon
    tri = field.triple
    pd = field.point_data(x, y) if pd is None else pd
    lo, hi = float(pd.u[0][0]) - e, float(pd.u[2][0]) + e
    u00 = [float(tri.value(j, 0.0, 0.0, allow_cut=True)) for j in range(3)]
    c1, c2 = M_CONSTRAINTS[k]
    iv1 = _feasible(lo, hi, [u00[j] for j in c1], delta)
    iv2 = _feasible(lo, hi, [u00[j] for j in c2], delta)
    bp = field.breakpoints(pd)[0]

    def grid(ivs):
        pts = [np.linspace(a, b, max(2, int(n * (b - a) / (hi - lo)) + 2)) for a, b in ivs]
        pts += [bp[(bp >= a) & (bp <= b)] for a, b in ivs]
        return np.unique(np.concatenate(pts)) if pts else np.zeros(0)

    T1, T2 = grid(iv1), grid(iv2)
    if T1.size == 0 or T2.size == 0:
        return {"value": 0.0, "t1": None, "t2": None, "feasible": False}
    A1 = field.antiderivative(pd, T1[None, :])[0]
    A2 = field.antiderivative(pd, T2[None, :])[0]
    R = np.linalg.norm(A2[None, :, :] - A1[:, None, :], axis=-1)
    R = np.where(T1[:, None] <= T2[None, :], R, -np.inf)
    order = np.argsort(-R, axis=None, kind="stable")[:5]
    a_idx, b_idx = np.unravel_index(order, R.shape)
    t1, t2 = T1[a_idx].astype(float), T2[b_idx].astype(float)

    def rho(s1, s2):
        v = np.linalg.norm(field.band_integral(pd, s1[None, :], s2[None, :])[0], axis=-1)
        return np.where(s1 <= s2, v, -np.inf)

    def bracket(t, ivs, h):
        lo_b, hi_b = t.copy(), t.copy()
        for a, b in ivs:
            m = (t >= a - 1e-15) & (t <= b + 1e-15)
            lo_b = np.where(m, np.maximum(a, t - h), lo_b)
            hi_b = np.where(m, np.minimum(b, t + h), hi_b)
        return lo_b, hi_b

    h = (hi - lo) / n
    cur = rho(t1, t2)
    for _ in range(2):
        l1, r1 = bracket(t1, iv1, h)
        t1n = _golden(lambda s_: rho(s_, t2), l1, r1)
        v = rho(t1n, t2)
        t1, cur = np.where(v > cur, t1n, t1), np.maximum(v, cur)
        l2, r2 = bracket(t2, iv2, h)
        t2n = _golden(lambda s_: rho(t1, s_), l2, r2)
        v = rho(t1, t2n)
        t2, cur = np.where(v > cur, t2n, t2), np.maximum(v, cur)
    k_best = int(np.argmax(cur))
    return {"value": float(cur[k_best]), "t1": float(t1[k_best]), "t2": float(t2[k_best]),
            "feasible": True}


def check_m_functions(field: CalibrationField, delta: float | None = None, n: int = 16,
                      tol: float = 1e-6, grid: int = 200) -> dict:
    """M_1, M_2, M_3 at the origin and at n points of the boundary circle of U."""
    delta = field.params.epsilon / 2 if delta is None else delta
    r = field.params.u_radius
    th = 2 * math.pi * np.arange(n) / n
    pts = [(0.0, 0.0)] + [(0.999 * r * math.cos(t), 0.999 * r * math.sin(t)) for t in th]
    out = {"delta": delta, "tolerance": tol, "M": {}}
    ok = True
    pds = [field.point_data(x, y) for x, y in pts]
    for k in (1, 2, 3):
        vals = [m_function(field, k, x, y, delta, grid, pd) for (x, y), pd in zip(pts, pds)]
        worst = max(range(len(vals)), key=lambda m: vals[m]["value"])
        entry = {
            "at_origin": vals[0]["value"],
            "max": vals[worst]["value"],
            "argmax_point": list(pts[worst]),
            "argmax_t": [vals[worst]["t1"], vals[worst]["t2"]],
        }
        entry["pass"] = bool(entry["max"] < 1 - tol)
        ok &= entry["pass"]
        out["M"][f"M{k}"] = entry
    out["pass"] = bool(ok)
    return out


def neighbourhood_max(field: CalibrationField, delta: float, n: int = 24) -> float:
    """Largest rho over the local boxes around the critical heights at the origin,
    i.e. |t1 - u_a| < delta, |t2 - u_b| < delta for (a, b) in {(0,1), (1,2), (0,2)}."""
    tri = field.triple
    pd = field.point_data(0.0, 0.0)
    u = [float(tri.value(j, 0.0, 0.0, allow_cut=True)) for j in range(3)]
    best = 0.0
    for a, b in ((0, 1), (1, 2), (0, 2)):
        T1 = u[a] + np.linspace(-delta, delta, n)
        T2 = u[b] + np.linspace(-delta, delta, n)
        A1 = field.antiderivative(pd, T1[None, :])[0]
        A2 = field.antiderivative(pd, T2[None, :])[0]
        best = max(best, float(np.linalg.norm(A2[None] - A1[:, None], axis=-1).max()))
    return best


def delta_range(field: CalibrationField, tol: float = 1e-6, iters: int = 12,
                n: int = 4, grid: int = 80) -> dict:
    """Interval of delta for which the M-function maxima stay below 1 and rho
    stays at most 1 near the critical points (bisection on each end)."""
    e = field.params.epsilon

    def m_ok(d):
        return check_m_functions(field, d, n=n, tol=tol, grid=grid)["pass"]

    def nb_ok(d):
        return neighbourhood_max(field, d) <= 1 + 1e-9

    hi_d = e * (1 - 1e-9)
    if not m_ok(hi_d):
        return {"delta_min": None, "delta_max": None, "nonempty": False}
    a, b = 0.0, hi_d
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if m_ok(mid):
            b = mid
        else:
            a = mid
    dmin = b
    if nb_ok(hi_d):
        dmax = hi_d
    else:
        a, b = dmin, hi_d
        for _ in range(iters):
            mid = 0.5 * (a + b)
            if nb_ok(mid):
                a = mid
            else:
                b = mid
        dmax = a
    return {"delta_min": dmin, "delta_max": dmax, "nonempty": dmin <= dmax,
            "delta_min_over_eps": dmin / e, "delta_max_over_eps": dmax / e}
