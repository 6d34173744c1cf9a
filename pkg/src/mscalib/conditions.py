"""Pointwise calibration conditions (b), (c), (e) and the jump-integral cross-check."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from .field import REGION_NAMES, CalibrationField
from .harmonic import GEOMETRY, RAYS, sector_mask
from .report import ConditionResult


def random_disc(rng: np.random.Generator, n: int, radius: float):
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    th = rng.uniform(0.0, 2.0 * math.pi, n)
    return r * np.cos(th), r * np.sin(th)


def z_range(field: CalibrationField) -> tuple[float, float]:
    a = field.triple.constants
    e = field.params.epsilon
    return a[0] - 2 * e, a[2] + 2 * e


def check_b(field: CalibrationField, n_samples: int = 10_000, seed: int = 0,
            tol: float = 1e-12) -> ConditionResult:
    """Worst margin of 4 phi_z - |phi_xy|^2 over uniform and boundary-hugging samples."""
    rng = np.random.default_rng(seed)
    r = field.params.u_radius
    n_uni = n_samples // 2
    x, y = random_disc(rng, n_uni, r)
    lo, hi = z_range(field)
    pd = field.point_data(x, y)
    z = rng.uniform(lo, hi, n_uni)
    pxy, pz, code = field.evaluate(pd, z)
    margins = [4 * pz - np.sum(pxy ** 2, axis=-1)]
    codes = [code]
    pts = [np.stack([x, y, z], axis=-1)]
    # samples on and next to every region boundary
    n_adv = n_samples - n_uni
    x2, y2 = random_disc(rng, max(1, n_adv // 45), r)
    pd2 = field.point_data(x2, y2)
    bp = field.breakpoints(pd2)
    offs = np.array([-1e-12, 0.0, 1e-12])
    Z = (bp[:, :, None] * (1.0 + offs)).reshape(len(pd2), -1)
    pxy2, pz2, code2 = field.evaluate(pd2, Z)
    margins.append((4 * pz2 - np.sum(pxy2 ** 2, axis=-1)).ravel())
    codes.append(code2.ravel())
    X2 = np.broadcast_to(x2[:, None], Z.shape).ravel()
    Y2 = np.broadcast_to(y2[:, None], Z.shape).ravel()
    pts.append(np.stack([X2, Y2, Z.ravel()], axis=-1))
    m = np.concatenate(margins)
    c = np.concatenate(codes)
    P = np.concatenate(pts)
    k = int(np.argmin(m))
    per_region = {}
    for cc in np.unique(c):
        per_region[REGION_NAMES[cc]] = float(np.min(m[c == cc]))
    return ConditionResult(
        name="b", passed=bool(m[k] >= -tol), margin=float(m[k]), tolerance=tol,
        samples=int(m.size),
        witness={"x": P[k, 0], "y": P[k, 1], "z": P[k, 2], "region": REGION_NAMES[c[k]]},
        details={"min_margin_by_region": per_region})


def sector_samples(rng, n: int, radius: float, i: int, near_boundary: bool = False):
    """Random points of the open sector A_i inside the disc of the given radius."""
    th_i = GEOMETRY.bisector[i]
    rr = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    if near_boundary:
        side = rng.choice([-1.0, 1.0], n)
        th = th_i + side * (math.pi / 3 - 10.0 ** rng.uniform(-12, -6, n))
    else:
        th = th_i + rng.uniform(-math.pi / 3, math.pi / 3, n)
    x, y = rr * np.cos(th), rr * np.sin(th)
    keep = sector_mask(i, x, y) & (rr > 0)
    return x[keep], y[keep]


def check_c(field: CalibrationField, n_samples: int = 10_000, seed: int = 0,
            tol: float = 1e-12) -> ConditionResult:
    """Trace condition on the graph of u: phi = (2 grad u_i, |grad u_i|^2) at z = u_i."""
    rng = np.random.default_rng(seed)
    r = field.params.u_radius
    tri = field.triple
    worst, witness, count = 0.0, None, 0
    per = n_samples // 6
    for i in range(3):
        for near in (False, True):
            x, y = sector_samples(rng, per, r, i, near)
            pd = field.point_data(x, y)
            z = pd.u[i].copy()
            pxy, pz, code = field.evaluate(pd, z)
            g = tri.gradient(i, x, y)
            res = np.maximum(np.linalg.norm(pxy - 2 * g, axis=-1),
                             np.abs(pz - np.sum(g * g, axis=-1)))
            res = np.where(code == 1 + i, res, np.inf)
            count += res.size
            k = int(np.argmax(res))
            if res.size and res[k] >= worst:
                worst = float(res[k])
                witness = {"x": x[k], "y": y[k], "z": z[k], "sector": i}
    return ConditionResult(name="c", passed=bool(worst <= tol), margin=0.0 - worst, tolerance=tol,
                           samples=count, witness=witness,
                           details={"max_residual": worst})


def check_e(field: CalibrationField, n_per_ray: int = 32, tol: float | None = None) -> ConditionResult:
    """Full jump on each ray equals the unit normal nu_u."""
    tol = 10 * field.params.quad_tol if tol is None else tol
    r = field.params.u_radius
    s = r * np.arange(1, n_per_ray + 1) / (n_per_ray + 1)
    worst, witness = 0.0, None
    by_ray = {}
    for lab in RAYS:
        d = GEOMETRY.ray_direction(lab)
        nrm = GEOMETRY.ray_normal(lab)
        i, j = GEOMETRY.ray_sectors(lab)
        pd = field.point_data(s * d[0], s * d[1])
        I = field.band_integral(pd, pd.u[i], pd.u[j])
        res = np.linalg.norm(I - nrm, axis=-1)
        k = int(np.argmax(res))
        by_ray[lab] = float(res[k])
        if res[k] >= worst:
            worst = float(res[k])
            witness = {"ray": lab, "s": s[k], "I": I[k].tolist(), "nu": nrm.tolist()}
    return ConditionResult(name="e", passed=bool(worst <= tol), margin=0.0 - worst, tolerance=tol,
                           samples=3 * n_per_ray, witness=witness,
                           details={"max_residual_by_ray": by_ray})


def jump_quadrature(field: CalibrationField, p, t1: float, t2: float,
                    epsabs: float = 1e-13) -> np.ndarray:
    """Adaptive quadrature of phi_xy in z, split at the region boundaries."""
    pd = field.point_data(p[0], p[1])
    lo, hi = min(t1, t2), max(t1, t2)
    cuts = np.sort(field.breakpoints(pd)[0])
    cuts = cuts[(cuts > lo) & (cuts < hi)]
    knots = np.concatenate([[lo], cuts, [hi]])

    def comp(z, c):
        pxy, _, _ = field.evaluate(pd, np.array([z]))
        return pxy[0, c]

    out = np.zeros(2)
    for a, b in zip(knots[:-1], knots[1:]):
        if b <= a:
            continue
        for c in range(2):
            out[c] += quad(comp, a, b, args=(c,), epsabs=epsabs, epsrel=1e-13, limit=200)[0]
    return out if t2 >= t1 else -out

