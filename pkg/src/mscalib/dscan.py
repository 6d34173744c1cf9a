"""Global search for the maximum of rho = |I(p, t1, t2)| (condition (d)).

For a fixed point p the antiderivative A(t) of phi_xy in z is evaluated once
on a list of heights; rho over all pairs is then |A(t2) - A(t1)|, so a grid
with n heights costs n evaluations and n^2 subtractions per point.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .conditions import z_range
from .field import CalibrationField
from .harmonic import GEOMETRY, RAYS, on_ray
from .report import ConditionResult

log = logging.getLogger(__name__)

JUMP_T_TOL = 1e-9


@dataclass
class Candidate:
    rho: float
    x: float
    y: float
    t1: float
    t2: float
    on_jump: bool

    def to_dict(self) -> dict:
        return {"rho": self.rho, "x": self.x, "y": self.y, "t1": self.t1, "t2": self.t2,
                "on_jump": self.on_jump}


def jump_traces(field: CalibrationField, x, y) -> list[tuple[np.ndarray, int, int]]:
    """For each ray: mask of points lying on it and the two adjacent sectors."""
    out = []
    for lab in RAYS:
        i, j = GEOMETRY.ray_sectors(lab)
        out.append((on_ray(lab, x, y) | ((x == 0) & (y == 0)), i, j))
    return out


def classify_jump(field: CalibrationField, pd, t1, t2) -> np.ndarray:
    """True where (p, t1, t2) is a full jump: p on a ray and {t1, t2} its traces."""
    t1 = np.asarray(t1, float)
    t2 = np.asarray(t2, float)
    nd = t1.ndim - 1
    res = np.zeros(t1.shape, bool)
    for mask, i, j in jump_traces(field, pd.x, pd.y):
        ui = pd.u[i].reshape((-1,) + (1,) * nd)
        uj = pd.u[j].reshape((-1,) + (1,) * nd)
        m = mask.reshape((-1,) + (1,) * nd)
        a = (np.abs(t1 - ui) <= JUMP_T_TOL) & (np.abs(t2 - uj) <= JUMP_T_TOL)
        b = (np.abs(t1 - uj) <= JUMP_T_TOL) & (np.abs(t2 - ui) <= JUMP_T_TOL)
        res |= m & (a | b)
    return res


def _pair_max(field: CalibrationField, pd, T: np.ndarray):
    """Best pair per point. T has shape (M, n). Returns rho, i1, i2, and the
    best off-jump rho with its indices."""
    A = field.antiderivative(pd, T)
    D = A[:, None, :, :] - A[:, :, None, :]
    R = np.sqrt(np.sum(D * D, axis=-1))          # R[m, a, b] = rho(T[a], T[b])
    M, n = T.shape
    flat = R.reshape(M, -1)
    k = np.argmax(flat, axis=1)
    best = flat[np.arange(M), k]
    J = classify_jump(field, pd, T[:, :, None] * np.ones((1, 1, n)),
                      T[:, None, :] * np.ones((1, n, 1)))
    off = np.where(J.reshape(M, -1), -np.inf, flat)
    ko = np.argmax(off, axis=1)
    best_off = off[np.arange(M), ko]
    return best, k // n, k % n, best_off, ko // n, ko % n


def _scan_points(field: CalibrationField, x, y, tlists, chunk: int = 128):
    """Evaluate the pair maximum at points (x, y) with per-point height lists."""
    out = []
    for s in range(0, len(x), chunk):
        sl = slice(s, s + chunk)
        pd = field.point_data(x[sl], y[sl])
        T = tlists(pd)
        b, i1, i2, bo, o1, o2 = _pair_max(field, pd, T)
        r = np.arange(len(pd))
        out.append((x[sl], y[sl], b, T[r, i1], T[r, i2], bo, T[r, o1], T[r, o2],
                    classify_jump(field, pd, T[r, i1][:, None], T[r, i2][:, None])[:, 0]))
    return [np.concatenate(c) for c in zip(*out)]


def _run(field, x, y, tlists, threads: int, chunk: int = 128):
    if threads <= 1 or len(x) <= chunk:
        return _scan_points(field, x, y, tlists, chunk)
    parts = np.array_split(np.arange(len(x)), threads)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        res = list(ex.map(lambda idx: _scan_points(field, x[idx], y[idx], tlists, chunk), parts))
    return [np.concatenate(c) for c in zip(*res)]


def _disc_grid(r: float, n: int):
    g = np.linspace(-r, r, n)
    X, Y = np.meshgrid(g, g, indexing="ij")
    keep = X ** 2 + Y ** 2 <= r * r
    return X[keep], Y[keep], g[1] - g[0]


def _jump_seeds(field: CalibrationField, n: int):
    """Points on the three rays (origin included) where the full jump is taken."""
    r = field.params.u_radius
    s = r * np.arange(n + 1) / n
    xs, ys = [], []
    for lab in RAYS:
        d = GEOMETRY.ray_direction(lab)
        xs.append(s * d[0])
        ys.append(s * d[1])
    x, y = np.concatenate(xs), np.concatenate(ys)
    pd = field.point_data(x, y)
    best = -np.inf
    arg = None
    for mask, i, j in jump_traces(field, x, y):
        I = field.band_integral(pd, pd.u[i], pd.u[j])
        rho = np.where(mask, np.linalg.norm(I, axis=-1), -np.inf)
        k = int(np.argmax(rho))
        if rho[k] > best:
            best = float(rho[k])
            arg = Candidate(best, float(x[k]), float(y[k]), float(pd.u[i][k]), float(pd.u[j][k]), True)
    return arg


def _height_lists(field: CalibrationField, base: np.ndarray):
    def make(pd):
        bp = field.breakpoints(pd)
        T = np.concatenate([np.broadcast_to(base, (len(pd), base.size)), bp], axis=1)
        return np.sort(T, axis=1)
    return make


def grid_scan(field: CalibrationField, n: int, threads: int = 1):
    """Plain n^4 scan: n x n points in the disc, n heights plus the breakpoints."""
    r = field.params.u_radius
    lo, hi = z_range(field)
    x, y, hxy = _disc_grid(r, n)
    base = np.linspace(lo, hi, n)
    res = _run(field, x, y, _height_lists(field, base), threads)
    return res, hxy, base[1] - base[0]


def _best(res, off: bool):
    x, y, b, t1, t2, bo, o1, o2, J = res
    if off:
        k = int(np.argmax(bo))
        return Candidate(float(bo[k]), float(x[k]), float(y[k]), float(o1[k]), float(o2[k]), False)
    k = int(np.argmax(b))
    return Candidate(float(b[k]), float(x[k]), float(y[k]), float(t1[k]), float(t2[k]), bool(J[k]))


def _top_off(res, k: int):
    x, y, b, t1, t2, bo, o1, o2, J = res
    idx = np.argsort(-bo, kind="stable")[:k]
    return [Candidate(float(bo[m]), float(x[m]), float(y[m]), float(o1[m]), float(o2[m]), False)
            for m in idx]


def refine(field: CalibrationField, cands: list[Candidate], hxy: float, ht: float,
           iters: int, m: int = 9, top: int = 10, threads: int = 1):
    """Zoom local m^4 grids around the current best off-jump candidates."""
    r = field.params.u_radius
    history = []
    for it in range(iters):
        xs, ys, tl = [], [], []
        for c in cands:
            gx = c.x + np.linspace(-hxy, hxy, m)
            gy = c.y + np.linspace(-hxy, hxy, m)
            X, Y = np.meshgrid(gx, gy, indexing="ij")
            keep = X ** 2 + Y ** 2 <= r * r
            X, Y = X[keep], Y[keep]
            T = np.concatenate([c.t1 + np.linspace(-ht, ht, m), c.t2 + np.linspace(-ht, ht, m)])
            xs.append(X)
            ys.append(Y)
            tl.append(np.broadcast_to(T, (X.size, T.size)))
        x = np.concatenate(xs)
        y = np.concatenate(ys)
        Tall = np.concatenate(tl)
        idx_of = {}

        def make(pd, _T=Tall, _x=x):
            # rows of pd are a contiguous block of the point list
            start = idx_of["pos"]
            T = _T[start:start + len(pd)]
            idx_of["pos"] = start + len(pd)
            bp = field.breakpoints(pd)
            return np.sort(np.concatenate([T, bp], axis=1), axis=1)

        idx_of["pos"] = 0
        res = _scan_points(field, x, y, make)
        new = _top_off(res, top)
        allc = sorted(cands + new, key=lambda c: -c.rho)
        seen, cands = set(), []
        for c in allc:
            key = (round(c.x / hxy * 64), round(c.y / hxy * 64), round(c.t1 / ht * 64), round(c.t2 / ht * 64))
            if key not in seen:
                seen.add(key)
                cands.append(c)
            if len(cands) == top:
                break
        hxy, ht = hxy / 4, ht / 4
        history.append(cands[0].rho)
        log.debug("refinement %d: best off-jump rho %.15f", it, cands[0].rho)
    return cands, history


def check_d_global(field: CalibrationField, grid: int = 32, refine_iters: int = 3,
                   tol: float = 1e-9, brute: int | None = None, threads: int = 1,
                   n_seeds: int = 64) -> ConditionResult:
    """max rho over U x [a_0 - 2 eps, a_2 + 2 eps]^2: coarse grid, zoom, jump seeds."""
    if grid < 16:
        raise ValueError("grid must have at least 16 points per axis")
    res, hxy, ht = grid_scan(field, grid, threads)
    coarse_all = _best(res, off=False)
    coarse_off = _best(res, off=True)
    cands, history = refine(field, _top_off(res, 10), hxy, ht, refine_iters, threads=threads)
    seed = _jump_seeds(field, n_seeds)
    found = [coarse_all, seed] + cands
    best = max(found, key=lambda c: (c.rho, c.on_jump))
    off = max([coarse_off] + cands, key=lambda c: c.rho)
    details = {
        "grid": grid,
        "refine_iters": refine_iters,
        "max_rho": best.rho,
        "argmax": best.to_dict(),
        "argmax_on_jump": best.on_jump,
        "jump_max": seed.rho,
        "off_jump_max": off.rho,
        "off_jump_argmax": off.to_dict(),
        "coarse_off_jump_max": coarse_off.rho,
        "refinement_history": history,
    }
    passed = best.rho <= 1 + tol
    if brute:
        bres, _, _ = grid_scan(field, brute, threads)
        b_all = max(_best(bres, off=False), seed, key=lambda c: (c.rho, c.on_jump))
        b_off = _best(bres, off=True)
        details["brute"] = {
            "grid": brute, "max_rho": b_all.rho, "argmax": b_all.to_dict(),
            "off_jump_max": b_off.rho,
            "agreement": abs(b_all.rho - best.rho),
            "refined_dominates": b_off.rho <= off.rho + 1e-6,
        }
        passed = passed and abs(b_all.rho - best.rho) <= 1e-6 and b_off.rho <= off.rho + 1e-6
    return ConditionResult(name="d", passed=bool(passed), margin=1.0 - best.rho, tolerance=tol,
                           samples=int(res[0].size * (grid + 15) ** 2), witness=best.to_dict(),
                           details=details)


def rho_lipschitz(field: CalibrationField, n: int = 2000, step: float = 1e-6, seed: int = 0) -> float:
    """Empirical Lipschitz constant of rho on random nearby argument pairs."""
    rng = np.random.default_rng(seed)
    r = field.params.u_radius
    lo, hi = z_range(field)
    rad = 0.99 * r * np.sqrt(rng.uniform(0, 1, n))
    th = rng.uniform(0, 2 * math.pi, n)
    X = np.stack([rad * np.cos(th), rad * np.sin(th), rng.uniform(lo, hi, n), rng.uniform(lo, hi, n)], 1)
    d = rng.normal(size=(n, 4))
    d *= step / np.linalg.norm(d, axis=1, keepdims=True)
    Y = X + d
    rad2 = np.hypot(Y[:, 0], Y[:, 1])
    Y[:, :2] *= np.minimum(1.0, 0.99 * r / rad2)[:, None]

    def rho(P):
        pd = field.point_data(P[:, 0], P[:, 1])
        return np.linalg.norm(field.band_integral(pd, P[:, 2], P[:, 3]), axis=-1)

    dist = np.linalg.norm(Y - X, axis=1)
    return float(np.max(np.abs(rho(Y) - rho(X)) / dist))
