"""Condition (a): zero net flux through boxes in U x R.

The field is only piecewise smooth, so every face integral is split at the
curves where a region boundary meets the face.  Side faces (x or y fixed)
use the exact z-integral of phi_xy and a one-dimensional Gauss rule along
the horizontal edge.  Top and bottom faces integrate phi_z iteratively,
first across y on lines x = const and then over x.  Roots of the boundary
functions along each line are bracketed on a sample grid and refined by a
vectorised Illinois iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conditions import random_disc, z_range
from .field import CalibrationField, PointData
from .harmonic import GEOMETRY
from .report import ConditionResult

_GX, _GW = np.polynomial.legendre.leggauss(10)


@dataclass
class Box:
    x0: float
    x1: float
    y0: float
    y1: float
    z0: float
    z1: float
    family: str = "uniform"

    @property
    def area(self) -> float:
        a, b, c = self.x1 - self.x0, self.y1 - self.y0, self.z1 - self.z0
        return 2.0 * (a * b + a * c + b * c)


def kink_matrix(field: CalibrationField, pd: PointData, levels: np.ndarray,
                with_h: bool) -> np.ndarray:
    """Signed distances of every region boundary to the given z-levels, (M, K)."""
    e, lam = field.params.epsilon, field.params.lam
    cols = []
    for L in levels.T:
        for j in range(3):
            cols.append(pd.u[j] - e - L)
            cols.append(pd.u[j] + e - L)
        for i in (1, 2):
            li = field.params.l[i]
            cols.append(li + pd.alpha[i] - L)
            cols.append(li + 2 * lam + pd.beta[i] - L)
    if with_h:
        cols.extend([pd.h[1], pd.h[2]])
    return np.stack(cols, axis=-1)


def _slit_params(triple, P0, P1) -> list:
    """Parameters in (0, 1) where each segment crosses a slit ray."""
    out = [[] for _ in range(len(P0))]
    if not triple.antisymmetric:
        return out
    D = P1 - P0
    for lab in ("S_01", "S_12", "S_02"):
        d = GEOMETRY.ray_direction(lab)
        # P0 + s D = t d
        det = -D[:, 0] * d[1] + D[:, 1] * d[0]
        ok = det != 0
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (P0[:, 0] * d[1] - P0[:, 1] * d[0]) / det
            t = (D[:, 0] * P0[:, 1] - D[:, 1] * P0[:, 0]) / det
        for k in np.nonzero(ok & (s > 0) & (s < 1) & (t > 0))[0]:
            out[k].append(float(s[k]))
    return out


def segment_roots(field: CalibrationField, P0, P1, levels, with_h: bool,
                  n_sample: int = 17, iters: int = 60) -> list:
    """Sorted parameters in (0, 1) where a region boundary crosses each segment."""
    P0 = np.asarray(P0, float)
    P1 = np.asarray(P1, float)
    levels = np.asarray(levels, float).reshape(len(P0), -1)
    S = len(P0)
    s = np.linspace(0.0, 1.0, n_sample)
    pts = P0[:, None, :] + s[None, :, None] * (P1 - P0)[:, None, :]
    pd = field.point_data(pts[..., 0].ravel(), pts[..., 1].ravel())
    K = kink_matrix(field, pd, np.repeat(levels, n_sample, axis=0), with_h)
    K = K.reshape(S, n_sample, -1)
    seg, k, col = np.nonzero(K[:, :-1, :] * K[:, 1:, :] < 0)
    roots = _slit_params(field.triple, P0, P1)
    zs, zk, _ = np.nonzero(K[:, 1:-1, :] == 0)
    for a, b in zip(zs, zk):
        roots[a].append(float(s[b + 1]))
    if seg.size:
        a = s[k].copy()
        b = s[k + 1].copy()
        fa = K[seg, k, col].copy()
        fb = K[seg, k + 1, col].copy()
        side = np.zeros(seg.size)
        lv = levels[seg]
        for _ in range(iters):
            with np.errstate(divide="ignore", invalid="ignore"):
                c = b - fb * (b - a) / (fb - fa)
            bad = ~np.isfinite(c) | (c <= np.minimum(a, b)) | (c >= np.maximum(a, b))
            c = np.where(bad, 0.5 * (a + b), c)
            P = P0[seg] + c[:, None] * (P1[seg] - P0[seg])
            pdc = field.point_data(P[:, 0], P[:, 1])
            fc = kink_matrix(field, pdc, lv, with_h)[np.arange(seg.size), col]
            left = fc * fa > 0
            # Illinois: halve the stale end value when the same side is kept twice
            a = np.where(left, c, a)
            fa_new = np.where(left, fc, fa)
            fb_new = np.where(left, np.where(side == 1, 0.5 * fb, fb), fc)
            fa_new = np.where(~left & (side == -1), 0.5 * fa_new, fa_new)
            b = np.where(left, b, c)
            side = np.where(left, 1, -1)
            fa, fb = fa_new, fb_new
            done = (np.abs(b - a) < 1e-14) | (fc == 0)
            if np.all(done):
                break
        c = np.where(np.abs(fa) < np.abs(fb), a, b)
        for g, r in zip(seg, c):
            roots[g].append(float(r))
    return [np.unique(np.clip(r, 0.0, 1.0)) for r in roots]


def _gauss_pieces(breaks_list, n: int = 10):
    gx, gw = np.polynomial.legendre.leggauss(n)
    owner, nodes, weights = [], [], []
    for idx, br in enumerate(breaks_list):
        knots = np.concatenate([[0.0], br[(br > 0) & (br < 1)], [1.0]])
        lo, hi = knots[:-1], knots[1:]
        keep = hi > lo
        lo, hi = lo[keep], hi[keep]
        half = 0.5 * (hi - lo)
        nd = (0.5 * (hi + lo))[:, None] + half[:, None] * gx[None, :]
        wt = half[:, None] * gw[None, :]
        nodes.append(nd.ravel())
        weights.append(wt.ravel())
        owner.append(np.full(nd.size, idx))
    return np.concatenate(owner), np.concatenate(nodes), np.concatenate(weights)


def side_flux(field: CalibrationField, boxes: list[Box]) -> np.ndarray:
    """Net flux through the four vertical faces of every box."""
    P0, P1, lev, comp, sign, owner = [], [], [], [], [], []
    for b, bx in enumerate(boxes):
        faces = (((bx.x0, bx.y0), (bx.x0, bx.y1), 0, -1.0),
                 ((bx.x1, bx.y0), (bx.x1, bx.y1), 0, 1.0),
                 ((bx.x0, bx.y0), (bx.x1, bx.y0), 1, -1.0),
                 ((bx.x0, bx.y1), (bx.x1, bx.y1), 1, 1.0))
        for a, c, k, sg in faces:
            P0.append(a)
            P1.append(c)
            lev.append((bx.z0, bx.z1))
            comp.append(k)
            sign.append(sg)
            owner.append(b)
    P0, P1, lev = np.array(P0), np.array(P1), np.array(lev)
    comp, sign, owner = np.array(comp), np.array(sign), np.array(owner)
    roots = segment_roots(field, P0, P1, lev, with_h=True)
    seg, s, w = _gauss_pieces(roots)
    P = P0[seg] + s[:, None] * (P1[seg] - P0[seg])
    pd = field.point_data(P[:, 0], P[:, 1])
    I = field.band_integral(pd, lev[seg, 0], lev[seg, 1])
    val = I[np.arange(seg.size), comp[seg]]
    length = np.linalg.norm(P1 - P0, axis=-1)
    per_seg = np.bincount(seg, weights=w * val, minlength=len(P0)) * length * sign
    return np.bincount(owner, weights=per_seg, minlength=len(boxes))


def _face_active(field: CalibrationField, faces: np.ndarray, n: int = 9) -> np.ndarray:
    """Faces where a boundary curve of phi_z may pass (grid sign screen)."""
    F = len(faces)
    t = np.linspace(0.0, 1.0, n)
    X = faces[:, 0, None, None] + (faces[:, 1] - faces[:, 0])[:, None, None] * t[None, :, None]
    Y = faces[:, 2, None, None] + (faces[:, 3] - faces[:, 2])[:, None, None] * t[None, None, :]
    X, Y = np.broadcast_arrays(X, Y)
    pd = field.point_data(X.ravel(), Y.ravel())
    K = kink_matrix(field, pd, np.repeat(faces[:, 4:5], n * n, axis=0), with_h=False)
    K = K.reshape(F, n * n, -1)
    lo, hi = K.min(axis=1), K.max(axis=1)
    spread = hi - lo
    act = np.any((lo - 0.25 * spread <= 0) & (hi + 0.25 * spread >= 0), axis=1)
    if field.triple.antisymmetric:
        # any slit ray meeting the face rectangle
        for lab in ("S_01", "S_12", "S_02"):
            d = GEOMETRY.ray_direction(lab)
            rr = np.linspace(0.0, field.params.u_radius * 1.01, 400)
            px, py = rr * d[0], rr * d[1]
            hit = ((px[None, :] >= faces[:, 0, None]) & (px[None, :] <= faces[:, 1, None])
                   & (py[None, :] >= faces[:, 2, None]) & (py[None, :] <= faces[:, 3, None]))
            act |= hit.any(axis=1)
    return act


def _curve_crossings(P, vals):
    """Linearly interpolated points where the sampled values change sign."""
    k = np.nonzero(vals[:-1] * vals[1:] < 0)[0]
    if not k.size:
        return np.zeros((0, 2))
    w = vals[k] / (vals[k] - vals[k + 1])
    return P[k] + w[:, None] * (P[k + 1] - P[k])


def _corner_curves(field: CalibrationField, n: int = 2049) -> list:
    """Sampled curves along which boundary curves of phi_z can have corners.

    The K-surfaces bend where they meet the vertical surfaces {h_i = 0}; in the
    antisymmetric case the G-surfaces end on the slits.  Each entry is
    (points, list of functions of z evaluated at the points).
    """
    cache = getattr(field, "_corner_cache", None)
    if cache is not None:
        return cache
    r = field.params.u_radius
    e, lam = field.params.epsilon, field.params.lam
    ch = field.chars
    out = []
    for i in (1, 2):
        N = np.linspace(-1.2 * r, 1.2 * r, n)
        T = ch._T_on_line(i, np.zeros_like(N), N, np.zeros_like(N))
        tau, nu = GEOMETRY.tau[i], GEOMETRY.nu[i]
        P = np.stack([T * tau[0] + N * nu[0], T * tau[1] + N * nu[1]], -1)
        d = ch.evaluate(i, P[:, 0], P[:, 1])
        li = field.params.l[i]
        out.append((P, [li + d["alpha"], li + 2 * lam + d["beta"]]))
    if field.triple.antisymmetric:
        s = np.linspace(0.0, 1.2 * r, n)[1:]
        for j, lab in enumerate(("S_12", "S_02", "S_01")):
            dvec = GEOMETRY.ray_direction(lab)
            nrm = GEOMETRY.ray_normal(lab)
            P = s[:, None] * dvec
            funcs = []
            for side in (-1.0, 1.0):
                Q = P + side * 1e-13 * nrm
                u = field.triple.value(j, Q[:, 0], Q[:, 1], check=False)
                funcs.extend([u - e, u + e])
            out.append((P, funcs))
    field._corner_cache = out
    return out


def _corner_breaks(field: CalibrationField, face) -> list:
    """x-parameters of corner points of boundary curves inside a face."""
    x0, x1, y0, y1, z = face
    out = []
    for P, funcs in _corner_curves(field):
        for fv in funcs:
            for q in _curve_crossings(P, fv - z):
                if x0 < q[0] < x1 and y0 <= q[1] <= y1:
                    out.append((q[0] - x0) / (x1 - x0))
    return out


def _phi_z(field: CalibrationField, x, y, z):
    pd = field.point_data(x, y)
    _, pz, _ = field.evaluate(pd, z)
    return pz


def horizontal_flux(field: CalibrationField, boxes: list[Box]) -> np.ndarray:
    """Net flux through top and bottom faces: integral of phi_z(z1) - phi_z(z0)."""
    faces, sign, owner = [], [], []
    for b, bx in enumerate(boxes):
        for z, sg in ((bx.z0, -1.0), (bx.z1, 1.0)):
            faces.append((bx.x0, bx.x1, bx.y0, bx.y1, z))
            sign.append(sg)
            owner.append(b)
    faces = np.array(faces)
    sign, owner = np.array(sign), np.array(owner)
    out = np.zeros(len(faces))
    active = _face_active(field, faces)
    gx, gw = np.polynomial.legendre.leggauss(8)
    # smooth faces: tensor Gauss rule
    smooth = np.nonzero(~active)[0]
    if smooth.size:
        f = faces[smooth]
        hx = 0.5 * (f[:, 1] - f[:, 0])
        hy = 0.5 * (f[:, 3] - f[:, 2])
        X = (0.5 * (f[:, 0] + f[:, 1]))[:, None, None] + hx[:, None, None] * gx[None, :, None]
        Y = (0.5 * (f[:, 2] + f[:, 3]))[:, None, None] + hy[:, None, None] * gx[None, None, :]
        X, Y = np.broadcast_arrays(X, Y)
        Z = np.broadcast_to(f[:, 4, None, None], X.shape)
        pz = _phi_z(field, X.ravel(), Y.ravel(), Z.ravel()).reshape(X.shape)
        out[smooth] = np.einsum("fij,i,j->f", pz, gw, gw) * hx * hy
    act = np.nonzero(active)[0]
    if act.size:
        f = faces[act]
        # outer breakpoints: crossings on the bottom and top edges, plus the origin
        P0 = np.concatenate([np.stack([f[:, 0], f[:, 2]], -1), np.stack([f[:, 0], f[:, 3]], -1)])
        P1 = np.concatenate([np.stack([f[:, 1], f[:, 2]], -1), np.stack([f[:, 1], f[:, 3]], -1)])
        lev = np.concatenate([f[:, 4], f[:, 4]])[:, None]
        er = segment_roots(field, P0, P1, lev, with_h=False)
        n = len(f)
        breaks = []
        for k in range(n):
            br = list(er[k]) + list(er[k + n]) + _corner_breaks(field, f[k])
            if field.triple.antisymmetric and f[k, 0] < 0 < f[k, 1] and f[k, 2] < 0 < f[k, 3]:
                br.append(-f[k, 0] / (f[k, 1] - f[k, 0]))
            breaks.append(np.unique(br))
        lid, xs, xw = _gauss_pieces(breaks, n=8)
        xx = f[lid, 0] + xs * (f[lid, 1] - f[lid, 0])
        L0 = np.stack([xx, f[lid, 2]], -1)
        L1 = np.stack([xx, f[lid, 3]], -1)
        ir = segment_roots(field, L0, L1, f[lid, 4][:, None], with_h=False, n_sample=9)
        jid, ys, yw = _gauss_pieces(ir, n=8)
        yy = f[lid[jid], 2] + ys * (f[lid[jid], 3] - f[lid[jid], 2])
        pz = _phi_z(field, xx[jid], yy, f[lid[jid], 4])
        inner = np.bincount(jid, weights=yw * pz, minlength=len(lid))
        inner *= f[lid, 3] - f[lid, 2]
        outer = np.bincount(lid, weights=xw * inner, minlength=n) * (f[:, 1] - f[:, 0])
        out[act] = outer
    return np.bincount(owner, weights=out * sign, minlength=len(boxes))


def box_flux(field: CalibrationField, boxes: list[Box]) -> np.ndarray:
    return side_flux(field, boxes) + horizontal_flux(field, boxes)


# ----------------------------------------------------------------------
# box generation
def _fit_box(rng, field, p, z, hz, family, frac=(0.02, 0.15)) -> Box | None:
    r = field.params.u_radius
    h = rng.uniform(*frac) * r
    room = (r * (1 - 1e-9) - math.hypot(p[0], p[1])) / math.sqrt(2)
    h = min(h, room)
    if h < 0.005 * r:
        return None
    hx = h * rng.uniform(0.6, 1.0)
    hy = h * rng.uniform(0.6, 1.0)
    # random offset so that the surface point is not the box centre
    cx = p[0] + rng.uniform(-0.5, 0.5) * hx
    cy = p[1] + rng.uniform(-0.5, 0.5) * hy
    if math.hypot(abs(cx) + hx, abs(cy) + hy) >= r:
        cx, cy = p[0], p[1]
    lo, hi = z_range(field)
    z0, z1 = max(lo, z - hz * rng.uniform(0.3, 1.0)), min(hi, z + hz * rng.uniform(0.3, 1.0))
    return Box(cx - hx, cx + hx, cy - hy, cy + hy, z0, z1, family)


def _gluing_point(field, rng, i: int):
    """Random point of the curve {h_i = 0} inside U."""
    ch = field.chars
    r = field.params.u_radius
    N = rng.uniform(-0.9, 0.9) * r
    T = ch._T_on_line(i, np.array(0.0), np.array(N), np.array(0.0))
    tau, nu = GEOMETRY.tau[i], GEOMETRY.nu[i]
    return np.array([T * tau[0] + N * nu[0], T * tau[1] + N * nu[1]], dtype=float)


def make_boxes(field: CalibrationField, n_boxes: int = 500, per_family: int = 50,
               seed: int = 0) -> list[Box]:
    rng = np.random.default_rng(seed)
    r = field.params.u_radius
    e, lam = field.params.epsilon, field.params.lam
    families = ["G_lower", "G_upper", "K_lower", "K_upper", "H_lower", "H_upper", "h_zero"]
    if field.triple.antisymmetric:
        families.append("slit")
    boxes: list[Box] = []
    for fam in families:
        made = 0
        while made < per_family:
            k = made
            if fam == "h_zero":
                i = 1 + k % 2
                p = _gluing_point(field, rng, i)
            elif fam == "slit":
                lab = ("S_01", "S_12", "S_02")[k % 3]
                p = rng.uniform(0.05, 0.9) * r * GEOMETRY.ray_direction(lab)
            else:
                x, y = random_disc(rng, 1, 0.9 * r)
                p = np.array([x[0], y[0]])
            pd = field.point_data(p[0], p[1])
            if fam.startswith("G"):
                j = k % 3
                z = pd.u[j, 0] + (-e if fam == "G_lower" else e)
                hz = rng.uniform(0.05, 0.5) * e
            elif fam.startswith("K"):
                i = 1 + k % 2
                li = field.params.l[i]
                z = li + (pd.alpha[i, 0] if fam == "K_lower" else 2 * lam + pd.beta[i, 0])
                hz = rng.uniform(0.02, 0.3) * lam
            elif fam.startswith("H"):
                i = 1 + k % 2
                z = field.params.l[i] + (0.5 * lam if fam == "H_lower" else 1.5 * lam)
                hz = rng.uniform(0.02, 0.3) * lam
            elif fam == "h_zero":
                li = field.params.l[i]
                lo = li + max(pd.alpha[i, 0], 0.0)
                z = rng.uniform(lo, li + 0.5 * lam)
                hz = 0.2 * (li + 0.5 * lam - lo)
            else:
                j = rng.integers(0, 3)
                z = pd.u[j, 0] + rng.uniform(-e, e)
                hz = rng.uniform(0.1, 1.0) * e
            bx = _fit_box(rng, field, p, z, hz, fam)
            if bx is not None:
                boxes.append(bx)
                made += 1
    lo, hi = z_range(field)
    while len(boxes) < n_boxes:
        x, y = random_disc(rng, 1, 0.9 * r)
        z = rng.uniform(lo, hi)
        hz = rng.uniform(0.005, 0.1) * (hi - lo)
        bx = _fit_box(rng, field, (x[0], y[0]), z, hz, "uniform", frac=(0.02, 0.3))
        if bx is not None:
            boxes.append(bx)
    return boxes


def check_divergence(field: CalibrationField, n_boxes: int = 500, tol: float = 1e-6,
                     seed: int = 0, per_family: int = 50, boxes: list[Box] | None = None,
                     ) -> ConditionResult:
    """Condition (a): |net flux| <= tol * surface area for every box."""
    boxes = boxes if boxes is not None else make_boxes(field, n_boxes, per_family, seed)
    flux = box_flux(field, boxes)
    area = np.array([b.area for b in boxes])
    rel = np.abs(flux) / area
    k = int(np.argmax(rel))
    worst_by_family = {}
    for b, v in zip(boxes, rel):
        worst_by_family[b.family] = max(worst_by_family.get(b.family, 0.0), float(v))
    bx = boxes[k]
    return ConditionResult(
        name="a", passed=bool(rel[k] <= tol), margin=-float(rel[k]), tolerance=tol,
        samples=len(boxes),
        witness={"box": [bx.x0, bx.x1, bx.y0, bx.y1, bx.z0, bx.z1], "family": bx.family,
                 "flux": float(flux[k])},
        details={"max_flux_over_area_by_family": worst_by_family},
        table=[[b.family, b.x0, b.x1, b.y0, b.y1, b.z0, b.z1, float(f), float(v)]
               for b, f, v in zip(boxes, flux, rel)])
