"""The piecewise calibration field on U x R.

Regions, from bottom to top at a fixed planar point p:
G_0, K_1 (containing H_1), G_1, K_2 (containing H_2), G_2, with the vertical
field (0, omega) everywhere else.  Every band is a half-open interval
(lower, upper], so a point on a boundary surface belongs to the region
below it.  In the antisymmetric case the bands that use a sector function
on its slit are removed and those points carry the vertical field.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .characteristics import GRAD_V
from .errors import OutOfDomain
from .harmonic import SectorHarmonicTriple, on_ray
from .params import CalibrationParams

VERTICAL, G0, G1, G2, K1, H1, K2, H2 = range(8)
REGION_NAMES = ("Vertical", "G_0", "G_1", "G_2", "K_1\\H_1", "H_1", "K_2\\H_2", "H_2")

# slits removed from H_i in the antisymmetric case
_H_SLITS = {1: ("S_12", "S_02"), 2: ("S_01", "S_02")}
_G_SLIT = ("S_12", "S_02", "S_01")


@dataclass
class PointData:
    """Everything the field needs at a batch of planar points (leading axis M)."""

    x: np.ndarray
    y: np.ndarray
    u: np.ndarray       # (3, M)
    gu: np.ndarray      # (3, M, 2)
    v: np.ndarray       # (3, M)
    alpha: np.ndarray   # (3, M), rows 1 and 2 used
    beta: np.ndarray
    sigma: np.ndarray
    h: np.ndarray
    phi: np.ndarray     # (3, M, 2)
    g_ok: np.ndarray    # (3, M) bool
    h_ok: np.ndarray    # (3, M) bool

    def __len__(self) -> int:
        return self.x.shape[0]

    def take(self, idx) -> "PointData":
        kw = {}
        for name in self.__dataclass_fields__:
            arr = getattr(self, name)
            kw[name] = arr[idx] if arr.ndim == 1 else arr[:, idx]
        return PointData(**kw)


def _expand(a: np.ndarray, nd: int) -> np.ndarray:
    return a.reshape(a.shape + (1,) * nd)


class CalibrationField:
    def __init__(self, triple: SectorHarmonicTriple, params: CalibrationParams):
        self.triple = triple
        self.params = params
        self.ing = params.ingredients()
        self.chars = params.characteristics(triple)

    # ------------------------------------------------------------------
    def point_data(self, x, y, branches: dict | None = None) -> PointData:
        x = np.atleast_1d(np.asarray(x, float)).ravel()
        y = np.atleast_1d(np.asarray(y, float)).ravel()
        x, y = np.broadcast_arrays(x, y)
        branches = branches or {}
        M = x.shape[0]
        tri = self.triple
        u = np.empty((3, M))
        gu = np.empty((3, M, 2))
        v = np.empty((3, M))
        for j in range(3):
            u[j] = tri.value(j, x, y, allow_cut=True, check=False)
            gu[j] = tri.gradient(j, x, y, allow_cut=True, check=False)
            v[j] = self.ing.v(j, x, y)
        alpha = np.zeros((3, M))
        beta = np.zeros((3, M))
        sigma = np.ones((3, M))
        h = np.zeros((3, M))
        phi = np.zeros((3, M, 2))
        for i in (1, 2):
            d = self.chars.evaluate(i, x, y, branches.get(i))
            alpha[i], beta[i], sigma[i], h[i] = d["alpha"], d["beta"], d["sigma"], d["h"]
            phi[i] = self.ing.phi(i, x, y)
        g_ok = np.ones((3, M), bool)
        h_ok = np.ones((3, M), bool)
        if tri.antisymmetric:
            for j in range(3):
                g_ok[j] = ~on_ray(_G_SLIT[j], x, y)
            for i in (1, 2):
                for lab in _H_SLITS[i]:
                    h_ok[i] &= ~on_ray(lab, x, y)
        return PointData(x.copy(), y.copy(), u, gu, v, alpha, beta, sigma, h, phi, g_ok, h_ok)

    def bands(self, pd: PointData) -> dict:
        """Lower and upper z-limits of every band at each point."""
        e, lam = self.params.epsilon, self.params.lam
        out = {}
        for j in range(3):
            out[("G", j)] = (pd.u[j] - e, pd.u[j] + e)
        for i in (1, 2):
            li = self.params.l[i]
            out[("K", i)] = (li + pd.alpha[i], li + 2 * lam + pd.beta[i])
            out[("H", i)] = (np.full_like(pd.x, li + lam / 2), np.full_like(pd.x, li + 1.5 * lam))
        return out

    def breakpoints(self, pd: PointData) -> np.ndarray:
        """z-values where the field changes region, shape (M, 15)."""
        b = self.bands(pd)
        cols = []
        for key in (("G", 0), ("K", 1), ("H", 1), ("G", 1), ("K", 2), ("H", 2), ("G", 2)):
            cols.extend(b[key])
        cols.extend(pd.u)
        return np.stack(cols, axis=-1)

    # ------------------------------------------------------------------
    def region_codes(self, pd: PointData, z) -> np.ndarray:
        z = np.asarray(z, float)
        nd = z.ndim - 1
        b = self.bands(pd)
        code = np.zeros(z.shape, dtype=np.int8)
        for j in range(3):
            lo, hi = b[("G", j)]
            m = (z > _expand(lo, nd)) & (z <= _expand(hi, nd)) & _expand(pd.g_ok[j], nd)
            code[m] = G0 + j
        for i, kc, hc in ((1, K1, H1), (2, K2, H2)):
            lo, hi = b[("K", i)]
            inK = (z > _expand(lo, nd)) & (z <= _expand(hi, nd))
            lo, hi = b[("H", i)]
            inH = (z > _expand(lo, nd)) & (z <= _expand(hi, nd))
            code[inK & ~inH] = kc
            code[inH & _expand(pd.h_ok[i], nd)] = hc
        return code

    def omega(self, pd: PointData, z) -> np.ndarray:
        z = np.asarray(z, float)
        nd = z.ndim - 1
        lam = self.params.lam
        e2 = self.params.epsilon ** 2
        om = [e2 / pd.v[j] ** 2 - np.sum(pd.gu[j] ** 2, axis=-1) for j in range(3)]
        j = np.where(z < self.params.l1 + lam, 0, np.where(z < self.params.l2 + lam, 1, 2))
        return np.choose(j, [_expand(o, nd) for o in om])

    def evaluate(self, pd: PointData, z):
        """Field at (p_k, z_k...): returns phi_xy (..., 2), phi_z (...), region codes."""
        z = np.asarray(z, float)
        nd = z.ndim - 1
        code = self.region_codes(pd, z)
        lam, mu, e = self.params.lam, self.params.mu, self.params.epsilon
        pxy = np.zeros(z.shape + (2,))
        pz = self.omega(pd, z)
        for j in range(3):
            m = code == G0 + j
            if not np.any(m):
                continue
            w = (z - _expand(pd.u[j], nd)) / _expand(pd.v[j], nd)
            gu = pd.gu[j].reshape(pd.gu[j].shape[:1] + (1,) * nd + (2,))
            q = gu + w[..., None] * GRAD_V[j]
            full_xy = 2.0 * q
            full_z = np.sum(q * q, axis=-1)
            pxy[m] = np.broadcast_to(full_xy, pxy.shape)[m]
            pz[m] = np.broadcast_to(full_z, pz.shape)[m]
        for i, kc, hc in ((1, K1, H1), (2, K2, H2)):
            m = code == kc
            if np.any(m):
                sp = (pd.sigma[i][:, None] * pd.phi[i] / lam).reshape(
                    (pd.x.shape[0],) + (1,) * nd + (2,))
                pxy[m] = np.broadcast_to(sp, pxy.shape)[m]
                pz[m] = mu
            m = code == hc
            if np.any(m):
                hv = (-2.0 * e / lam * (pd.gu[i - 1] + pd.gu[i])).reshape(
                    (pd.x.shape[0],) + (1,) * nd + (2,))
                pxy[m] = np.broadcast_to(hv, pxy.shape)[m]
                pz[m] = mu
        return pxy, pz, code

    # ------------------------------------------------------------------
    def band_integral(self, pd: PointData, t1, t2) -> np.ndarray:
        """Integral of phi_xy over z in [t1, t2] (oriented), trailing axis 2."""
        t1 = np.asarray(t1, float)
        t2 = np.asarray(t2, float)
        t1, t2 = np.broadcast_arrays(t1, t2)
        sign = np.where(t2 >= t1, 1.0, -1.0)
        a, b = np.minimum(t1, t2), np.maximum(t1, t2)
        nd = a.ndim - 1
        lam, e = self.params.lam, self.params.epsilon
        bands = self.bands(pd)
        out = np.zeros(a.shape + (2,))
        for j in range(3):
            lo, hi = (_expand(c, nd) for c in bands[("G", j)])
            zl, zh = np.clip(a, lo, hi), np.clip(b, lo, hi)
            uj = _expand(pd.u[j], nd)
            vj = _expand(pd.v[j], nd)
            ok = _expand(pd.g_ok[j], nd)
            length = np.where(ok, zh - zl, 0.0)
            quad = np.where(ok, ((zh - uj) ** 2 - (zl - uj) ** 2) / vj, 0.0)
            gu = pd.gu[j].reshape(pd.gu[j].shape[:1] + (1,) * nd + (2,))
            out += 2.0 * length[..., None] * gu + quad[..., None] * GRAD_V[j]
        for i in (1, 2):
            klo, khi = (_expand(c, nd) for c in bands[("K", i)])
            hlo, hhi = (_expand(c, nd) for c in bands[("H", i)])
            k_len = np.clip(b, klo, khi) - np.clip(a, klo, khi)
            h_len = np.clip(b, hlo, hhi) - np.clip(a, hlo, hhi)
            hok = _expand(pd.h_ok[i], nd)
            kh_len = k_len - h_len
            sp = (pd.sigma[i][:, None] * pd.phi[i] / lam).reshape(
                (pd.x.shape[0],) + (1,) * nd + (2,))
            hv = (-2.0 * e / lam * (pd.gu[i - 1] + pd.gu[i])).reshape(
                (pd.x.shape[0],) + (1,) * nd + (2,))
            out += kh_len[..., None] * sp + np.where(hok, h_len, 0.0)[..., None] * hv
        return sign[..., None] * out

    def antiderivative(self, pd: PointData, z) -> np.ndarray:
        z = np.asarray(z, float)
        return self.band_integral(pd, np.full_like(z, -np.inf), z)

    # ------------------------------------------------------------------
    # single-point conveniences
    def _check(self, p):
        x, y = float(p[0]), float(p[1])
        if x * x + y * y > self.params.u_radius ** 2 * (1 + 1e-12):
            raise OutOfDomain(f"point {(x, y)} is outside U (radius {self.params.u_radius})")
        return x, y

    def region_of(self, p, z) -> str:
        x, y = self._check(p)
        pd = self.point_data(x, y)
        return REGION_NAMES[int(self.region_codes(pd, np.array([float(z)]))[0])]

    def eval_field(self, p, z):
        x, y = self._check(p)
        pd = self.point_data(x, y)
        pxy, pz, _ = self.evaluate(pd, np.array([float(z)]))
        return pxy[0].copy(), float(pz[0])

    def omega_vertical(self, p, z) -> float:
        x, y = self._check(p)
        return float(self.omega(self.point_data(x, y), np.array([float(z)]))[0])

    def jump_integral(self, p, t1: float, t2: float) -> np.ndarray:
        x, y = self._check(p)
        pd = self.point_data(x, y)
        return self.band_integral(pd, np.array([t1]), np.array([t2]))[0]

    def g_divergence(self, j: int, x, y, z):
        """Divergence of the G_j formula, assembled from exact derivatives."""
        val, gu, hu = self.triple.evaluate(j, x, y, allow_cut=True, check=False)
        v = self.ing.v(j, x, y)
        gv = GRAD_V[j]
        w = (z - val) / v
        gw = -gu / v[..., None] - (w / v)[..., None] * gv
        lap = hu[..., 0, 0] + hu[..., 1, 1]
        div_xy = 2.0 * lap + 2.0 * (gw @ gv)
        q = gu + w[..., None] * gv
        div_z = 2.0 * (q @ gv) / v
        return div_xy + div_z


def dump_field_csv(field: CalibrationField, path, n_xy: int = 9, n_z: int = 64) -> None:
    """Write a sampled grid of the field, one row per sample."""
    r = field.params.u_radius
    a = field.triple.constants
    e = field.params.epsilon
    s = np.linspace(-r, r, n_xy)
    X, Y = np.meshgrid(s, s, indexing="ij")
    keep = X ** 2 + Y ** 2 <= r * r
    pd = field.point_data(X[keep], Y[keep])
    z = np.linspace(a[0] - 2 * e, a[2] + 2 * e, n_z)
    Z = np.broadcast_to(z, (len(pd), n_z))
    pxy, pz, code = field.evaluate(pd, Z)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z", "phi_x", "phi_y", "phi_z", "region"])
        for k in range(len(pd)):
            for m in range(n_z):
                w.writerow([repr(float(pd.x[k])), repr(float(pd.y[k])), repr(float(z[m])),
                            repr(float(pxy[k, m, 0])), repr(float(pxy[k, m, 1])),
                            repr(float(pz[k, m])), REGION_NAMES[code[k, m]]])
