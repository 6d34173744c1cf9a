"""Sector geometry of the triple junction and the harmonic sector functions.

The three sectors A_0, A_1, A_2 of the unit disc are separated by the rays
S_01 (angle 4pi/3), S_12 (angle 2pi/3) and S_02 (angle 0).  Each u_i is a
finite sum of Neumann eigenmodes of its sector, written in complex form as

    symmetric:      u_i = a_i + Re  sum_k c_ik (e^{-i theta_i} z)^{3k}
    antisymmetric:  u_i = a_i + s_i Im sum_k c_ik (e^{-i theta_i} z)^{3(2k+1)/2}

with the principal branch of the fractional power.  Derivatives follow from
the Cauchy-Riemann relations, so values, gradients and Hessians are exact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchCut, OutOfDomain

SQRT3 = math.sqrt(3.0)
_H = SQRT3 / 2.0

LABELS = ("A_0", "A_1", "A_2", "S_01", "S_12", "S_02", "Origin")
RAYS = ("S_01", "S_12", "S_02")


@dataclass(frozen=True)
class SectorGeometry:
    """Fixed geometry of the symmetric triple junction."""

    tau: dict = field(default_factory=lambda: {
        1: np.array([-0.5, -_H]), 2: np.array([-0.5, _H])})
    nu: dict = field(default_factory=lambda: {
        1: np.array([-_H, 0.5]), 2: np.array([_H, 0.5])})
    ex: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    ey: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))
    bisector: tuple = (5 * math.pi / 3, math.pi, math.pi / 3)

    # direction of each interface ray and the normal nu_u used on it
    def ray_direction(self, label: str) -> np.ndarray:
        return {"S_01": self.tau[1], "S_12": self.tau[2], "S_02": self.ex}[label]

    def ray_normal(self, label: str) -> np.ndarray:
        return {"S_01": self.nu[1], "S_12": self.nu[2], "S_02": self.ey}[label]

    def ray_sectors(self, label: str) -> tuple[int, int]:
        return {"S_01": (0, 1), "S_12": (1, 2), "S_02": (0, 2)}[label]


GEOMETRY = SectorGeometry()

# e^{-i theta_i} with exact components, so that rays map onto exact axes
ROTATION = (complex(0.5, _H), complex(-1.0, 0.0), complex(0.5, -_H))

# ray that is a branch cut for the antisymmetric u_i
SLIT_OF_SECTOR = ("S_12", "S_02", "S_01")
ANTISYMMETRIC_SIGNS = (1, -1, 1)


class Symmetry(enum.Enum):
    SYMMETRIC = "symmetric"
    ANTISYMMETRIC = "antisymmetric"


def classify_point(p, geometry: SectorGeometry = GEOMETRY) -> str:
    """Label of p in the partition of the disc, using exact sign tests."""
    x, y = float(p[0]), float(p[1])
    if x * x + y * y >= 1.0:
        raise OutOfDomain(f"point {(x, y)} is outside the unit disc")
    if x == 0.0 and y == 0.0:
        return "Origin"
    n1 = geometry.nu[1][0] * x + geometry.nu[1][1] * y
    n2 = geometry.nu[2][0] * x + geometry.nu[2][1] * y
    if y == 0.0 and x > 0.0:
        return "S_02"
    if n2 == 0.0 and y > 0.0:
        return "S_12"
    if n1 == 0.0 and y < 0.0:
        return "S_01"
    if y > 0.0 and n2 > 0.0:
        return "A_2"
    if n2 < 0.0 and n1 > 0.0:
        return "A_1"
    return "A_0"


def on_ray(label: str, x, y):
    """Vectorised exact membership test for an open interface ray."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if label == "S_02":
        return (y == 0.0) & (x > 0.0)
    if label == "S_12":
        return (_H * x + 0.5 * y == 0.0) & (y > 0.0)
    if label == "S_01":
        return (-_H * x + 0.5 * y == 0.0) & (y < 0.0)
    raise ValueError(f"unknown ray {label!r}")


def sector_mask(i: int, x, y):
    """Vectorised membership in the open sector A_i."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n1 = -_H * x + 0.5 * y
    n2 = _H * x + 0.5 * y
    if i == 2:
        return (y > 0.0) & (n2 > 0.0)
    if i == 1:
        return (n2 < 0.0) & (n1 > 0.0)
    return (n1 < 0.0) & (y < 0.0)


@dataclass(frozen=True)
class DomainDescriptor:
    """Where the harmonic extension of u_i is valid."""

    sector: int
    kind: str  # "disc" or "slit_disc"
    slit: str | None = None
    slit_angle: float | None = None

    def contains(self, p) -> bool:
        x, y = float(p[0]), float(p[1])
        if x * x + y * y >= 1.0:
            return False
        if self.slit is None:
            return True
        return not bool(on_ray(self.slit, x, y))


@dataclass(frozen=True)
class SectorHarmonicTriple:
    """Candidate minimiser u = (u_0, u_1, u_2) built from sector eigenmodes.

    ``coeffs`` has shape (3, K): row i holds the coefficients used in
    sector i.  A proper triple shares one row across the sectors; the
    per-sector form exists so that broken candidates can be expressed.
    """

    symmetry: Symmetry
    ks: tuple
    coeffs: np.ndarray
    constants: tuple
    signs: tuple = (1, 1, 1)
    geometry: SectorGeometry = GEOMETRY

    MAX_MODES = 8

    def __post_init__(self):
        ks = tuple(int(k) for k in self.ks)
        if any(k < 1 for k in ks):
            raise ValueError("mode indices must be >= 1")
        if len(ks) > self.MAX_MODES:
            raise ValueError(f"at most {self.MAX_MODES} modes are supported")
        coeffs = np.array(self.coeffs, dtype=float).reshape(3, len(ks))
        coeffs.setflags(write=False)
        if len(self.constants) != 3:
            raise ValueError("three constants a_0, a_1, a_2 are required")
        object.__setattr__(self, "symmetry", Symmetry(self.symmetry))
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "constants", tuple(float(a) for a in self.constants))
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))

    @classmethod
    def from_modes(cls, symmetry, modes, constants, signs=None):
        """Triple whose sectors share the coefficient list ``modes`` = [(k, c_k)]."""
        symmetry = Symmetry(symmetry)
        modes = list(modes)
        ks = tuple(int(k) for k, _ in modes)
        row = [float(c) for _, c in modes]
        if signs is None:
            signs = ANTISYMMETRIC_SIGNS if symmetry is Symmetry.ANTISYMMETRIC else (1, 1, 1)
        return cls(symmetry, ks, np.array([row, row, row]).reshape(3, len(ks)),
                   tuple(constants), tuple(signs))

    @classmethod
    def constants_only(cls, constants=(0.0, 1.0, 2.0)):
        return cls.from_modes(Symmetry.SYMMETRIC, [], constants)

    @property
    def exponents(self) -> tuple:
        if self.symmetry is Symmetry.SYMMETRIC:
            return tuple(3.0 * k for k in self.ks)
        return tuple(1.5 * (2 * k + 1) for k in self.ks)

    @property
    def antisymmetric(self) -> bool:
        return self.symmetry is Symmetry.ANTISYMMETRIC

    def slit(self, i: int) -> str | None:
        return SLIT_OF_SECTOR[i] if self.antisymmetric else None

    # ------------------------------------------------------------------
    def _series(self, i: int, z: np.ndarray, order: int):
        """F, F', F'' of the complex potential of sector i at z."""
        rot = ROTATION[i]
        w = rot * z
        F = np.zeros_like(z)
        F1 = np.zeros_like(z) if order >= 1 else None
        F2 = np.zeros_like(z) if order >= 2 else None
        for c, m in zip(self.coeffs[i], self.exponents):
            if c == 0.0:
                continue
            if self.antisymmetric:
                F = F + c * np.power(w, m)
                if order >= 1:
                    F1 = F1 + c * m * np.power(w, m - 1.0) * rot
                if order >= 2:
                    F2 = F2 + c * m * (m - 1.0) * np.power(w, m - 2.0) * rot * rot
            else:
                n = int(round(m))
                F = F + c * w ** n
                if order >= 1:
                    F1 = F1 + c * n * w ** (n - 1) * rot
                if order >= 2:
                    F2 = F2 + c * n * (n - 1) * w ** (n - 2) * rot * rot
        return F, F1, F2

    def _prepare(self, i: int, x, y, allow_cut: bool, check: bool):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        if check:
            if np.any(x * x + y * y >= 1.0):
                raise OutOfDomain("evaluation point outside the unit disc")
            if self.antisymmetric and not allow_cut and np.any(on_ray(SLIT_OF_SECTOR[i], x, y)):
                raise BranchCut(f"point on the slit {SLIT_OF_SECTOR[i]} of u_{i}")
        return x, y, x + 1j * y

    def value(self, i: int, x, y, *, allow_cut: bool = False, check: bool = True):
        x, y, z = self._prepare(i, x, y, allow_cut, check)
        F, _, _ = self._series(i, z, 0)
        if self.antisymmetric:
            return self.constants[i] + self.signs[i] * F.imag
        return self.constants[i] + F.real

    def gradient(self, i: int, x, y, *, allow_cut: bool = False, check: bool = True):
        """Gradient with trailing axis of length 2."""
        x, y, z = self._prepare(i, x, y, allow_cut, check)
        _, F1, _ = self._series(i, z, 1)
        if self.antisymmetric:
            s = self.signs[i]
            return np.stack([s * F1.imag, s * F1.real], axis=-1)
        return np.stack([F1.real, -F1.imag], axis=-1)

    def evaluate(self, i: int, x, y, *, allow_cut: bool = False, check: bool = True):
        """Value, gradient (..., 2) and Hessian (..., 2, 2) of u_i."""
        x, y, z = self._prepare(i, x, y, allow_cut, check)
        F, F1, F2 = self._series(i, z, 2)
        if self.antisymmetric:
            s = self.signs[i]
            val = self.constants[i] + s * F.imag
            grad = np.stack([s * F1.imag, s * F1.real], axis=-1)
            hxx, hxy = s * F2.imag, s * F2.real
        else:
            val = self.constants[i] + F.real
            grad = np.stack([F1.real, -F1.imag], axis=-1)
            hxx, hxy = F2.real, -F2.imag
        hess = np.stack([np.stack([hxx, hxy], axis=-1),
                         np.stack([hxy, -hxx], axis=-1)], axis=-2)
        return val, grad, hess

    def to_dict(self) -> dict:
        same = bool(np.all(self.coeffs == self.coeffs[0]))
        out = {
            "symmetry": self.symmetry.value,
            "constants": list(self.constants),
            "modes": [[k, float(c)] for k, c in zip(self.ks, self.coeffs[0])],
        }
        if not same:
            out["sector_coefficients"] = self.coeffs.tolist()
        if self.antisymmetric:
            out["signs"] = list(self.signs)
        return out


def eval(triple: SectorHarmonicTriple, i: int, p):
    """Exact value, gradient and Hessian of u_i at the single point p."""
    val, grad, hess = triple.evaluate(i, p[0], p[1])
    return float(val), np.asarray(grad, dtype=float), np.asarray(hess, dtype=float)


def extend_domain(triple: SectorHarmonicTriple, i: int) -> DomainDescriptor:
    if not triple.antisymmetric:
        return DomainDescriptor(sector=i, kind="disc")
    slit = SLIT_OF_SECTOR[i]
    angle = {"S_01": 4 * math.pi / 3, "S_12": 2 * math.pi / 3, "S_02": 0.0}[slit]
    return DomainDescriptor(sector=i, kind="slit_disc", slit=slit, slit_angle=angle)


@dataclass(frozen=True)
class HypothesisReport:
    neumann_residual: float
    gradient_jump_residual: float
    ordering_ok: bool
    origin_gradient: float
    laplacian_residual: float
    tol: float
    n_samples: int
    worst_neumann_at: tuple | None = None
    worst_jump_at: tuple | None = None

    @property
    def passed(self) -> bool:
        return (self.neumann_residual <= self.tol
                and self.gradient_jump_residual <= self.tol
                and self.origin_gradient <= self.tol
                and self.ordering_ok)

    def failures(self) -> list[str]:
        out = []
        if self.neumann_residual > self.tol:
            out.append(f"Neumann residual {self.neumann_residual:.3e} > {self.tol:g}")
        if self.gradient_jump_residual > self.tol:
            out.append(f"gradient modulus mismatch {self.gradient_jump_residual:.3e} > {self.tol:g}")
        if self.origin_gradient > self.tol:
            out.append(f"|grad u(0,0)| = {self.origin_gradient:.3e} > {self.tol:g}")
        if not self.ordering_ok:
            out.append("constants are not strictly increasing")
        return out

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "neumann_residual": self.neumann_residual,
            "gradient_jump_residual": self.gradient_jump_residual,
            "ordering_ok": self.ordering_ok,
            "origin_gradient": self.origin_gradient,
            "laplacian_residual": self.laplacian_residual,
            "tol": self.tol,
            "n_samples": self.n_samples,
            "worst_neumann_at": self.worst_neumann_at,
            "worst_jump_at": self.worst_jump_at,
            "failures": self.failures(),
        }


def check_hypotheses(triple: SectorHarmonicTriple, tol: float = 1e-10,
                     n_samples: int = 64, radius: float = 0.95) -> HypothesisReport:
    """Sample the interface conditions of the candidate on the three rays."""
    if tol <= 0 or n_samples < 8:
        raise ValueError("need tol > 0 and n_samples >= 8")
    geo = triple.geometry
    s = np.linspace(radius / n_samples, radius, n_samples)
    worst_n, worst_j = 0.0, 0.0
    at_n = at_j = None
    for label in RAYS:
        d = geo.ray_direction(label)
        nrm = geo.ray_normal(label)
        x, y = s * d[0], s * d[1]
        i, j = geo.ray_sectors(label)
        gi = triple.gradient(i, x, y)
        gj = triple.gradient(j, x, y)
        for g in (gi, gj):
            res = np.abs(g @ nrm)
            k = int(np.argmax(res))
            if res[k] > worst_n:
                worst_n, at_n = float(res[k]), (float(x[k]), float(y[k]))
        jump = np.abs(np.linalg.norm(gi, axis=-1) - np.linalg.norm(gj, axis=-1))
        k = int(np.argmax(jump))
        if jump[k] > worst_j:
            worst_j, at_j = float(jump[k]), (float(x[k]), float(y[k]))
    origin = max(float(np.linalg.norm(triple.gradient(i, 0.0, 0.0))) for i in range(3))
    a = triple.constants
    # Laplacian on sector interiors, along the bisectors
    lap = 0.0
    for i in range(3):
        th = triple.geometry.bisector[i] + 0.3
        _, _, H = triple.evaluate(i, s * math.cos(th), s * math.sin(th))
        lap = max(lap, float(np.max(np.abs(H[..., 0, 0] + H[..., 1, 1]))))
    return HypothesisReport(
        neumann_residual=worst_n, gradient_jump_residual=worst_j,
        ordering_ok=bool(a[0] < a[1] < a[2]), origin_gradient=origin,
        laplacian_residual=lap, tol=tol, n_samples=n_samples,
        worst_neumann_at=at_n, worst_jump_at=at_j)
