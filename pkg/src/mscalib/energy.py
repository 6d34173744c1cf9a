"""Mumford-Shah energy of u on U and of seeded competitors with the same trace.

Meshes are built sector by sector, with nodes duplicated along the
discontinuity rays so every triangle lies in one sector.  Analytic fields are
integrated with the degree-2 three-point rule on each triangle; nodal fields
use the piecewise-linear gradient.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import CalibError
from .harmonic import GEOMETRY, RAYS, SectorHarmonicTriple

log = logging.getLogger(__name__)

KINDS = ("JunctionShift", "BubblePerturbation", "JumpErasure")

# three-point rule, exact for quadratics: barycentric (2/3, 1/6, 1/6) and permutations
_QB = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])


class NonConformingMesh(CalibError, ValueError):
    """A triangle is crossed by the discontinuity set of the field."""


@dataclass
class Mesh:
    nodes: np.ndarray          # (N, 2)
    tris: np.ndarray           # (T, 3)
    region: np.ndarray         # (T,) sector of each triangle
    jump_segments: np.ndarray  # (S, 2, 2)
    boundary: np.ndarray       # indices of nodes on the outer circle
    node_region: np.ndarray    # (N,) sector owning each node copy
    xi: np.ndarray
    radius: float
    n: int

    @property
    def h(self) -> float:
        return self.radius / self.n

    def areas(self) -> np.ndarray:
        P = self.nodes[self.tris]
        a, b = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def in_region(self, i: int, x, y) -> np.ndarray:
        """Membership in the (possibly shifted) sector i, closed."""
        a, b = sector_angles(i)
        pa = self.radius * np.array([math.cos(a), math.sin(a)]) - self.xi
        pb = self.radius * np.array([math.cos(b), math.sin(b)]) - self.xi
        dx, dy = np.asarray(x) - self.xi[0], np.asarray(y) - self.xi[1]
        tol = 1e-12 * self.radius ** 2
        return (pa[0] * dy - pa[1] * dx >= -tol) & (dx * pb[1] - dy * pb[0] >= -tol)


def sector_angles(i: int) -> tuple[float, float]:
    th = GEOMETRY.bisector[i]
    return th - math.pi / 3, th + math.pi / 3


def sector_mesh(radius: float, n: int, xi=(0.0, 0.0)) -> Mesh:
    """Mesh of the disc split into three regions joined at xi.

    Region i is swept by segments from xi to the arc of sector i, so the
    outer nodes do not depend on xi and the discontinuity set is the three
    segments from xi to radius * (ray direction)."""
    xi = np.asarray(xi, float)
    if np.hypot(*xi) >= radius:
        raise ValueError("junction must lie inside the disc")
    n_t = max(2, math.ceil(2 * math.pi / 3 * n))
    s = np.arange(1, n + 1) / n
    nodes, tris, region, node_region, boundary = [], [], [], [], []
    base = 0
    for i in range(3):
        a, b = sector_angles(i)
        th = np.linspace(a, b, n_t + 1)
        arc = radius * np.stack([np.cos(th), np.sin(th)], axis=-1)
        P = xi + s[:, None, None] * (arc[None] - xi)          # (n, n_t+1, 2)
        pts = np.concatenate([xi[None], P.reshape(-1, 2)])
        idx = lambda k, m: base + 1 + k * (n_t + 1) + m    # noqa: E731
        m = np.arange(n_t)
        T = [np.stack([np.full(n_t, base), idx(0, m), idx(0, m + 1)], 1)]
        for k in range(n - 1):
            T.append(np.stack([idx(k, m), idx(k + 1, m), idx(k + 1, m + 1)], 1))
            T.append(np.stack([idx(k, m), idx(k + 1, m + 1), idx(k, m + 1)], 1))
        T = np.concatenate(T)
        nodes.append(pts)
        tris.append(T)
        region.append(np.full(len(T), i))
        node_region.append(np.full(len(pts), i))
        boundary.append(idx(n - 1, np.arange(n_t + 1)))
        base += len(pts)
    segs = np.array([[xi, radius * GEOMETRY.ray_direction(lab)] for lab in RAYS])
    return Mesh(np.concatenate(nodes), np.concatenate(tris), np.concatenate(region), segs,
                np.concatenate(boundary), np.concatenate(node_region), xi, radius, n)


@dataclass
class DiscreteEnergy:
    dirichlet: float
    jump_length: float
    n_triangles: int
    h: float

    @property
    def total(self) -> float:
        return self.dirichlet + self.jump_length

    def to_dict(self) -> dict:
        return {"dirichlet": self.dirichlet, "jump_length": self.jump_length,
                "total": self.total, "n_triangles": self.n_triangles, "h": self.h}


def check_conforming(mesh: Mesh) -> None:
    P = mesh.nodes[mesh.tris]
    c = P.mean(axis=1)
    for i in range(3):
        m = mesh.region == i
        bad = ~mesh.in_region(i, c[m, 0], c[m, 1])
        if np.any(bad):
            k = int(np.flatnonzero(m)[np.argmax(bad)])
            raise NonConformingMesh(f"triangle {k} labelled {i} lies outside its region")


def ms_energy(mesh: Mesh, grad=None, values=None, jump_length: float | None = None,
              check: bool = True) -> DiscreteEnergy:
    """Dirichlet integral plus jump length.

    grad(i, x, y) -> (..., 2) gives the analytic gradient in region i;
    otherwise `values` are nodal values of a piecewise-linear field."""
    if check:
        check_conforming(mesh)
    A = mesh.areas()
    P = mesh.nodes[mesh.tris]
    if grad is not None:
        Q = np.einsum("qk,tkd->tqd", _QB, P)              # (T, 3, 2)
        dens = np.zeros(Q.shape[:2])
        for i in range(3):
            m = mesh.region == i
            g = grad(i, Q[m, :, 0], Q[m, :, 1])
            dens[m] = np.sum(g * g, axis=-1)
        D = float(np.sum(A * dens.mean(axis=1)))
    else:
        v = np.asarray(values, float)[mesh.tris]
        G = _p1_gradients(P, A)
        g = np.einsum("tkd,tk->td", G, v)
        D = float(np.sum(A * np.sum(g * g, axis=1)))
    if jump_length is None:
        d = mesh.jump_segments[:, 1] - mesh.jump_segments[:, 0]
        jump_length = float(np.sum(np.hypot(d[:, 0], d[:, 1])))
    return DiscreteEnergy(D, jump_length, len(mesh.tris), mesh.h)


def _p1_gradients(P: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Gradients of the three barycentric hat functions, shape (T, 3, 2)."""
    x, y = P[..., 0], P[..., 1]
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], 1)
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], 1)
    return np.stack([gx, gy], -1) / (2 * A)[:, None, None]


def exact_dirichlet(triple: SectorHarmonicTriple, radius: float) -> float:
    """Closed form for symmetric triples: sum over modes of (n pi / 3) c^2 R^(2n)."""
    if triple.antisymmetric:
        raise ValueError("closed form implemented for symmetric triples")
    total = 0.0
    for i in range(3):
        for n, c in zip(triple.exponents, triple.coeffs[i]):
            total += n * math.pi / 3 * c * c * radius ** (2 * n)
    return total


def _u_grad(triple: SectorHarmonicTriple):
    def grad(i, x, y):
        return triple.gradient(i, x, y, allow_cut=True, check=False)
    return grad


def _u_values(triple: SectorHarmonicTriple, mesh: Mesh) -> np.ndarray:
    v = np.empty(len(mesh.nodes))
    for i in range(3):
        m = mesh.node_region == i
        v[m] = triple.value(i, mesh.nodes[m, 0], mesh.nodes[m, 1], allow_cut=True, check=False)
    return v


# ----------------------------------------------------------------------
# competitors

@dataclass
class Bump:
    sector: int
    centre: np.ndarray
    width: float
    amplitude: float

    def value(self, x, y):
        q = ((x - self.centre[0]) ** 2 + (y - self.centre[1]) ** 2) / self.width ** 2
        return self.amplitude * np.where(q < 1, (1 - q) ** 3, 0.0)

    def gradient(self, x, y):
        dx, dy = x - self.centre[0], y - self.centre[1]
        q = (dx * dx + dy * dy) / self.width ** 2
        f = np.where(q < 1, -6 * (1 - q) ** 2 / self.width ** 2, 0.0) * self.amplitude
        return np.stack([f * dx, f * dy], axis=-1)


def random_bump(rng: np.random.Generator, radius: float, amplitude: float) -> Bump:
    """Support disc strictly inside one sector, away from the rays and the circle."""
    i = int(rng.integers(3))
    th = GEOMETRY.bisector[i] + rng.uniform(-0.5, 0.5) * math.pi / 3
    rc = radius * rng.uniform(0.35, 0.65)
    c = rc * np.array([math.cos(th), math.sin(th)])
    to_rays = rc * math.sin(math.pi / 3 - abs(th - GEOMETRY.bisector[i]))
    w = 0.9 * min(to_rays, radius - rc)
    return Bump(i, c, w, amplitude)


def bump_gap(triple: SectorHarmonicTriple, mesh: Mesh, bump: Bump) -> float:
    """E(u + b) - E(u), integrating the difference of the densities on the mesh."""
    P = mesh.nodes[mesh.tris]
    A = mesh.areas()
    m = mesh.region == bump.sector
    Q = np.einsum("qk,tkd->tqd", _QB, P[m])
    gu = triple.gradient(bump.sector, Q[..., 0], Q[..., 1], allow_cut=True, check=False)
    gb = bump.gradient(Q[..., 0], Q[..., 1])
    dens = np.sum(2 * gu * gb + gb * gb, axis=-1)
    return float(np.sum(A[m] * dens.mean(axis=1)))


def erasure_energy(triple: SectorHarmonicTriple, mesh: Mesh, ray: str, k: int):
    """Remove the first k mesh segments of `ray` from the jump set and minimise
    the discrete Dirichlet energy with the boundary values of u.

    Returns (DiscreteEnergy, nodal values, dof map)."""
    n = mesh.n
    if not 1 <= k <= n // 2:
        raise ValueError("erased length must be between one cell and half the radius")
    i, j = GEOMETRY.ray_sectors(ray)
    d = GEOMETRY.ray_direction(ray)
    N = len(mesh.nodes)
    dof = np.arange(N)
    # glue the copies of sectors i and j at the origin and at s = 1..k cells
    P = mesh.nodes
    s = P @ d
    on = np.abs(P[:, 0] * d[1] - P[:, 1] * d[0]) <= 1e-12 * mesh.radius
    for q in range(k + 1):
        target = q * mesh.h
        ci = np.flatnonzero((mesh.node_region == i) & on & (np.abs(s - target) <= 1e-9 * mesh.h)
                            & (s >= -1e-12))
        cj = np.flatnonzero((mesh.node_region == j) & on & (np.abs(s - target) <= 1e-9 * mesh.h)
                            & (s >= -1e-12))
        if len(ci) != 1 or len(cj) != 1:
            raise NonConformingMesh(f"ray {ray} has no node pair at s = {target}")
        dof[cj[0]] = dof[ci[0]]
    uniq, dof = np.unique(dof, return_inverse=True)
    n_dof = len(uniq)
    A = mesh.areas()
    G = _p1_gradients(P[mesh.tris], A)
    Ke = np.einsum("tad,tbd->tab", G, G) * A[:, None, None]
    rows = np.repeat(dof[mesh.tris], 3, axis=1).ravel()
    cols = np.tile(dof[mesh.tris], (1, 3)).ravel()
    K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(n_dof, n_dof))
    u = _u_values(triple, mesh)
    bnd = np.unique(dof[mesh.boundary])
    vb = np.zeros(n_dof)
    vb[dof[mesh.boundary]] = u[mesh.boundary]
    free = np.setdiff1d(np.arange(n_dof), bnd)
    x = vb.copy()
    rhs = -K[free][:, bnd] @ vb[bnd]
    x[free] = spsolve(K[free][:, free].tocsc(), rhs)
    vals = x[dof]
    D = float(x @ (K @ x))
    L = 3 * mesh.radius - k * mesh.h
    return DiscreteEnergy(D, L, len(mesh.tris), mesh.h), vals, dof


@dataclass
class CompetitorRow:
    cid: int
    kind: str
    params: dict
    dirichlet: float
    length: float
    total: float
    gap: float
    trace_residual: float
    status: str = ""

    def to_csv(self) -> list:
        return [self.cid, self.kind, json.dumps(self.params, sort_keys=True),
                repr(self.dirichlet), repr(self.length), repr(self.total), repr(self.gap),
                repr(self.trace_residual), self.status]


CSV_HEADER = ["competitor_id", "kind", "params", "dirichlet", "length", "total", "gap",
              "trace_residual", "status"]


@dataclass
class EnergyReport:
    radius: float
    mesh_n: int
    energy_u: DiscreteEnergy
    slack: float
    rows: list = field(default_factory=list)
    exponent: float | None = None
    exponent_data: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    retry: dict | None = None

    @property
    def min_gap(self) -> float:
        return min(r.gap for r in self.rows)

    @property
    def status(self) -> str:
        g = self.min_gap
        if g >= 0:
            return "pass"
        if g >= -self.slack:
            return "inconclusive-discretization"
        return "fail"

    @property
    def passed(self) -> bool:
        return self.status != "fail" and all(r.trace_residual <= 1e-12 for r in self.rows)

    def by_kind(self) -> dict:
        out = {}
        for k in KINDS:
            g = [r.gap for r in self.rows if r.kind == k]
            if g:
                out[k] = {"count": len(g), "min_gap": min(g), "max_gap": max(g)}
        return out

    def to_dict(self) -> dict:
        return {"radius": self.radius, "mesh_n": self.mesh_n, "energy_u": self.energy_u.to_dict(),
                "slack": self.slack, "min_gap": self.min_gap, "status": self.status,
                "pass": self.passed, "by_kind": self.by_kind(),
                "bump_exponent": self.exponent, "bump_fit": self.exponent_data,
                "skipped": self.skipped, "retry": self.retry}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow(r.to_csv())


def classify_gap(gap: float, slack: float) -> str:
    if gap >= 0:
        return "ok"
    return "inconclusive-discretization" if gap >= -slack else "beats-u"


def bump_exponent(triple: SectorHarmonicTriple, mesh: Mesh, bump: Bump,
                  amplitudes=(1e-1, 3e-2, 1e-2, 3e-3, 1e-3)) -> tuple[float, dict]:
    """Least-squares slope of log gap against log amplitude."""
    gaps = []
    for c in amplitudes:
        b = Bump(bump.sector, bump.centre, bump.width, c)
        gaps.append(bump_gap(triple, mesh, b))
    gaps = np.array(gaps)
    if np.any(gaps <= 0):
        return float("nan"), {"amplitudes": list(amplitudes), "gaps": gaps.tolist()}
    slope = np.polyfit(np.log(amplitudes), np.log(gaps), 1)[0]
    return float(slope), {"amplitudes": list(amplitudes), "gaps": gaps.tolist()}


def minimality_experiment(triple: SectorHarmonicTriple, radius: float, n_competitors: int = 100,
                          seed: int = 0, mesh_n: int = 32, erasure_n: int = 24,
                          slack_rel: float = 1e-3, retry: bool = True) -> EnergyReport:
    """Seeded competitors of every kind; gap = E(v) - E(u) on matching meshes."""
    rng = np.random.default_rng(seed)
    mesh_u = sector_mesh(radius, mesh_n)
    grad_u = _u_grad(triple)
    E_u = ms_energy(mesh_u, grad=grad_u)
    slack = slack_rel * E_u.total
    rep = EnergyReport(radius, mesh_n, E_u, slack)
    u_bnd = _u_values(triple, mesh_u)[mesh_u.boundary]
    cid = 0

    # junction shifts; u_i is continued analytically past its sector
    if triple.antisymmetric:
        rep.skipped["JunctionShift"] = "sector functions are cut along a ray through the vertex"
    else:
        for q in range(n_competitors):
            if q == 0:
                xi = np.zeros(2)
            else:
                rr = 0.5 * radius * math.sqrt(rng.uniform())
                th = rng.uniform(0, 2 * math.pi)
                xi = rr * np.array([math.cos(th), math.sin(th)])
            mesh = sector_mesh(radius, mesh_n, xi)
            E = ms_energy(mesh, grad=grad_u)
            res = float(np.max(np.abs(_u_values(triple, mesh)[mesh.boundary] - u_bnd))
                        + np.max(np.abs(mesh.nodes[mesh.boundary] - mesh_u.nodes[mesh_u.boundary])))
            gap = E.total - E_u.total
            rep.rows.append(CompetitorRow(cid, "JunctionShift", {"xi": xi.tolist()}, E.dirichlet,
                                          E.jump_length, E.total, gap, res,
                                          classify_gap(gap, slack)))
            cid += 1

    # bumps inside one sector
    first_bump = None
    for q in range(n_competitors):
        c = float(rng.choice([-1, 1]) * 10 ** rng.uniform(-3, -1))
        b = random_bump(rng, radius, c)
        first_bump = first_bump or b
        gap = bump_gap(triple, mesh_u, b)
        res = float(np.max(np.abs(b.value(mesh_u.nodes[mesh_u.boundary, 0],
                                          mesh_u.nodes[mesh_u.boundary, 1]))))
        rep.rows.append(CompetitorRow(
            cid, "BubblePerturbation",
            {"sector": b.sector, "centre": b.centre.tolist(), "width": b.width, "c": c},
            E_u.dirichlet + gap, E_u.jump_length, E_u.total + gap, gap, res,
            classify_gap(gap, slack)))
        cid += 1
    rep.exponent, rep.exponent_data = bump_exponent(triple, mesh_u, first_bump)

    # erasures; compared with u on the same P1 space (all rays kept)
    mesh_e = sector_mesh(radius, erasure_n)
    u_nodal = _u_values(triple, mesh_e)
    E_ref = ms_energy(mesh_e, values=u_nodal)
    for q in range(n_competitors):
        ray = RAYS[int(rng.integers(3))]
        k = int(rng.integers(1, erasure_n // 2 + 1))
        E, vals, _ = erasure_energy(triple, mesh_e, ray, k)
        res = float(np.max(np.abs(vals[mesh_e.boundary] - u_nodal[mesh_e.boundary])))
        gap = E.total - E_ref.total
        rep.rows.append(CompetitorRow(cid, "JumpErasure", {"ray": ray, "length": k * mesh_e.h},
                                      E.dirichlet, E.jump_length, E.total, gap, res,
                                      classify_gap(gap, slack)))
        cid += 1

    if retry and rep.status == "fail":
        log.info("a competitor beats u at radius %g; retrying at %g", radius, radius / 2)
        half = minimality_experiment(triple, radius / 2, n_competitors, seed, mesh_n, erasure_n,
                                     slack_rel, retry=radius / 2 > 1e-4)
        rep.retry = {"radius": radius / 2, "status": half.status, "min_gap": half.min_gap,
                     "crossover_radius": radius / 2 if half.status != "fail"
                     else (half.retry or {}).get("crossover_radius")}
    return rep
