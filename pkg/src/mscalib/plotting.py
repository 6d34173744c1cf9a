"""Figures written next to the CSV/JSON outputs of the command line."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402
from matplotlib.patches import Polygon  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402
from scipy.spatial import ConvexHull  # noqa: E402

from .field import REGION_NAMES, CalibrationField  # noqa: E402
from .step3 import EX, EY, NU2, TAU2, _minkowski_vertices  # noqa: E402

REGION_COLOURS = ["#f2f2f2", "#1f77b4", "#2ca02c", "#d62728",
                  "#aec7e8", "#ffbb78", "#98df8a", "#ff9896"]


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return path


def region_section(field: CalibrationField, path, x: float | None = None, n: int = 241):
    """Regions in the (y, z) plane at fixed x, as in a vertical cut of U x R."""
    r = field.params.u_radius
    x = -0.5 * r if x is None else x
    half = math.sqrt(max(r * r - x * x, 0.0))
    y = np.linspace(-half, half, n)
    a = field.triple.constants
    e = field.params.epsilon
    z = np.linspace(a[0] - 2 * e, a[2] + 2 * e, 4 * n)
    pd = field.point_data(np.full_like(y, x), y)
    code = field.region_codes(pd, np.broadcast_to(z, (n, z.size)))
    fig, ax = plt.subplots(figsize=(5.0, 6.0))
    ax.pcolormesh(y, z, code.T, cmap=ListedColormap(REGION_COLOURS), vmin=-0.5, vmax=7.5,
                  shading="nearest", rasterized=True)
    handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in REGION_COLOURS]
    ax.legend(handles, REGION_NAMES, loc="upper center", bbox_to_anchor=(0.5, -0.1),
              fontsize=7, ncol=4, frameon=False)
    ax.xaxis.set_major_locator(MaxNLocator(5))
    ax.set_xlabel("y")
    ax.set_ylabel("z")
    ax.set_title(f"regions at x = {x:.3g}")
    return _save(fig, path)


def rho_along_ray(s, rho, path, label: str = ""):
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(s, rho, "o-", ms=3)
    ax.axhline(1.0, color="k", lw=0.6, ls=":")
    ax.set_xlabel("s")
    ax.set_ylabel(r"$\rho$")
    ax.set_title(f"full jump on {label}" if label else "full jump")
    return _save(fig, path)


def rho_slice(t1, t2, rho, path, point=None):
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    im = ax.pcolormesh(t1, t2, rho.T, shading="nearest", cmap="viridis", vmin=0.0, vmax=1.0)
    ax.contour(t1, t2, rho.T, levels=[0.9, 0.99], colors="w", linewidths=0.6)
    fig.colorbar(im, ax=ax, label=r"$\rho$")
    ax.set_xlabel("$t_1$")
    ax.set_ylabel("$t_2$")
    if point is not None:
        ax.set_title(f"p = ({point[0]:.3g}, {point[1]:.3g})")
    return _save(fig, path)


def divergence_fluxes(families, ratios, tol: float, path):
    fams = sorted(set(families))
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    for k, f in enumerate(fams):
        v = np.array([r for g, r in zip(families, ratios) if g == f])
        ax.semilogy(np.full(v.size, k) + np.linspace(-0.3, 0.3, v.size),
                    np.maximum(np.abs(v), 1e-18), ".", ms=3)
    ax.axhline(tol, color="r", lw=0.8)
    ax.set_xticks(range(len(fams)), fams, rotation=30, fontsize=7)
    ax.set_ylabel("|flux| / area")
    return _save(fig, path)


def energy_gaps(report, path):
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8.5, 3.4))
    kinds = sorted({r.kind for r in report.rows})
    for k, kind in enumerate(kinds):
        g = np.array([r.gap for r in report.rows if r.kind == kind])
        a1.plot(np.full(g.size, k), g, ".", alpha=0.6)
    a1.axhline(-report.slack, color="r", lw=0.8, ls="--")
    a1.axhline(0.0, color="k", lw=0.5)
    a1.set_yscale("symlog", linthresh=max(report.slack, 1e-12))
    a1.set_xticks(range(len(kinds)), kinds, fontsize=7)
    a1.set_ylabel("E(v) - E(u)")
    fit = report.exponent_data
    if fit:
        c = np.array(fit["amplitudes"])
        g = np.array(fit["gaps"])
        a2.loglog(c, np.abs(g), "o-")
        a2.set_xlabel("bump amplitude")
        a2.set_ylabel("gap")
        a2.set_title(f"slope {report.exponent:.3f}")
    return _save(fig, path)


def step3_sets(geom, path):
    """Unit circle, the cap C, the translated R_1 and the polygon of the vertex test."""
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    th = np.linspace(0, 2 * math.pi, 400)
    ax.plot(np.cos(th), np.sin(th), "k", lw=0.6)
    arc = geom.C_boundary(200)
    ax.add_patch(Polygon(arc, closed=True, fc="#aec7e8", ec="#1f77b4", lw=0.6, label="C"))
    R1 = NU2 - geom.delta ** 2 / geom.epsilon * EX + geom.R1()
    ax.add_patch(Polygon(R1, closed=True, fc="#ffbb78", ec="#ff7f0e", lw=0.8, label="shifted R1"))
    V3 = EY - geom.delta ** 2 / geom.epsilon * TAU2 + _minkowski_vertices(geom.R2(), geom.F())
    hull = V3[ConvexHull(V3).vertices] if np.ptp(V3[:, 0]) > 0 and np.ptp(V3[:, 1]) > 0 else V3
    ax.add_patch(Polygon(hull, closed=True, fc="none", ec="#2ca02c", lw=0.8, label="R2 + F shifted"))
    ax.set_aspect("equal")
    lim = max(1.1, float(np.max(np.abs(V3))) * 1.05)
    ax.set_xlim(-lim, lim)
    ax.set_ylim(-lim, lim)
    ax.legend(fontsize=7, loc="lower left")
    ax.set_title(f"eps = {geom.epsilon:g}, delta = {geom.delta:g}")
    return _save(fig, path)
