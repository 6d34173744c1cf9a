from collections import Counter

import numpy as np
import pytest

from mscalib import CalibrationField, check_divergence
from mscalib.divergence import Box, box_flux, make_boxes
from mscalib.field import G0, H1, K1, K2, VERTICAL


def _fd_divergence(field, x, y, z, h=1e-7, hz=1e-7):
    def comp(px, py, pz):
        pd = field.point_data(np.array([px]), np.array([py]))
        xy, zz, code = field.evaluate(pd, np.array([[pz]]))
        return xy[0, 0], zz[0, 0], int(code[0, 0])

    c0 = comp(x, y, z)[2]
    ex = comp(x + h, y, z), comp(x - h, y, z)
    ey = comp(x, y + h, z), comp(x, y - h, z)
    ez = comp(x, y, z + hz), comp(x, y, z - hz)
    codes = {c0} | {c[2] for pair in (ex, ey, ez) for c in pair}
    if len(codes) > 1:
        return None, c0
    div = ((ex[0][0][0] - ex[1][0][0]) / (2 * h) + (ey[0][0][1] - ey[1][0][1]) / (2 * h)
           + (ez[0][1] - ez[1][1]) / (2 * hz))
    return div, c0


@pytest.mark.parametrize("name", ["constants", "symmetric"])
def test_pointwise_divergence_by_differences(fields, name):
    """Finite-difference divergence inside each region, independent of the flux code."""
    f = fields[name]
    r = f.params.u_radius
    rng = np.random.default_rng(4)
    seen = Counter()
    for _ in range(400):
        rad, th = 0.9 * r * np.sqrt(rng.random()), 2 * np.pi * rng.random()
        x, y = rad * np.cos(th), rad * np.sin(th)
        z = rng.uniform(-0.1, 2.1)
        div, code = _fd_divergence(f, x, y, z)
        if div is None:
            continue
        seen[code] += 1
        assert abs(div) < 1e-6, (code, x, y, z, div)
    assert seen[VERTICAL] and seen[G0] and (seen[K1] or seen[K2]) and seen[H1]


def test_box_families(anti_field):
    boxes = make_boxes(anti_field, 500, 50, seed=0)
    fam = Counter(b.family for b in boxes)
    assert len(boxes) == 500
    for k in ("G_lower", "G_upper", "K_lower", "K_upper", "H_lower", "H_upper", "h_zero", "slit"):
        assert fam[k] == 50
    r = anti_field.params.u_radius
    for b in boxes:
        assert b.x0 < b.x1 and b.y0 < b.y1 and b.z0 < b.z1
        assert np.hypot(max(abs(b.x0), abs(b.x1)), max(abs(b.y0), abs(b.y1))) < r


def test_single_region_box_flux_zero(const_field):
    # well inside the vertical region between G_0 and K_1: (0, omega) with omega = eps^2/v^2
    r = const_field.params.u_radius
    box = Box(-0.3 * r, 0.2 * r, -0.1 * r, 0.4 * r, 0.1, 0.2, "manual")
    flux = box_flux(const_field, [box])
    assert abs(flux[0]) / box.area < 1e-12


@pytest.mark.parametrize("name", ["constants", "symmetric", "antisymmetric"])
def test_divergence_passes(fields, name):
    res = check_divergence(fields[name], n_boxes=160, per_family=20, seed=3)
    assert res.passed, res.witness
    assert len(res.table) == 160


def test_wrong_alpha_detected(const_field):
    """A K band whose lower surface ignores the transport equation leaks flux."""
    f = CalibrationField(const_field.triple, const_field.params)
    orig = f.chars.evaluate

    def scaled(i, x, y, branch=None):
        d = orig(i, x, y, branch)
        d["alpha"] = 3.0 * d["alpha"]
        return d

    f.chars.evaluate = scaled
    boxes = [b for b in make_boxes(f, 0, 20, seed=1) if b.family == "K_lower"]
    res = check_divergence(f, boxes=boxes)
    assert not res.passed
