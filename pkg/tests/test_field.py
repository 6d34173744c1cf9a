import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mscalib import OutOfDomain
from mscalib.conditions import jump_quadrature, z_range
from mscalib.field import G0, H1, K1, REGION_NAMES, VERTICAL, dump_field_csv
from mscalib.harmonic import GEOMETRY

unit = st.floats(0.0, 1.0)


def _point(field, a, b):
    r = 0.98 * field.params.u_radius * math.sqrt(a)
    th = 2 * math.pi * b
    return r * math.cos(th), r * math.sin(th)


def _ts(field, c, d):
    lo, hi = z_range(field)
    return lo + (hi - lo) * c, lo + (hi - lo) * d


@pytest.mark.parametrize("name", ["constants", "symmetric", "antisymmetric"])
@settings(max_examples=15, deadline=None)
@given(a=unit, b=unit, c=unit, d=unit)
def test_band_integral_matches_adaptive_quadrature(fields, name, a, b, c, d):
    field = fields[name]
    p = _point(field, a, b)
    t1, t2 = _ts(field, c, d)
    exact = field.jump_integral(p, t1, t2)
    ref = jump_quadrature(field, p, t1, t2)
    assert np.allclose(exact, ref, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(a=unit, b=unit, c=unit, d=unit, e=unit)
def test_jump_integral_additive_and_oriented(sym_field, a, b, c, d, e):
    p = _point(sym_field, a, b)
    t1, t2 = _ts(sym_field, c, d)
    t3, _ = _ts(sym_field, e, 0)
    I = sym_field.jump_integral
    assert np.allclose(I(p, t1, t3), I(p, t1, t2) + I(p, t2, t3), atol=1e-13)
    assert np.allclose(I(p, t1, t2), -I(p, t2, t1), atol=1e-15)
    assert np.all(I(p, t1, t1) == 0.0)


def test_region_stack_order(const_field):
    f = const_field
    pd = f.point_data(np.array([0.001]), np.array([0.0005]))
    b = f.bands(pd)
    seq = [b[("G", 0)], b[("K", 1)], b[("G", 1)], b[("K", 2)], b[("G", 2)]]
    for (lo1, hi1), (lo2, hi2) in zip(seq, seq[1:]):
        assert hi1[0] < lo2[0]
    for i in (1, 2):
        hlo, hhi = b[("H", i)]
        klo, khi = b[("K", i)]
        assert klo[0] < hlo[0] < hhi[0] < khi[0]


def test_boundary_belongs_to_lower_region(const_field):
    f = const_field
    p = (0.001, -0.0007)
    pd = f.point_data(p[0], p[1])
    b = f.bands(pd)
    top = float(b[("G", 0)][1][0])
    assert f.region_of(p, top) == "G_0"
    assert f.region_of(p, np.nextafter(top, 10)) == "Vertical"
    hlo = float(b[("H", 1)][0][0])
    assert f.region_of(p, hlo) == "K_1\\H_1"
    assert f.region_of(p, np.nextafter(hlo, 10)) == "H_1"


def test_field_on_graph_is_gradient(sym_field):
    """On z = u_j the field equals (2 grad u, |grad u|^2)."""
    t = sym_field.triple
    for j in range(3):
        th = GEOMETRY.bisector[j] + 0.2
        p = (0.003 * math.cos(th), 0.003 * math.sin(th))
        uj = float(t.value(j, *p))
        g = t.gradient(j, *p)
        xy, z = sym_field.eval_field(p, uj)
        assert np.allclose(xy, 2 * g, atol=1e-15)
        assert z == pytest.approx(g @ g, abs=1e-15)


def test_region_formulas(const_field):
    f = const_field
    prm = f.params
    p = (0.002, 0.001)
    pd = f.point_data(p[0], p[1])
    b = f.bands(pd)
    zk = 0.5 * (float(b[("K", 1)][0][0]) + float(b[("H", 1)][0][0]))
    xy, z = f.eval_field(p, zk)
    sigma = float(pd.sigma[1][0])
    assert np.allclose(xy, sigma * f.ing.phi(1, *p) / prm.lam)
    assert z == prm.mu
    xy, z = f.eval_field(p, prm.l1 + prm.lam)
    assert np.allclose(xy, 0.0)  # grad u = 0 for constants
    assert z == prm.mu
    # vertical region between G_0 and K_1
    zv = 0.5 * (float(b[("G", 0)][1][0]) + float(b[("K", 1)][0][0]))
    xy, z = f.eval_field(p, zv)
    assert np.all(xy == 0.0)
    assert z == pytest.approx(f.omega_vertical(p, zv))
    assert int(f.region_codes(pd, np.array([[zv]]))[0, 0]) == VERTICAL


def test_region_codes_cover_all_names(const_field):
    f = const_field
    pd = f.point_data(np.array([0.001]), np.array([0.001]))
    z = np.linspace(*z_range(f), 4001)[None, :]
    codes = set(np.unique(f.region_codes(pd, z)).tolist())
    assert {VERTICAL, G0, G0 + 1, G0 + 2, K1, H1} <= codes
    assert len(REGION_NAMES) == 8


def test_antisymmetric_slit_points_are_vertical(anti_field):
    f = anti_field
    d = GEOMETRY.ray_direction("S_12")  # slit of u_0
    p = 0.5 * f.params.u_radius * d
    u0 = float(f.triple.value(0, *p, allow_cut=True))
    assert f.region_of(p, u0) != "G_0"
    q = 0.5 * f.params.u_radius * GEOMETRY.ray_direction("S_01")
    assert f.region_of(q, float(f.triple.value(0, *q))) == "G_0"


def test_outside_u_rejected(const_field):
    with pytest.raises(OutOfDomain):
        const_field.eval_field((0.1, 0.0), 0.0)


def test_dump_field_csv(tmp_path, const_field):
    path = tmp_path / "field.csv"
    dump_field_csv(const_field, path, n_xy=3, n_z=5)
    lines = path.read_text().splitlines()
    assert len(lines) > 5
    assert "region" in lines[0]
