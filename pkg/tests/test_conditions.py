from dataclasses import replace

import numpy as np
import pytest

from mscalib import CalibrationField, check_b, check_c, check_e
from mscalib.conditions import jump_quadrature
from mscalib.harmonic import GEOMETRY, RAYS


@pytest.mark.parametrize("name", ["constants", "symmetric", "antisymmetric"])
def test_b_and_c_hold(fields, name):
    f = fields[name]
    b = check_b(f, 4000, seed=1)
    c = check_c(f, 4000, seed=1)
    assert b.passed and b.margin >= -1e-12
    assert c.passed and c.details["max_residual"] <= 1e-12
    # G bands are tight: 4 phi_z = |phi_xy|^2 exactly
    assert b.details["min_margin_by_region"]["G_1"] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("name", ["constants", "symmetric", "antisymmetric"])
def test_e_unit_normal(fields, name):
    res = check_e(fields[name], 32, tol=1e-6)
    assert res.passed
    assert res.samples == 96
    assert max(res.details["max_residual_by_ray"].values()) < 1e-9


def test_e_against_adaptive_quadrature(sym_field):
    f = sym_field
    t = f.triple
    for lab in RAYS:
        d, n = GEOMETRY.ray_direction(lab), GEOMETRY.ray_normal(lab)
        i, j = GEOMETRY.ray_sectors(lab)
        p = 0.37 * f.params.u_radius * d
        I = jump_quadrature(f, p, float(t.value(i, *p)), float(t.value(j, *p)))
        assert np.allclose(I, n, atol=1e-9)


def test_b_margin_in_k_band_by_hand(const_field):
    f = const_field
    prm = f.params
    x, y = np.array([0.002]), np.array([-0.001])
    pd = f.point_data(x, y)
    sp = pd.sigma[2][0] * f.ing.phi(2, x[0], y[0]) / prm.lam
    expected = 4 * prm.mu - sp @ sp
    zk = float(f.bands(pd)[("K", 2)][0][0]) + 1e-4
    pxy, pz, _ = f.evaluate(pd, np.array([[zk]]))
    assert 4 * pz[0, 0] - pxy[0, 0] @ pxy[0, 0] == pytest.approx(expected, rel=1e-12)
    assert expected > 0


def test_small_mu_breaks_b(const_field):
    prm = replace(const_field.params, mu=0.2 / (4 * const_field.params.lam ** 2))
    bad = CalibrationField(const_field.triple, prm)
    res = check_b(bad, 2000, seed=0)
    assert not res.passed
    assert res.witness["region"].startswith("K_")


def test_overlapping_bands_break_e(const_field):
    # l_1 = 0.8 pushes K_1 into G_1, so the jump over the band stack is no longer nu
    prm = replace(const_field.params, l1=const_field.params.l1 + 0.3)
    res = check_e(CalibrationField(const_field.triple, prm), 8, tol=1e-6)
    assert not res.passed


def test_seeded_results_reproducible(sym_field):
    a = check_b(sym_field, 1000, seed=7)
    b = check_b(sym_field, 1000, seed=7)
    assert a.margin == b.margin and a.witness == b.witness
