import math

import numpy as np
import pytest

from mscalib import characteristic_oracles, rho_oracles
from mscalib.harmonic import SQRT3
from mscalib.oracles import RhoFunction, q_0, q_i


@pytest.fixture(scope="module")
def oracles(fields):
    return {k: rho_oracles(fields[k]) for k in ("constants", "symmetric", "antisymmetric")}


@pytest.mark.parametrize("name", ["constants", "symmetric"])
def test_all_acceptance_oracles_pass(oracles, name):
    bad = {k: (o.computed, o.expected) for k, o in oracles[name].items()
           if o.in_acceptance and not o.passed}
    assert not bad


@pytest.mark.parametrize("name", ["constants", "symmetric"])
def test_closed_forms_to_high_accuracy(oracles, name):
    o = oracles[name]
    e = 0.05
    for i in (1, 2):
        assert o[f"ii_d2_nu{i}"].computed == pytest.approx(0.75 - SQRT3 / (2 * e), rel=1e-5)
        assert o[f"iii_d2_t1_q{i}"].computed == pytest.approx(-SQRT3 / e, rel=1e-5)
        assert o[f"iv_norm_P{i}"].computed == pytest.approx(1.5 * SQRT3, rel=1e-5)
        for tag in ("0", "r/4", "r/2"):
            assert o[f"i_grad_N{i}_s={tag}"].computed < 1e-5
    assert o["v_dy_Ix_q0"].computed == pytest.approx(2 * SQRT3, rel=1e-5)
    assert o["vi_norm_N1N2"].computed == pytest.approx(0.75 * SQRT3, rel=1e-5)


def test_printed_decimal_vs_formula():
    # the identity gives -16.5705 at eps = 0.05
    assert 0.75 - SQRT3 / 0.1 == pytest.approx(-16.5705, abs=1e-4)


def test_hessian_signs(oracles):
    for name in ("constants", "symmetric"):
        o = oracles[name]
        for i in (1, 2):
            assert o[f"viii_minor1_q{i}"].computed < 0
            assert o[f"viii_det2_q{i}"].computed > 0
            assert o[f"viii_det3_q{i}"].computed < 0


def test_antisymmetric_origin_entries_informational(oracles):
    o = oracles["antisymmetric"]
    for k in ("i_grad_N1_s=0", "iv_norm_P1", "v_dy_Ix_q0", "vi_norm_N1N2"):
        assert not o[k].in_acceptance
        assert "slit" in o[k].note
    # away from the vertex the N-side gradient still vanishes
    assert o["i_grad_N1_s=r/4"].in_acceptance and o["i_grad_N1_s=r/4"].passed


def test_rho_function_is_norm_of_band_integral(sym_field):
    f = sym_field
    rho = RhoFunction(f, None)
    X = np.array([[0.001, -0.002, 0.3, 1.7], [0.0, 0.0, 0.1, 1.0]])
    pd = f.point_data(X[:, 0], X[:, 1])
    ref = np.linalg.norm(f.band_integral(pd, X[:, 2], X[:, 3]), axis=-1)
    assert np.allclose(rho(X), ref, rtol=0, atol=1e-15)


def test_critical_points(const_field):
    f = const_field
    X = q_i(f, 1, 0.0)
    assert np.allclose(X, [0.0, 0.0, 0.0, 1.0])
    X = q_0(f, 0.001)
    assert np.allclose(X, [0.001, 0.0, 0.0, 2.0])
    # rho is exactly 1 at the critical points (full jump)
    assert RhoFunction(f, None)(np.array([q_i(f, 2, 0.002)]))[0] == pytest.approx(1.0, abs=1e-12)


def test_characteristic_oracles(sym_field):
    o = characteristic_oracles(sym_field)
    assert all(v.passed for v in o.values()), {k: v.computed for k, v in o.items() if not v.passed}
    assert math.isclose(o["star_d2_beta_minus_alpha_1"].expected, -2 * SQRT3 / 0.05)
