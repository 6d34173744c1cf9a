import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mscalib import InfeasibleParams, select_params
from mscalib.harmonic import GEOMETRY, SQRT3
from mscalib.params import condf_bound, validate_params

from conftest import TRIPLES


def _points(r, n, seed):
    rng = np.random.default_rng(seed)
    rad = 0.95 * r * np.sqrt(rng.random(n))
    ang = 2 * math.pi * rng.random(n)
    return rad * np.cos(ang), rad * np.sin(ang)


@pytest.mark.parametrize("name", list(TRIPLES))
def test_closed_form_matches_field_line_integration(name):
    triple = TRIPLES[name]
    p = select_params(triple)
    ch = p.characteristics(triple)
    xs, ys = _points(p.u_radius, 5, seed=3)
    for x, y in zip(xs, ys):
        for i in (1, 2):
            assert float(ch.h(i, x, y)) == pytest.approx(ch.trace_h(i, (x, y)), abs=1e-12)
            a, b = ch.alpha_beta(i, x, y)
            at, bt = ch.transport_alpha_beta(i, (x, y))
            assert float(a) == pytest.approx(at, abs=1e-12)
            assert float(b) == pytest.approx(bt, abs=1e-12)


def test_invariant_constant_along_phi(const_field):
    ch = const_field.chars
    ing = const_field.ing
    xs, ys = _points(const_field.params.u_radius, 50, seed=1)
    d = 1e-7
    for i in (1, 2):
        ph = ing.phi(i, xs, ys)
        fwd = ch.invariant(i, xs + d * ph[:, 0], ys + d * ph[:, 1])
        bwd = ch.invariant(i, xs - d * ph[:, 0], ys - d * ph[:, 1])
        assert np.max(np.abs(fwd - bwd) / (2 * d)) < 1e-8


@settings(max_examples=50, deadline=None)
@given(t=st.floats(-0.01, 0.01), i=st.sampled_from([1, 2]))
def test_antiderivatives(t, i):
    ing = select_params(TRIPLES["constants"]).ingredients()
    h = 1e-6
    assert (ing.G(t + h) - ing.G(t - h)) / (2 * h) == pytest.approx(float(ing.g(t)), abs=1e-7)
    sign = 1.0 if i == 1 else -1.0
    dF = (ing.F(i, t + h) - ing.F(i, t - h)) / (2 * h)
    assert dF == pytest.approx(sign * float(ing.f(t)), abs=1e-9)


def test_g_and_phi_at_origin():
    ing = select_params(TRIPLES["constants"]).ingredients()
    e = ing.epsilon
    assert float(ing.g(0.0)) == pytest.approx(1 - SQRT3 * e)
    for i in (1, 2):
        assert np.allclose(ing.phi(i, 0.0, 0.0), float(ing.g(0.0)) * GEOMETRY.nu[i])


def test_sigma_is_continuous_across_h_zero(const_field):
    ch = const_field.chars
    h = np.array([-1e-9, 0.0, 1e-9])
    s = ch.sigma_from_h(h)
    assert np.allclose(s, 1.0, atol=1e-7)


def test_alpha_beta_vanish_on_data(const_field):
    ch = const_field.chars
    r = const_field.params.u_radius
    s = np.linspace(0.1, 0.9, 9) * r
    for i in (1, 2):
        tau = GEOMETRY.tau[i]
        a, b = ch.alpha_beta(i, s * tau[0], s * tau[1], branch="N")
        assert np.max(np.abs(a)) < 1e-15 and np.max(np.abs(b)) < 1e-15
        a, b = ch.alpha_beta(i, s, 0.0 * s, branch="P")
        assert np.max(np.abs(a)) < 1e-15 and np.max(np.abs(b)) < 1e-15


# ---------------------------------------------------------------- params

@pytest.mark.parametrize("name", list(TRIPLES))
def test_selected_params_are_admissible(name):
    triple = TRIPLES[name]
    p = select_params(triple)
    assert validate_params(triple, p) == []
    assert p.mu > 1 / (4 * p.lam ** 2)
    assert p.fpp < condf_bound(triple, p.epsilon)
    a = triple.constants
    assert p.l1 == pytest.approx(0.5 * (a[0] + a[1]))
    assert p.u_radius <= 0.02


def test_condf_bound_constants():
    # no Hessian term for constants
    assert condf_bound(TRIPLES["constants"], 0.05) == pytest.approx(-2 * SQRT3 - 40.0)


def test_epsilon_too_large_rejected():
    with pytest.raises(InfeasibleParams) as exc:
        select_params(TRIPLES["constants"], {"epsilon": 0.6})
    assert exc.value.violations


def test_overrides_respected():
    p = select_params(TRIPLES["constants"], {"epsilon": 0.04, "lambda": 0.08, "u_radius": 0.004})
    assert (p.epsilon, p.lam, p.u_radius) == (0.04, 0.08, 0.004)


def test_bad_fpp_reported():
    with pytest.raises(InfeasibleParams):
        select_params(TRIPLES["constants"], {"fpp": 0.0})
