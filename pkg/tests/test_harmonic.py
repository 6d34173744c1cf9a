import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mscalib import BranchCut, OutOfDomain, SectorHarmonicTriple, check_hypotheses
from mscalib.harmonic import GEOMETRY, RAYS, classify_point, extend_domain, sector_mask

from conftest import TRIPLES

SYM = TRIPLES["symmetric"]
ANTI = TRIPLES["antisymmetric"]
TWO_MODE = SectorHarmonicTriple.from_modes("symmetric", [(1, 0.4), (2, -0.3)], (0, 1, 2))
ANTI_TWO = SectorHarmonicTriple.from_modes("antisymmetric", [(1, 0.3), (2, 0.2)], (0, 1, 2))


def polar_value(triple, i, r, th):
    """Independent real-variable form of the sector eigenmodes."""
    phi = (th - GEOMETRY.bisector[i] + math.pi) % (2 * math.pi) - math.pi
    out = triple.constants[i]
    for c, m in zip(triple.coeffs[i], triple.exponents):
        if triple.antisymmetric:
            out += triple.signs[i] * c * r ** m * math.sin(m * phi)
        else:
            out += c * r ** m * math.cos(m * phi)
    return out


angles = st.floats(-math.pi / 3 + 1e-3, math.pi / 3 - 1e-3)
radii = st.floats(1e-3, 0.9)


@pytest.mark.parametrize("triple", [SYM, TWO_MODE, ANTI, ANTI_TWO])
@settings(max_examples=60, deadline=None)
@given(i=st.integers(0, 2), r=radii, a=angles)
def test_value_matches_polar_form(triple, i, r, a):
    th = GEOMETRY.bisector[i] + a
    x, y = r * math.cos(th), r * math.sin(th)
    assert float(triple.value(i, x, y)) == pytest.approx(polar_value(triple, i, r, th), abs=1e-13)


@pytest.mark.parametrize("triple", [TWO_MODE, ANTI_TWO])
@settings(max_examples=40, deadline=None)
@given(i=st.integers(0, 2), r=st.floats(0.05, 0.8), a=angles)
def test_gradient_and_hessian_match_differences(triple, i, r, a):
    th = GEOMETRY.bisector[i] + a
    x, y = r * math.cos(th), r * math.sin(th)
    h = 1e-5
    _, g, H = triple.evaluate(i, x, y)
    fd = np.array([
        (triple.value(i, x + h, y) - triple.value(i, x - h, y)) / (2 * h),
        (triple.value(i, x, y + h) - triple.value(i, x, y - h)) / (2 * h)])
    assert np.allclose(g, fd, atol=1e-8)
    fdH = np.stack([
        (triple.gradient(i, x + h, y) - triple.gradient(i, x - h, y)) / (2 * h),
        (triple.gradient(i, x, y + h) - triple.gradient(i, x, y - h)) / (2 * h)])
    assert np.allclose(H, fdH, atol=1e-6)
    assert abs(np.trace(H)) < 1e-10


@pytest.mark.parametrize("triple", [TRIPLES["constants"], SYM, TWO_MODE, ANTI, ANTI_TWO])
def test_hypotheses_hold(triple):
    rep = check_hypotheses(triple)
    assert rep.passed, rep.failures()
    assert rep.laplacian_residual < 1e-10


def test_neumann_on_rays_by_hand():
    s = np.linspace(0.01, 0.9, 50)
    for lab in RAYS:
        d, n = GEOMETRY.ray_direction(lab), GEOMETRY.ray_normal(lab)
        for i in GEOMETRY.ray_sectors(lab):
            g = SYM.gradient(i, s * d[0], s * d[1])
            assert np.max(np.abs(g @ n)) < 1e-12


def test_mismatched_sector_coefficients_fail():
    bad = SectorHarmonicTriple("symmetric", (1,), [[0.5], [0.5], [0.7]], (0, 1, 2))
    rep = check_hypotheses(bad)
    assert not rep.passed
    assert rep.gradient_jump_residual > 1e-3
    assert any("gradient modulus" in f for f in rep.failures())


def test_ordering_failure_reported():
    rep = check_hypotheses(SectorHarmonicTriple.constants_only((0.0, 2.0, 1.0)))
    assert not rep.ordering_ok and not rep.passed


def test_branch_cut_and_domain_errors():
    # S_12 is the slit of u_0 in the antisymmetric case
    d = GEOMETRY.ray_direction("S_12")
    with pytest.raises(BranchCut):
        ANTI.value(0, 0.3 * d[0], 0.3 * d[1])
    ANTI.value(1, 0.3 * d[0], 0.3 * d[1])
    SYM.value(0, 0.3 * d[0], 0.3 * d[1])
    with pytest.raises(OutOfDomain):
        SYM.value(0, 1.0, 0.0)
    assert extend_domain(ANTI, 0).slit == "S_12"
    assert extend_domain(SYM, 0).kind == "disc"


def test_classify_point():
    assert classify_point((0.0, 0.0)) == "Origin"
    assert classify_point((0.5, 0.0)) == "S_02"
    assert classify_point((-0.5, 0.0)) == "A_1"
    assert classify_point((0.3, 0.3)) == "A_2"
    assert classify_point((0.3, -0.3)) == "A_0"
    d = GEOMETRY.ray_direction("S_12")
    assert classify_point(0.4 * d) in ("S_12", "A_1", "A_2")
    with pytest.raises(OutOfDomain):
        classify_point((0.8, 0.8))


@settings(max_examples=200, deadline=None)
@given(r=st.floats(1e-3, 0.99), th=st.floats(0, 2 * math.pi))
def test_sectors_partition(r, th):
    x, y = r * math.cos(th), r * math.sin(th)
    lab = classify_point((x, y))
    masks = [bool(sector_mask(i, x, y)) for i in range(3)]
    if lab.startswith("A_"):
        assert masks == [k == int(lab[-1]) for k in range(3)]
    else:
        assert not any(masks)


def test_invalid_modes():
    with pytest.raises(ValueError):
        SectorHarmonicTriple.from_modes("symmetric", [(0, 1.0)], (0, 1, 2))
    with pytest.raises(ValueError):
        SectorHarmonicTriple.from_modes("symmetric", [], (0, 1))
