from dataclasses import replace

import numpy as np
import pytest

from mscalib import CalibrationField, check_d_global
from mscalib.dscan import classify_jump, rho_lipschitz
from mscalib.harmonic import GEOMETRY


def test_small_scan_passes(sym_field):
    res = check_d_global(sym_field, grid=16, refine_iters=2)
    d = res.details
    assert res.passed
    assert d["max_rho"] <= 1 + 1e-9
    assert d["argmax_on_jump"]
    assert d["off_jump_max"] <= 1 + 1e-9
    assert d["jump_max"] == pytest.approx(1.0, abs=1e-12)


def test_scan_deterministic_across_threads(const_field):
    a = check_d_global(const_field, grid=16, refine_iters=1, threads=1)
    b = check_d_global(const_field, grid=16, refine_iters=1, threads=2)
    assert a.to_dict() == b.to_dict()


def test_grid_too_coarse(const_field):
    with pytest.raises(ValueError):
        check_d_global(const_field, grid=8)


@pytest.mark.parametrize("fpp", [-10.0, 0.0])
def test_violating_condf_is_detected(const_field, fpp):
    """With f''(0) above the admissible bound rho exceeds 1 near q_0."""
    prm = replace(const_field.params, fpp=fpp)
    res = check_d_global(CalibrationField(const_field.triple, prm), grid=16, refine_iters=3)
    assert not res.passed
    assert res.details["max_rho"] > 1 + 1e-6
    assert not res.details["argmax_on_jump"]


def test_classify_jump(sym_field):
    f = sym_field
    d = GEOMETRY.ray_direction("S_12")
    p = 0.3 * f.params.u_radius * d
    pd = f.point_data(np.array([p[0], 0.001]), np.array([p[1], 0.001]))
    u1, u2 = pd.u[1], pd.u[2]
    t1 = np.stack([u1, u2, u1 + 1e-6], axis=-1)
    t2 = np.stack([u2, u1, u2], axis=-1)
    got = classify_jump(f, pd, t1, t2)
    assert got[0].tolist() == [True, True, False]
    assert not got[1].any()


def test_rho_is_lipschitz(const_field):
    # rho is Lipschitz with a modest constant, so a fine grid cannot miss a large excursion
    L = rho_lipschitz(const_field, n=500)
    assert np.isfinite(L) and L < 1e4
