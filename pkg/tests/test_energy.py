import math
from dataclasses import replace

import numpy as np
import pytest

from mscalib import minimality_experiment, ms_energy, sector_mesh
from mscalib.energy import (Bump, NonConformingMesh, bump_gap, classify_gap, erasure_energy,
                            exact_dirichlet)

from conftest import TRIPLES

R = 0.005


def _grad(t):
    return lambda i, x, y: t.gradient(i, x, y, allow_cut=True, check=False)


def test_mesh_structure():
    m = sector_mesh(R, 8)
    assert np.sum(m.areas()) == pytest.approx(math.pi * R * R, rel=5e-3)
    assert np.all(m.areas() > 0)
    assert np.allclose(np.hypot(*m.nodes[m.boundary].T), R)
    assert len(m.jump_segments) == 3


def test_constants_energy_is_jump_length():
    E = ms_energy(sector_mesh(R, 8), grad=_grad(TRIPLES["constants"]))
    assert E.dirichlet == 0.0
    assert E.total == pytest.approx(3 * R, rel=1e-14)


def test_dirichlet_converges_to_closed_form():
    t = TRIPLES["symmetric"]
    ex = exact_dirichlet(t, R)
    errs = [abs(ms_energy(sector_mesh(R, n), grad=_grad(t)).dirichlet - ex) / ex
            for n in (8, 16, 32)]
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(rates > 1.8)
    assert errs[-1] < 5e-3


def test_bump_gap_closed_form():
    # for constant u the gap is the Dirichlet energy of the bump: 6 pi c^2 / 5
    c = 0.01
    b = Bump(1, np.array([-0.5 * R, 0.0]), 0.3 * R, c)
    gap = bump_gap(TRIPLES["constants"], sector_mesh(R, 48), b)
    assert gap == pytest.approx(1.2 * math.pi * c * c, rel=2e-2)


def test_erasure_costs_energy():
    mesh = sector_mesh(R, 12)
    t = TRIPLES["constants"]
    E, vals, _ = erasure_energy(t, mesh, "S_02", 3)
    assert E.jump_length == pytest.approx(3 * R - 3 * mesh.h)
    assert E.total > 3 * R
    with pytest.raises(ValueError):
        erasure_energy(t, mesh, "S_02", 7)


def test_non_conforming_mesh_rejected():
    m = sector_mesh(R, 6)
    bad = replace(m, region=np.roll(m.region, 5))
    with pytest.raises(NonConformingMesh):
        ms_energy(bad, grad=_grad(TRIPLES["constants"]))


def test_classify_gap():
    assert classify_gap(0.1, 1e-3) == "ok"
    assert classify_gap(-1e-4, 1e-3) == "inconclusive-discretization"
    assert classify_gap(-1e-2, 1e-3) == "beats-u"


@pytest.mark.parametrize("name", ["constants", "symmetric", "antisymmetric"])
def test_small_experiment(name):
    rep = minimality_experiment(TRIPLES[name], R, n_competitors=8, mesh_n=16, erasure_n=12)
    assert rep.passed
    assert 1.8 <= rep.exponent <= 2.2
    d = rep.to_dict()
    if name == "antisymmetric":
        assert "JunctionShift" in d["skipped"]
    else:
        shift = [r for r in rep.rows if r.kind == "JunctionShift"]
        assert shift[0].params["xi"] == [0.0, 0.0] and shift[0].gap == 0.0


def test_experiment_csv_deterministic(tmp_path):
    a = minimality_experiment(TRIPLES["symmetric"], R, 5, seed=3, mesh_n=12, erasure_n=8)
    b = minimality_experiment(TRIPLES["symmetric"], R, 5, seed=3, mesh_n=12, erasure_n=8)
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
