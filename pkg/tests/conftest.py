import pytest

from mscalib import CalibrationField, SectorHarmonicTriple, select_params


def make_triples():
    return {
        "constants": SectorHarmonicTriple.constants_only(),
        "symmetric": SectorHarmonicTriple.from_modes("symmetric", [(1, 0.5)], (0, 1, 2)),
        "antisymmetric": SectorHarmonicTriple.from_modes("antisymmetric", [(1, 0.5)], (0, 1, 2)),
    }


TRIPLES = make_triples()


@pytest.fixture(scope="session")
def fields():
    return {k: CalibrationField(t, select_params(t)) for k, t in TRIPLES.items()}


@pytest.fixture(scope="session")
def const_field(fields):
    return fields["constants"]


@pytest.fixture(scope="session")
def sym_field(fields):
    return fields["symmetric"]


@pytest.fixture(scope="session")
def anti_field(fields):
    return fields["antisymmetric"]
