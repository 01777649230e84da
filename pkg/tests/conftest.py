import pytest

from corpus import academic4


@pytest.fixture(scope="session")
def acad():
    return academic4()


@pytest.fixture(scope="session")
def acad_chart(acad):
    from dtflat.systems import build_adapted_chart
    return build_adapted_chart(acad)


@pytest.fixture(scope="session")
def acad_verdict(acad, acad_chart):
    from dtflat.flatness import analyze
    return analyze(acad, acad_chart)
