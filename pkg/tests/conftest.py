import pytest

from cardylab.hexlattice import MarkedDomain, build_domain


@pytest.fixture(scope="session")
def hexagon():
    return build_domain([(0, 0)])


@pytest.fixture(scope="session")
def tri3():
    # three hexagons around one vertex
    return build_domain([(0, 0), (1, 0), (0, 1)])


@pytest.fixture(scope="session")
def hex_quad(hexagon):
    return MarkedDomain(hexagon, (0, 1, 3, 5))


def four_marks(d, offset=0):
    """Four boundary mid-edges spread around the cycle."""
    b = d.boundary_mids
    n = len(b)
    return tuple(int(b[(offset + i * n // 4) % n]) for i in range(4))
