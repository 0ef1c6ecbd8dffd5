from fractions import Fraction

from hypothesis import given, strategies as st

from cardylab.eisenstein import TAU, TAU_COMPLEX, Eisenstein

fr = st.fractions(max_denominator=64).filter(lambda x: abs(x) < 1000)
eis = st.builds(Eisenstein, fr, fr)


def test_tau_relations():
    assert TAU * TAU * TAU == Eisenstein(1)
    assert TAU * TAU + TAU + 1 == Eisenstein(0)
    assert Eisenstein.tau_power(-1) == TAU * TAU
    assert Eisenstein(3, 5) * TAU == Eisenstein(-5, 3 - 5)


@given(eis, eis, eis)
def test_ring_laws(x, y, z):
    assert x + y == y + x and x * y == y * x
    assert (x * y) * z == x * (y * z)
    assert x * (y + z) == x * y + x * z
    assert x - x == Eisenstein(0)


@given(eis)
def test_tau_multiplication_rule(x):
    assert x * TAU == Eisenstein(-x.b, x.a - x.b)


@given(eis, eis)
def test_complex_embedding(x, y):
    for got, want in ((x * y, complex(x) * complex(y)), (x + y, complex(x) + complex(y))):
        assert abs(complex(got) - want) <= 1e-9 * max(1.0, abs(want))
    assert abs(complex(x.conjugate()) - complex(x).conjugate()) <= 1e-9 * max(1.0, abs(complex(x)))
    assert abs(float(x.norm()) - abs(complex(x)) ** 2) <= 1e-6 * max(1.0, float(x.norm()))


@given(eis, eis.filter(bool))
def test_division(x, y):
    assert (x / y) * y == x


def test_embedding_of_tau():
    assert complex(TAU) == TAU_COMPLEX
    assert Eisenstein(Fraction(1, 2), Fraction(1, 2)).a == Fraction(1, 2)
    assert not Eisenstein(0) and Eisenstein(0, 1)
