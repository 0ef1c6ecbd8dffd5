import math
import warnings

import numpy as np
import pytest
from scipy import special

from cardylab.cardy import (CARDY_CONSTANT, Rectangle, TrianglePosition, cardy_probability,
                            hyp2f1_series, prediction, rectangle_cross_ratio,
                            rectangle_prediction, triangle_prediction, Triangle)
from cardylab.errors import NonPositiveAspect

import sc_oracle


@pytest.fixture(autouse=True)
def _quiet_quadrature():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def raw_p(m):
    """Cardy's series evaluated directly, without the 1 - m switch."""
    return CARDY_CONSTANT * m ** (1 / 3) * hyp2f1_series(1 / 3, 2 / 3, 4 / 3, m)


@pytest.mark.parametrize("t", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_triangle_is_identity(t):
    assert triangle_prediction(t) == t
    assert triangle_prediction(TrianglePosition(t)) == t
    assert prediction(Triangle(t)) == t


def test_triangle_position_range():
    with pytest.raises(ValueError):
        TrianglePosition(1.5)


def test_cross_ratio_basics():
    assert rectangle_cross_ratio(1.0) == pytest.approx(0.5, abs=1e-15)
    aspects = np.geomspace(0.05, 20, 60)
    ms = [rectangle_cross_ratio(a) for a in aspects]
    # monotone everywhere; strict wherever 1 - m is not lost to rounding
    assert all(b <= a for a, b in zip(ms, ms[1:]))
    strict = [m for a, m in zip(aspects, ms) if 0.2 <= a]
    assert all(b < a for a, b in zip(strict, strict[1:]))
    assert ms[0] > 1 - 1e-12 and ms[-1] < 1e-12
    for a in aspects:
        assert rectangle_cross_ratio(1 / a) == pytest.approx(1 - rectangle_cross_ratio(a), abs=1e-14)


def test_cross_ratio_matches_elliptic_integrals():
    for a in (0.3, 0.8, 1.7, 2.0, 4.0):
        m = rectangle_cross_ratio(a)
        assert special.ellipk(1 - m) / special.ellipk(m) == pytest.approx(a, rel=1e-12)


@pytest.mark.parametrize("aspect", [0.5, 1.0, 1.5, 2.0, 3.0])
def test_cross_ratio_against_sc_quadrature(aspect):
    assert abs(rectangle_cross_ratio(aspect) - sc_oracle.cross_ratio_for_aspect(aspect)) < 1e-8


@pytest.mark.parametrize("aspect", [0.5, 1.5, 2.0, 3.0])
def test_prediction_against_sc_map_to_triangle(aspect):
    m = sc_oracle.cross_ratio_for_aspect(aspect)
    assert abs(rectangle_prediction(aspect) - triangle_prediction(sc_oracle.triangle_ratio(m))) < 1e-6


def test_prediction_square_and_monotone():
    assert rectangle_prediction(1.0) == pytest.approx(0.5, abs=1e-14)
    assert prediction(Rectangle(2.0)) == pytest.approx(0.17564689380065, abs=1e-12)
    vals = [rectangle_prediction(a) for a in np.geomspace(0.1, 10, 50)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_duality_of_aspects():
    for a in np.geomspace(0.1, 10, 40):
        assert abs(rectangle_prediction(a) + rectangle_prediction(1 / a) - 1) < 1e-9


def test_series_duality_at_both_arguments():
    rng = np.random.default_rng(0)
    for m in rng.uniform(0.005, 0.995, 100):
        assert abs(raw_p(m) + raw_p(1 - m) - 1) < 1e-9
        assert cardy_probability(m) == pytest.approx(raw_p(m), abs=1e-9)


def test_series_against_euler_transform_and_scipy():
    for m in np.linspace(0.01, 0.99, 50):
        direct = hyp2f1_series(1 / 3, 2 / 3, 4 / 3, m)
        euler = (1 - m) ** (1 / 3) * hyp2f1_series(1.0, 2 / 3, 4 / 3, m)
        assert abs(direct - euler) < 1e-9
        assert direct == pytest.approx(special.hyp2f1(1 / 3, 2 / 3, 4 / 3, m), rel=1e-12)


def test_constant():
    assert CARDY_CONSTANT == pytest.approx(
        special.gamma(2 / 3) / (special.gamma(1 / 3) * special.gamma(4 / 3)), rel=1e-15)
    # P(1) = 1 fixes the normalization: C * 2F1(1/3, 2/3; 4/3; 1) = 1 by Gauss's theorem
    gauss = special.gamma(4 / 3) * special.gamma(1 / 3) / (special.gamma(1) * special.gamma(2 / 3))
    assert CARDY_CONSTANT * gauss == pytest.approx(1.0, rel=1e-14)
    assert cardy_probability(1.0) == pytest.approx(1.0, abs=1e-15)
    assert cardy_probability(0.0) == 0.0


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_non_positive_aspect(bad):
    with pytest.raises(NonPositiveAspect):
        rectangle_prediction(bad)
    with pytest.raises(NonPositiveAspect):
        Rectangle(bad)


def test_series_domain():
    with pytest.raises(ValueError):
        hyp2f1_series(1, 1, 1, 1.0)
    with pytest.raises(ValueError):
        cardy_probability(1.2)
