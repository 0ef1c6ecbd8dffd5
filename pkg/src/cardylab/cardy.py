"""Continuum crossing probabilities for the equilateral triangle and rectangles.

Rectangles carry marks A, B, C, D counterclockwise at the corners, with
|AB| = |CD| = 1 and |BC| = |DA| = aspect.  The crossing is between the
sides AB and CD, so it gets harder as the aspect grows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .errors import NonPositiveAspect

CARDY_CONSTANT = math.gamma(2 / 3) / (math.gamma(1 / 3) * math.gamma(4 / 3))


@dataclass(frozen=True)
class TrianglePosition:
    """Position of D on the side from C (t = 0) to A (t = 1)."""

    t: float

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {self.t}")


@dataclass(frozen=True)
class Triangle:
    t: float


@dataclass(frozen=True)
class Rectangle:
    aspect: float

    def __post_init__(self):
        _check_aspect(self.aspect)


Quad = Union[Triangle, Rectangle]


def _check_aspect(aspect: float) -> None:
    if not aspect > 0 or math.isinf(aspect):
        raise NonPositiveAspect(f"aspect must be a positive number, got {aspect}")


def triangle_prediction(t: TrianglePosition | float) -> float:
    if not isinstance(t, TrianglePosition):
        t = TrianglePosition(float(t))
    return t.t


def _theta_ratio(q: float) -> float:
    """(theta_2(q) / theta_3(q))**4 for 0 <= q < 1."""
    t2, t3 = 0.0, 1.0
    n = 0
    while True:
        a = q ** (n * (n + 1))
        b = q ** ((n + 1) ** 2)
        t2 += a
        t3 += 2 * b
        if a < 1e-18 * t2 and b < 1e-18:
            break
        n += 1
    t2 *= 2 * q ** 0.25
    return (t2 / t3) ** 4


def rectangle_cross_ratio(aspect: float) -> float:
    """m in (0, 1) with K(sqrt(1 - m)) / K(sqrt(m)) = aspect (K of the modulus k).

    Uses the nome q = exp(-pi * aspect) and m = (theta_2 / theta_3)**4; for
    aspect < 1 the symmetry m(1 / aspect) = 1 - m(aspect) keeps q small.
    """
    _check_aspect(aspect)
    if aspect < 1.0:
        return 1.0 - _theta_ratio(math.exp(-math.pi / aspect))
    return _theta_ratio(math.exp(-math.pi * aspect))


def hyp2f1_series(a: float, b: float, c: float, z: float, max_terms: int = 100000) -> float:
    """Gauss series for 2F1(a, b; c; z), |z| < 1."""
    if not abs(z) < 1:
        raise ValueError("the series needs |z| < 1")
    term, total = 1.0, 1.0
    for n in range(max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        total += term
        if abs(term) < 1e-17 * abs(total):
            return total
    raise ArithmeticError("hypergeometric series did not converge")


def cardy_probability(m: float) -> float:
    """Crossing probability as a function of the cross-ratio ``m``."""
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"m must lie in [0, 1], got {m}")
    if m > 0.5:
        return 1.0 - cardy_probability(1.0 - m)
    if m == 0.0:
        return 0.0
    return CARDY_CONSTANT * m ** (1 / 3) * hyp2f1_series(1 / 3, 2 / 3, 4 / 3, m)


def rectangle_prediction(aspect: float) -> float:
    return cardy_probability(rectangle_cross_ratio(aspect))


def prediction(shape: Quad) -> float:
    if isinstance(shape, Triangle):
        return triangle_prediction(shape.t)
    return rectangle_prediction(shape.aspect)
