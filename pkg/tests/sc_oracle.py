"""Schwarz-Christoffel quadrature, used only as a test oracle.

Rectangle corners A, B, C, D have upper half-plane prevertices 0, m, 1, inf.
"""
import math

from scipy import integrate, optimize


def _alg(f, a, b, alpha, beta):
    """integral of f(t) (t - a)^alpha (b - t)^beta over [a, b]."""
    val, _ = integrate.quad(f, a, b, weight="alg", wvar=(alpha, beta), epsabs=1e-14, epsrel=1e-13,
                            limit=200)
    return val


def rectangle_sides(m):
    """(|AB|, |BC|) of the rectangle image for prevertices 0, m, 1, inf."""
    ab = _alg(lambda t: 1 / math.sqrt(1 - t), 0.0, m, -0.5, -0.5)
    bc = _alg(lambda t: 1 / math.sqrt(t), m, 1.0, -0.5, -0.5)
    return ab, bc


def cross_ratio_for_aspect(aspect):
    """m with |BC| / |AB| = aspect."""
    g = lambda m: math.log(rectangle_sides(m)[1] / rectangle_sides(m)[0]) - math.log(aspect)
    return optimize.brentq(g, 1e-15, 1 - 1e-15, xtol=1e-16, rtol=1e-15, maxiter=500)


def triangle_ratio(m):
    """|CD| / |CA| in the equilateral triangle with A, B, C at prevertices 0, m, 1 and D at inf."""
    e = -2 / 3
    # side from C (t = 1) out to D (t = +inf), split at t = 2
    cd = _alg(lambda t: t ** e * (t - m) ** e, 1.0, 2.0, e, 0.0)
    cd += integrate.quad(lambda t: t ** e * (t - m) ** e * (t - 1) ** e, 2.0, math.inf,
                         epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    # side from D (t = -inf) back to A (t = 0), split at t = -1
    da = _alg(lambda t: (m - t) ** e * (1 - t) ** e, -1.0, 0.0, 0.0, e)
    da += integrate.quad(lambda t: (-t) ** e * (m - t) ** e * (1 - t) ** e, -math.inf, -1.0,
                         epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return cd / (cd + da)
