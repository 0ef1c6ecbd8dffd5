"""Exact arithmetic in Q(tau), tau = exp(2 pi i / 3)."""
from __future__ import annotations

import cmath
from fractions import Fraction
from numbers import Rational

TAU_COMPLEX = cmath.exp(2j * cmath.pi / 3)


class Eisenstein:
    """``a + b * tau`` with rational ``a``, ``b``, reduced by ``tau**2 = -1 - tau``."""

    __slots__ = ("a", "b")

    def __init__(self, a=0, b=0):
        self.a = Fraction(a)
        self.b = Fraction(b)

    @classmethod
    def tau_power(cls, k: int) -> "Eisenstein":
        return (cls(1), cls(0, 1), cls(-1, -1))[k % 3]

    @staticmethod
    def _coerce(x) -> "Eisenstein":
        if isinstance(x, Eisenstein):
            return x
        if isinstance(x, (int, Rational)):
            return Eisenstein(x)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Eisenstein(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __neg__(self):
        return Eisenstein(-self.a, -self.b)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Eisenstein(self.a - o.a, self.b - o.b)

    def __rsub__(self, other):
        return -self + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        a, b, c, d = self.a, self.b, o.a, o.b
        return Eisenstein(a * c - b * d, a * d + b * c - b * d)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Rational)):
            return Eisenstein(self.a / other, self.b / other)
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        n = o.norm()
        return self * o.conjugate() / n

    def conjugate(self) -> "Eisenstein":
        # conj(tau) = tau**2 = -1 - tau
        return Eisenstein(self.a - self.b, -self.b)

    def norm(self) -> Fraction:
        return self.a * self.a - self.a * self.b + self.b * self.b

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return False
        return self.a == o.a and self.b == o.b

    def __hash__(self):
        return hash((self.a, self.b))

    def __bool__(self):
        return bool(self.a) or bool(self.b)

    def is_zero(self) -> bool:
        return not self

    def __complex__(self):
        return float(self.a) + float(self.b) * TAU_COMPLEX

    def __repr__(self):
        return f"Eisenstein({self.a}, {self.b})"

    def __str__(self):
        return f"{self.a} + {self.b}*tau"


TAU = Eisenstein(0, 1)
