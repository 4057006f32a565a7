"""Exact Gaussian-rational scalars for Hamiltonian coefficients.

Coefficients of the symbolic Hamiltonians are complex numbers whose real and
imaginary parts are exact rationals, so homological divisions and iterated
Poisson brackets stay bit-exact; floating point enters only at evaluation time.
"""
from __future__ import annotations

from fractions import Fraction


class ComplexRational:
    """Complex number with exact `Fraction` real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if isinstance(re, Fraction) else Fraction(re)
        self.im = im if isinstance(im, Fraction) else Fraction(im)

    def __add__(self, other: "ComplexRational") -> "ComplexRational":
        return ComplexRational(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexRational") -> "ComplexRational":
        return ComplexRational(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "ComplexRational":
        return ComplexRational(-self.re, -self.im)

    def __mul__(self, other):
        if isinstance(other, ComplexRational):
            return ComplexRational(
                self.re * other.re - self.im * other.im,
                self.re * other.im + self.im * other.re,
            )
        return ComplexRational(self.re * other, self.im * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ComplexRational):
            d = other.re * other.re + other.im * other.im
            return ComplexRational(
                (self.re * other.re + self.im * other.im) / d,
                (self.im * other.re - self.re * other.im) / d,
            )
        return ComplexRational(self.re / Fraction(other), self.im / Fraction(other))

    def conjugate(self) -> "ComplexRational":
        return ComplexRational(self.re, -self.im)

    def abs2(self) -> Fraction:
        """Exact squared modulus."""
        return self.re * self.re + self.im * self.im

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ComplexRational)
            and self.re == other.re
            and self.im == other.im
        )

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self) -> str:
        return f"ComplexRational({self.re!r}, {self.im!r})"


ZERO = ComplexRational(0, 0)
ONE = ComplexRational(1, 0)
I = ComplexRational(0, 1)
MINUS_I = ComplexRational(0, -1)


def from_fraction_pair(re: Fraction, im: Fraction) -> ComplexRational:
    return ComplexRational(re, im)
