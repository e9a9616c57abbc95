"""Exact arithmetic in multi-quadratic fields Q(sqrt(p1), sqrt(p2), ...).

A value is a finite sum ``sum_r c_r * sqrt(r)`` over distinct squarefree
positive integers ``r`` with rational coefficients.  The square roots of
distinct squarefree integers are linearly independent over Q, so a value
is zero exactly when every coefficient vanishes.
"""
from __future__ import annotations

import math
from fractions import Fraction


def _squarefree_split(n):
    """Write n = k*k*s with s squarefree; return (k, s)."""
    k, s = 1, 1
    p = 2
    while p * p <= n:
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        k *= p ** (e // 2)
        if e % 2:
            s *= p
        p += 1
    return k, s * n


def _primes(n):
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


class Surd:
    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        for r, c in (terms or {}).items():
            c = Fraction(c)
            if c != 0:
                clean[int(r)] = clean.get(int(r), Fraction(0)) + c
        self.terms = {r: c for r, c in clean.items() if c != 0}

    @classmethod
    def sqrt(cls, q):
        """Exact square root of a nonnegative rational."""
        q = Fraction(q)
        if q < 0:
            raise ValueError("square root of a negative number")
        if q == 0:
            return cls()
        # sqrt(a/b) = sqrt(a*b)/b
        k, s = _squarefree_split(q.numerator * q.denominator)
        return cls({s: Fraction(k, q.denominator)})

    @staticmethod
    def lift(x):
        if isinstance(x, Surd):
            return x
        if isinstance(x, (int, Fraction)):
            return Surd({1: x})
        return NotImplemented

    def is_rational(self):
        return all(r == 1 for r in self.terms)

    def simplify(self):
        """Return a Fraction when the value is rational."""
        if self.is_rational():
            return self.terms.get(1, Fraction(0))
        return self

    def __add__(self, other):
        other = Surd.lift(other)
        if other is NotImplemented:
            return NotImplemented
        out = dict(self.terms)
        for r, c in other.terms.items():
            out[r] = out.get(r, Fraction(0)) + c
        return Surd(out)

    __radd__ = __add__

    def __neg__(self):
        return Surd({r: -c for r, c in self.terms.items()})

    def __sub__(self, other):
        other = Surd.lift(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = Surd.lift(other)
        if other is NotImplemented:
            return NotImplemented
        out = {}
        for r, c in self.terms.items():
            for s, e in other.terms.items():
                g = math.gcd(r, s)
                key = (r // g) * (s // g)
                out[key] = out.get(key, Fraction(0)) + c * e * g
        return Surd(out)

    __rmul__ = __mul__

    def _split(self, p):
        a, b = {}, {}
        for r, c in self.terms.items():
            if r % p == 0:
                b[r // p] = c
            else:
                a[r] = c
        return Surd(a), Surd(b)

    def inverse(self):
        if not self.terms:
            raise ZeroDivisionError("division by an exact zero")
        primes = sorted({p for r in self.terms for p in _primes(r)})
        if not primes:
            return Surd({1: 1 / self.terms[1]})
        p = primes[-1]
        a, b = self._split(p)
        root = Surd({p: 1})
        # (a + b sqrt p)^-1 = (a - b sqrt p) / (a^2 - p b^2)
        norm = a * a - b * b * p
        return (a - b * root) * norm.inverse()

    def __truediv__(self, other):
        other = Surd.lift(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return Surd.lift(other) * self.inverse()

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        out = Surd({1: 1})
        for _ in range(k):
            out = out * self
        return out

    def __float__(self):
        return float(sum(float(c) * math.sqrt(r) for r, c in self.terms.items()))

    def __eq__(self, other):
        other = Surd.lift(other)
        if other is NotImplemented:
            return NotImplemented
        return not (self - other).terms

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    def __abs__(self):
        return self if float(self) >= 0 else -self

    def __lt__(self, other):
        return float(self) < float(other)

    def __le__(self, other):
        return float(self) <= float(other)

    def __gt__(self, other):
        return float(self) > float(other)

    def __ge__(self, other):
        return float(self) >= float(other)

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for r in sorted(self.terms):
            c = self.terms[r]
            parts.append(str(c) if r == 1 else f"{c}*sqrt({r})")
        return " + ".join(parts)

    def to_json(self):
        return {"sqrt_terms": {str(r): str(c) for r, c in sorted(self.terms.items())}}

    @classmethod
    def from_json(cls, obj):
        return cls({int(r): Fraction(c) for r, c in obj["sqrt_terms"].items()})
