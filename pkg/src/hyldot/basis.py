"""Hylleraas basis terms, closed-form base integrals and sparse polynomials.

Basis functions are ``exp(-mu*s) * s**n * t**m * u**p`` in the Hylleraas
coordinates ``s = r1 + r2``, ``t = r2 - r1``, ``u = r12``.  Every matrix
element over the S-state domain ``0 <= t <= u <= s`` reduces to

    I(a, b, c; beta) = int_0^inf ds int_0^s du int_0^u dt
                       exp(-beta*s) s**a u**b t**c
                     = (a+b+c+2)! / ((c+1) (b+c+2) beta**(a+b+c+3))
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

import numpy as np
from scipy.special import gammaln

PARITIES = ("even", "odd")
VARIABLES = ("s", "t", "u")

# largest k with k! finite in double precision
_MAX_FACTORIAL = 170


class DomainError(ValueError):
    """Raised when an integral is requested outside its domain of definition."""


@dataclass(frozen=True, order=True)
class BasisTerm:
    """Exponents of one monomial ``s**n t**m u**p``."""

    n: int
    m: int
    p: int

    def __post_init__(self):
        if min(self.n, self.m, self.p) < 0:
            raise ValueError(f"negative exponent in {self}")

    @property
    def degree(self) -> int:
        return self.n + self.m + self.p


def _check_parity(parity: str) -> str:
    if parity not in PARITIES:
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    return parity


def generate_terms(omega: int, parity: str) -> list[BasisTerm]:
    """All ``(n, m, p)`` with ``n+m+p <= omega`` and ``m`` of the given parity.

    Terms are ordered lexicographically in ``(n+m+p, n, m)``.
    """
    if omega < 0:
        raise ValueError("omega must be non-negative")
    want = 0 if _check_parity(parity) == "even" else 1
    terms = []
    for k in range(omega + 1):
        for n in range(k + 1):
            for m in range(k - n + 1):
                if m % 2 == want:
                    terms.append(BasisTerm(n, m, k - n - m))
    return terms


def term_count(omega: int, parity: str) -> int:
    """Closed-form size of :func:`generate_terms` output."""
    start = 0 if _check_parity(parity) == "even" else 1
    return sum((omega - m + 1) * (omega - m + 2) // 2 for m in range(start, omega + 1, 2))


@dataclass(frozen=True)
class BasisSet:
    """Truncated Hylleraas basis of order ``omega`` in one permutation sector.

    ``parity='even'`` (``m`` even) spans spatially symmetric (singlet)
    functions, ``parity='odd'`` antisymmetric (triplet) ones.
    """

    omega: int
    parity: str
    mu: float
    terms: tuple[BasisTerm, ...] = field(default=(), compare=False)

    def __post_init__(self):
        _check_parity(self.parity)
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.terms:
            object.__setattr__(self, "terms", tuple(generate_terms(self.omega, self.parity)))
        for term in self.terms:
            if term.degree > self.omega or term.m % 2 != (self.parity == "odd"):
                raise ValueError(f"{term} violates the basis constraints")
        if not self.terms:
            raise ValueError("empty basis")

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[BasisTerm]:
        return iter(self.terms)

    @property
    def exponents(self) -> np.ndarray:
        """``(K, 3)`` integer array of ``(n, m, p)`` rows."""
        return np.array([(t.n, t.m, t.p) for t in self.terms], dtype=np.int64)

    @property
    def is_standard(self) -> bool:
        """True when ``terms`` is the full set for ``omega`` and ``parity``."""
        return self.terms == tuple(generate_terms(self.omega, self.parity))

    def with_mu(self, mu: float) -> "BasisSet":
        return BasisSet(self.omega, self.parity, float(mu), self.terms)


def base_integral(a: int, b: int, c: int, beta: float) -> float:
    """``I(a, b, c; beta)`` for a single exponent triple (``b`` on ``u``, ``c`` on ``t``)."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if min(a, b, c) < 0:
        raise DomainError(f"exponents must be non-negative, got {(a, b, c)}")
    k = a + b + c + 2
    denom = (c + 1) * (b + c + 2)
    if k <= _MAX_FACTORIAL:
        head = float(math.factorial(k)) / denom
        # beta**(k+1) may overflow or underflow on its own
        return math.exp(math.log(head) - (k + 1) * math.log(beta))
    return math.exp(math.lgamma(k + 1) - math.log(denom) - (k + 1) * math.log(beta))


def base_integral_exact(a: int, b: int, c: int, beta) -> Fraction:
    """Exact rational ``I(a, b, c; beta)`` for rational ``beta``."""
    beta = Fraction(beta)
    if beta <= 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if min(a, b, c) < 0:
        raise DomainError(f"exponents must be non-negative, got {(a, b, c)}")
    k = a + b + c + 2
    return Fraction(math.factorial(k), (c + 1) * (b + c + 2)) / beta ** (k + 1)


def base_integrals(a, b, c, beta: float) -> np.ndarray:
    """Vectorized :func:`base_integral`; entries with a negative exponent give 0.

    The zero convention lets callers multiply masked terms by vanishing
    coefficients (``n * s**(n-1)`` with ``n = 0``) without branching.
    """
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    a, b, c = np.broadcast_arrays(*(np.asarray(x, dtype=np.int64) for x in (a, b, c)))
    out = np.zeros(a.shape)
    ok = (a >= 0) & (b >= 0) & (c >= 0)
    k = (a + b + c + 2)[ok]
    out[ok] = np.exp(
        gammaln(k + 1.0)
        - np.log((c[ok] + 1.0) * (b[ok] + c[ok] + 2.0))
        - (k + 1.0) * math.log(beta)
    )
    return out


class TriPoly:
    """Sparse polynomial ``sum coeff * s**a t**b u**c`` keyed by ``(a, b, c)``.

    Coefficients may be any numeric type (int, Fraction, float, arb); the
    arithmetic is exact whenever the coefficient type is.  Zero coefficients
    are never stored.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[tuple[int, int, int], object] | Iterable = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[tuple[int, int, int], object] = {}
        for key, coeff in items:
            key = tuple(int(k) for k in key)
            if len(key) != 3 or min(key) < 0:
                raise ValueError(f"bad exponent triple {key}")
            acc[key] = acc.get(key, 0) + coeff
        self._terms = {k: v for k, v in acc.items() if v != 0}

    @classmethod
    def monomial(cls, a: int = 0, b: int = 0, c: int = 0, coeff=1) -> "TriPoly":
        return cls({(a, b, c): coeff})

    @classmethod
    def variable(cls, name: str) -> "TriPoly":
        exps = [0, 0, 0]
        exps[VARIABLES.index(name)] = 1
        return cls.monomial(*exps)

    @property
    def terms(self) -> dict[tuple[int, int, int], object]:
        return dict(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TriPoly):
            other = TriPoly.monomial(coeff=other) if other != 0 else TriPoly()
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __repr__(self) -> str:
        if not self._terms:
            return "TriPoly(0)"
        parts = [f"{v!r}*s^{a} t^{b} u^{c}" for (a, b, c), v in sorted(self._terms.items())]
        return "TriPoly(" + " + ".join(parts) + ")"

    def __add__(self, other) -> "TriPoly":
        if not isinstance(other, TriPoly):
            other = TriPoly.monomial(coeff=other)
        return TriPoly(list(self._terms.items()) + list(other._terms.items()))

    __radd__ = __add__

    def __neg__(self) -> "TriPoly":
        return TriPoly({k: -v for k, v in self._terms.items()})

    def __sub__(self, other) -> "TriPoly":
        if not isinstance(other, TriPoly):
            other = TriPoly.monomial(coeff=other)
        return self + (-other)

    def __rsub__(self, other) -> "TriPoly":
        return (-self) + other

    def __mul__(self, other) -> "TriPoly":
        if not isinstance(other, TriPoly):
            return TriPoly({k: v * other for k, v in self._terms.items()})
        out: dict[tuple[int, int, int], object] = {}
        for (a1, b1, c1), v1 in self._terms.items():
            for (a2, b2, c2), v2 in other._terms.items():
                key = (a1 + a2, b1 + b2, c1 + c2)
                out[key] = out.get(key, 0) + v1 * v2
        return TriPoly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "TriPoly":
        out = TriPoly.monomial()
        for _ in range(k):
            out = out * self
        return out

    def derivative(self, variable: str) -> "TriPoly":
        i = VARIABLES.index(variable)
        out = {}
        for key, v in self._terms.items():
            if key[i]:
                new = list(key)
                new[i] -= 1
                out[tuple(new)] = v * key[i]
        return TriPoly(out)

    def __call__(self, s, t, u):
        total = 0
        for (a, b, c), v in self._terms.items():
            total = total + v * s**a * t**b * u**c
        return total


def poly_add(p1: TriPoly, p2: TriPoly) -> TriPoly:
    return p1 + p2


def poly_multiply(p1: TriPoly, p2: TriPoly) -> TriPoly:
    return p1 * p2


def poly_derivative(p: TriPoly, variable: str) -> TriPoly:
    return p.derivative(variable)


def integrate_weighted(poly: TriPoly, beta: float) -> float:
    """``int exp(-beta*s) poly(s, t, u)`` over ``0 <= t <= u <= s``.

    Note the base-integral argument order: the ``u`` exponent comes before
    the ``t`` exponent.
    """
    return sum(
        float(coeff) * base_integral(a, c, b, beta)
        for (a, b, c), coeff in sorted(poly.terms.items())
    )
