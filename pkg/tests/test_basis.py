import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hyldot.basis import (
    BasisSet,
    BasisTerm,
    DomainError,
    TriPoly,
    base_integral,
    base_integral_exact,
    base_integrals,
    generate_terms,
    integrate_weighted,
    poly_add,
    poly_derivative,
    poly_multiply,
    term_count,
)

S_CUTOFF = 60.0


def cubature(f, beta):
    """Adaptive integral of exp(-beta s) f(s, t, u) over 0 <= t <= u <= s."""
    val, err = integrate.tplquad(
        lambda t, u, s: math.exp(-beta * s) * f(s, t, u),
        0.0, S_CUTOFF / beta,
        lambda s: 0.0, lambda s: s,
        lambda s, u: 0.0, lambda s, u: u,
        epsabs=0.0, epsrel=1e-12,
    )
    return val


def test_term_counts():
    assert len(generate_terms(14, "even")) == 372
    assert generate_terms(0, "even") == [BasisTerm(0, 0, 0)]
    assert len(generate_terms(2, "even")) == 7
    assert generate_terms(0, "odd") == []


@pytest.mark.parametrize("omega", range(21))
@pytest.mark.parametrize("parity", ["even", "odd"])
def test_term_count_closed_form(omega, parity):
    assert term_count(omega, parity) == len(generate_terms(omega, parity))


def test_term_order_and_constraints():
    terms = generate_terms(6, "odd")
    keys = [(t.degree, t.n, t.m) for t in terms]
    assert keys == sorted(keys)
    assert len(set(terms)) == len(terms)
    assert all(t.m % 2 == 1 and t.degree <= 6 for t in terms)


def test_basis_set_validation():
    b = BasisSet(4, "even", 2.0)
    assert len(b) == term_count(4, "even")
    assert b.exponents.shape == (len(b), 3)
    assert b.with_mu(3.0).mu == 3.0
    with pytest.raises(ValueError):
        BasisSet(4, "even", 0.0)
    with pytest.raises(ValueError):
        BasisSet(4, "sideways", 1.0)
    with pytest.raises(ValueError):
        BasisSet(2, "even", 1.0, (BasisTerm(0, 1, 0),))
    with pytest.raises(ValueError):
        BasisTerm(-1, 0, 0)


def test_base_integral_examples():
    assert base_integral(0, 0, 0, 2.0) == pytest.approx(0.125, rel=1e-15)
    assert base_integral(1, 0, 0, 1.0) == pytest.approx(3.0, rel=1e-15)
    assert base_integral_exact(0, 0, 0, 2) == Fraction(1, 8)


def test_base_integral_cubature():
    oracle = cubature(lambda s, t, u: s**3 * u**2 * t, 2.0)
    assert base_integral(3, 2, 1, 2.0) == pytest.approx(oracle, rel=1e-10)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_base_integral_domain(bad):
    with pytest.raises(DomainError):
        base_integral(0, 0, 0, bad)
    with pytest.raises(DomainError):
        base_integrals(0, 0, 0, bad)
    with pytest.raises(DomainError):
        base_integral(-1, 0, 0, 1.0)


def test_base_integral_large_exponent_no_overflow():
    # beyond 170! the log-domain path takes over
    v = base_integral(150, 20, 10, 40.0)
    exact = base_integral_exact(150, 20, 10, 40)
    assert math.isfinite(v)
    assert v == pytest.approx(float(exact), rel=1e-11)


exps = st.integers(min_value=0, max_value=25)
betas = st.floats(min_value=0.1, max_value=20.0)


@given(exps, exps, exps, betas)
def test_base_integral_recurrence(a, b, c, beta):
    lhs = base_integral(a + 1, b, c, beta)
    rhs = (a + b + c + 3) / beta * base_integral(a, b, c, beta)
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert base_integral(a, b, c, beta) > 0
    assert base_integral(a, b, c, beta * 1.01) < base_integral(a, b, c, beta)


@given(exps, exps, exps, st.fractions(min_value=Fraction(1, 10), max_value=10))
def test_base_integral_matches_exact(a, b, c, beta):
    assert base_integral(a, b, c, float(beta)) == pytest.approx(float(base_integral_exact(a, b, c, beta)), rel=1e-12)


def test_base_integrals_vectorized():
    a = np.array([0, 3, 5, -1])
    b = np.array([0, 2, 1, 0])
    c = np.array([0, 1, 4, 0])
    out = base_integrals(a, b, c, 2.5)
    for k in range(3):
        assert out[k] == pytest.approx(base_integral(a[k], b[k], c[k], 2.5), rel=1e-13)
    assert out[3] == 0.0


s, t, u = (TriPoly.variable(v) for v in "stu")


def test_poly_examples():
    assert poly_derivative(s**2 * t, "t") == s**2
    assert poly_multiply(s + u, s - u) == s**2 - u**2
    assert not poly_derivative(TriPoly.monomial(), "u")
    assert poly_derivative(TriPoly.monomial(), "u") == TriPoly()
    assert poly_add(s, -s) == TriPoly()
    assert len(TriPoly({(1, 0, 0): 0})) == 0


def test_poly_eval():
    p = 3 * s**2 * t - u + 2
    assert p(1.5, 0.5, 2.0) == pytest.approx(3 * 2.25 * 0.5 - 2.0 + 2)


def test_integrate_weighted_examples():
    assert integrate_weighted(TriPoly.monomial(), 2.0) == pytest.approx(0.125)
    assert integrate_weighted(TriPoly({(0, 0, 0): 2, (3, 1, 1): 0}), 2.0) == pytest.approx(0.25)


def test_integrate_weighted_cubature():
    rng = np.random.default_rng(7)
    terms = {}
    while len(terms) < 10:
        key = tuple(int(v) for v in rng.integers(0, 4, size=3))
        terms[key] = float(rng.normal())
    poly = TriPoly(terms)
    oracle = cubature(lambda s_, t_, u_: poly(s_, t_, u_), 2.0)
    assert integrate_weighted(poly, 2.0) == pytest.approx(oracle, rel=1e-10)


small_int = st.integers(min_value=-5, max_value=5)
monomials = st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3))
polys = st.dictionaries(monomials, st.fractions(min_value=-5, max_value=5, max_denominator=7), max_size=5).map(TriPoly)


@settings(max_examples=60)
@given(polys, polys, polys)
def test_poly_ring_axioms(p, q, r):
    assert p + q == q + p
    assert p * q == q * p
    assert (p + q) + r == p + (q + r)
    assert (p * q) * r == p * (q * r)
    assert p * (q + r) == p * q + p * r


@settings(max_examples=60)
@given(polys, polys, st.sampled_from("stu"))
def test_poly_product_rule(p, q, var):
    assert (p * q).derivative(var) == p.derivative(var) * q + p * q.derivative(var)


@settings(max_examples=40)
@given(polys, polys, small_int)
def test_integrate_weighted_linear(p, q, alpha):
    lhs = integrate_weighted(alpha * p + q, 1.7)
    rhs = alpha * integrate_weighted(p, 1.7) + integrate_weighted(q, 1.7)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
