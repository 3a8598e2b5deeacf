"""Independent quadrature oracles in physical coordinates (r1, r2, r12)."""
import math

from scipy import integrate


def _phi(term, mu, r1, r2, u):
    n, m, p = term
    s, t = r1 + r2, r2 - r1
    e = math.exp(-mu * s)
    val = e * s**n * t**m * u**p
    ds = e * (n * s ** (n - 1) if n else 0.0) * t**m * u**p - mu * val
    dt = e * s**n * (m * t ** (m - 1) if m else 0.0) * u**p
    du = e * s**n * t**m * (p * u ** (p - 1) if p else 0.0)
    # chain rule to the particle radii
    return val, ds - dt, ds + dt, du


def integrand(op, ti, tj, mu, r1, r2, u):
    """Bilinear integrand for operator ``op`` without the measure."""
    vi, ai, bi, ci = _phi(ti, mu, r1, r2, u)
    vj, aj, bj, cj = _phi(tj, mu, r1, r2, u)
    if op == "overlap":
        return vi * vj
    if op == "kinetic":
        cos1 = (r1 * r1 - r2 * r2 + u * u) / (2.0 * r1 * u)
        cos2 = (r2 * r2 - r1 * r1 + u * u) / (2.0 * r2 * u)
        g1 = ai * aj + (ai * cj + ci * aj) * cos1 + ci * cj
        g2 = bi * bj + (bi * cj + ci * bj) * cos2 + ci * cj
        return 0.5 * (g1 + g2)
    if op == "trap":
        return 0.5 * (r1 * r1 + r2 * r2) * vi * vj
    if op == "impurity":
        return (1.0 / r1 + 1.0 / r2) * vi * vj
    if op == "interaction":
        return vi * vj / u
    raise ValueError(op)


def physical_element(op, ti, tj, mu, cutoff=None, epsrel=1e-11):
    """``8 pi^2 int r1 r2 u f dr1 dr2 du`` over |r1-r2| <= u <= r1+r2.

    The r2 range is split at r1 so the inner limits stay smooth.
    """
    cutoff = cutoff or 45.0 / mu

    def f(u, r2, r1):
        return r1 * r2 * u * integrand(op, ti, tj, mu, r1, r2, u)

    total = 0.0
    for lo, hi in ((lambda r1: 0.0, lambda r1: r1), (lambda r1: r1, lambda r1: cutoff)):
        val, _ = integrate.tplquad(
            f, 0.0, cutoff, lo, hi,
            lambda r1, r2: abs(r1 - r2), lambda r1, r2: r1 + r2,
            epsabs=0.0, epsrel=epsrel,
        )
        total += val
    return 8.0 * math.pi**2 * total
