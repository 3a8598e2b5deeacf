"""Arbitrary-precision helpers built on python-flint ``arb`` balls."""
from __future__ import annotations

from contextlib import contextmanager

import flint
import numpy as np

# working precision for extended assembly and solves
EXTENDED_DPS = 50
# ball radii grow through the elimination, so the factorization starts higher
CHOLESKY_DPS = 150
MAX_DPS = 1200


@contextmanager
def working_dps(dps: int):
    saved = flint.ctx.dps
    flint.ctx.dps = dps
    try:
        yield
    finally:
        flint.ctx.dps = saved


def arb_array(a) -> np.ndarray:
    """Object array of ``flint.arb`` from floats, strings or arbs."""
    a = np.asarray(a, dtype=object)
    out = np.empty(a.shape, dtype=object)
    for idx, v in np.ndenumerate(a):
        out[idx] = v if isinstance(v, flint.arb) else flint.arb(v)
    return out


def to_float(a) -> np.ndarray:
    """Round an array of arbs (ball midpoints) to double precision."""
    a = np.asarray(a, dtype=object)
    out = np.empty(a.shape)
    for idx, v in np.ndenumerate(a):
        out[idx] = float(v.mid()) if isinstance(v, flint.arb) else float(v)
    return out


def to_arb_mat(a: np.ndarray) -> flint.arb_mat:
    return flint.arb_mat(np.asarray(a, dtype=object).tolist())


def from_arb_mat(m: flint.arb_mat) -> np.ndarray:
    return np.array(m.tolist(), dtype=object)


class NotPositiveDefinite(ArithmeticError):
    """A Cholesky pivot was non-positive (``certain``) or straddled zero."""

    def __init__(self, pivot: int, certain: bool):
        self.pivot = pivot
        self.certain = certain
        kind = "non-positive" if certain else "indeterminate"
        super().__init__(f"{kind} pivot at index {pivot}")


def cholesky(a: np.ndarray, dps: int = CHOLESKY_DPS) -> np.ndarray:
    """Lower Cholesky factor of a symmetric object array of ``arb`` balls.

    The input should carry at least ``dps`` digits; a pivot ball that
    contains zero raises :class:`NotPositiveDefinite` with ``certain=False``
    so the caller can rebuild the matrix at higher precision.
    """
    n = a.shape[0]
    with working_dps(dps):
        work = np.array(a, dtype=object, copy=True)
        for k in range(n):
            d = work[k, k]
            if not d > 0:
                raise NotPositiveDefinite(k, certain=bool(d <= 0))
            work[k, k] = d.sqrt()
            col = work[k + 1:, k] / work[k, k]
            work[k + 1:, k] = col
            work[k + 1:, k + 1:] -= np.outer(col, col)
        zero = flint.arb(0)
        for i in range(n):
            work[i, i + 1:] = zero
    return work
