"""Wavefunction evaluation, Legendre partial waves and radial kernels.

The spatial S-state wavefunction depends on ``r1``, ``r2`` and the cosine
``x`` of the inter-electronic angle only.  Its Legendre expansion

    psi(r1, r2, x) = sum_l f_l(r1, r2) P_l(x) / (r1 r2)

defines the partial waves ``f_l``; sampled on a uniform radial grid they
become the kernel matrices whose spectra give the natural occupancies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import eval_legendre

from hyldot.eigensolvers import VariationalState
from hyldot.errors import ContractViolation
from hyldot.matrix_elements import radius_matrix

DEFAULT_QUAD = 64
# radius enclosing the free-space helium density at printed precision
FREE_SPACE_RADIUS = 7.5
# noninteracting trap density: 4/sqrt(pi) r^2 exp(-r^2) falls to 1e-8 here
_TRAP_RADIUS = 4.6501
_TRAP_MEAN_RADIUS = 2.0 / math.sqrt(math.pi)
# rows per block when filling a kernel; bounds the (rows, n, Q) work array
_ROW_BLOCK = 32


@dataclass(frozen=True)
class RadialGrid:
    """Uniform mesh ``r_i = i * R / n_max`` for ``i = 0..n_max``."""

    R: float
    n_max: int

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")

    @property
    def delta_r(self) -> float:
        return self.R / self.n_max

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_max + 1) * self.delta_r


@dataclass(frozen=True)
class PartialWaveKernel:
    """``M_ij = delta_r * f_l(r_i, r_j)`` on a :class:`RadialGrid`."""

    l: int
    parity: str
    M: np.ndarray
    grid: RadialGrid

    def symmetry_defect(self) -> float:
        """``max |M - M^T|`` (even) or ``max |M + M^T|`` (odd)."""
        sign = 1.0 if self.parity == "even" else -1.0
        return float(np.abs(self.M - sign * self.M.T).max())


@lru_cache(maxsize=16)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[-1, 1]``."""
    if order < 1:
        raise ValueError("quadrature order must be positive")
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _powers(x: np.ndarray, k: int) -> np.ndarray:
    """``x**0 .. x**k`` on a trailing axis by repeated multiplication, which
    (unlike ``pow``) is exactly odd or even under ``x -> -x``."""
    out = np.empty(x.shape + (k + 1,))
    out[..., 0] = 1.0
    for j in range(1, k + 1):
        out[..., j] = out[..., j - 1] * x
    return out


def _radial_polynomials(state: VariationalState, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``A_p(s, t) = sum_k c_k s^n t^m`` over terms with ``u`` power ``p``."""
    e = state.basis.exponents
    c = state.raw_coefficients
    n_max, m_max, p_max = e.max(axis=0)
    s_pow = _powers(s, n_max)
    t_pow = _powers(t, m_max)
    table = np.zeros((p_max + 1, n_max + 1, m_max + 1))
    np.add.at(table, (e[:, 2], e[:, 0], e[:, 1]), c)
    return np.einsum("...i,...j,pij->p...", s_pow, t_pow, table, optimize=True)


def _horner(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    out = np.zeros(u.shape)
    for p in range(a.shape[0] - 1, -1, -1):
        out = out * u + a[p]
    return out


def _psi_points(state: VariationalState, r1, r2, x) -> np.ndarray:
    """Wavefunction at matching-shape arrays ``r1``, ``r2``, ``x``."""
    s, t = r1 + r2, r2 - r1
    u = np.sqrt(np.maximum(r1 * r1 + r2 * r2 - 2.0 * (r1 * r2) * x, 0.0))
    return _horner(_radial_polynomials(state, s, t), u) * np.exp(-state.basis.mu * s)


def _psi_angular(state: VariationalState, r1, r2, x) -> np.ndarray:
    """Wavefunction on ``r1.shape + x.shape`` for 1-D angular nodes ``x``."""
    s, t = r1 + r2, r2 - r1
    a = _radial_polynomials(state, s, t)[..., None]
    r1, r2 = r1[..., None], r2[..., None]
    u = np.sqrt(np.maximum(r1 * r1 + r2 * r2 - 2.0 * (r1 * r2) * x, 0.0))
    return _horner(a, u) * np.exp(-state.basis.mu * s)[..., None]


def eval_psi(state: VariationalState, r1, r2, x):
    """Normalized spatial wavefunction at ``(r1, r2, cos theta12)``.

    Arguments broadcast against each other; scalars in, scalar out.
    """
    r1, r2, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r1, r2, x)))
    if (r1 < 0).any() or (r2 < 0).any() or (np.abs(x) > 1).any():
        raise ContractViolation("need r1, r2 >= 0 and -1 <= x <= 1")
    out = _psi_points(state, r1, r2, x)
    return float(out) if out.ndim == 0 else out


def _check_order(l: int, quad_order: int) -> None:
    if l < 0:
        raise ContractViolation("l must be non-negative")
    if quad_order < l + 1:
        raise ContractViolation(f"quadrature order {quad_order} too low for l={l}")


def partial_wave(state: VariationalState, l: int, r1, r2, quad_order: int = DEFAULT_QUAD):
    """``f_l(r1, r2) = r1 r2 (2l+1)/2 int_{-1}^{1} psi P_l(x) dx`` by Gauss-Legendre."""
    _check_order(l, quad_order)
    x, w = gauss_legendre(quad_order)
    r1, r2 = np.broadcast_arrays(np.asarray(r1, dtype=float), np.asarray(r2, dtype=float))
    psi = _psi_angular(state, r1, r2, x)
    out = r1 * r2 * (2 * l + 1) / 2.0 * (psi @ (w * eval_legendre(l, x)))
    return float(out) if out.ndim == 0 else out


def kernel_matrices(
    state: VariationalState, l_max: int, grid: RadialGrid, quad_order: int = DEFAULT_QUAD
) -> list[PartialWaveKernel]:
    """Kernels for ``l = 0..l_max``, sharing one pass of wavefunction evaluations.

    Only the upper triangle is computed; the lower one follows from the
    exchange symmetry of the sector (symmetric for even, antisymmetric for
    odd parity), so the invariant holds exactly.
    """
    _check_order(l_max, quad_order)
    x, w = gauss_legendre(quad_order)
    ls = np.arange(l_max + 1)
    # (Q, L) projector including the (2l+1)/2 prefactor
    proj = (w[:, None] * eval_legendre(ls[None, :], x[:, None])) * (2 * ls + 1) / 2.0
    r = grid.nodes
    n = len(r)
    out = np.zeros((l_max + 1, n, n))
    for start in range(0, n, _ROW_BLOCK):
        stop = min(start + _ROW_BLOCK, n)
        r1 = np.broadcast_to(r[start:stop, None], (stop - start, n - start))
        r2 = np.broadcast_to(r[None, start:], r1.shape)
        f = _psi_angular(state, r1, r2, x) @ proj
        out[:, start:stop, start:] = np.moveaxis(f * (r1 * r2)[..., None], -1, 0)
    sign = 1.0 if state.parity == "even" else -1.0
    lower = np.tril_indices(n, -1)
    kernels = []
    for l in ls:
        m = out[l] * grid.delta_r
        m[lower] = sign * m.T[lower]
        if sign < 0:
            np.fill_diagonal(m, 0.0)
        kernels.append(PartialWaveKernel(int(l), state.parity, m, grid))
    return kernels


def kernel_matrix(
    state: VariationalState, l: int, grid: RadialGrid, quad_order: int = DEFAULT_QUAD
) -> PartialWaveKernel:
    """``M_ij = delta_r f_l(r_i, r_j)`` for ``i, j = 0..n_max``."""
    _check_order(l, quad_order)
    return kernel_matrices(state, l, grid, quad_order)[l]


def mean_radius(state: VariationalState) -> float:
    """``<(r1 + r2)/2>`` in the normalized state."""
    c = state.coefficients
    return float(c @ radius_matrix(state.basis) @ c)


def default_radius(state: VariationalState) -> float:
    """Outer grid radius when none is given.

    Free space uses 7.5.  In the trap the noninteracting 1e-8 density
    radius is stretched by the ratio of the state's mean radius to the
    noninteracting one.
    """
    if not state.params.trap:
        return FREE_SPACE_RADIUS
    return _TRAP_RADIUS * max(1.0, mean_radius(state) / _TRAP_MEAN_RADIUS)


def captured_mass(state: VariationalState, R: float, n_radial: int = 200, quad_order: int = 32) -> float:
    """Probability that both electrons lie inside radius ``R``.

    Tensor Gauss-Legendre quadrature over ``[0, R]^2 x [-1, 1]`` with the
    S-state volume element ``8 pi^2 r1^2 r2^2``.
    """
    xr, wr = gauss_legendre(n_radial)
    r = 0.5 * R * (xr + 1.0)
    wr = 0.5 * R * np.asarray(wr)
    x, w = gauss_legendre(quad_order)
    total = 0.0
    for start in range(0, len(r), _ROW_BLOCK):
        sl = slice(start, start + _ROW_BLOCK)
        r1 = np.broadcast_to(r[sl, None], (len(r[sl]), len(r)))
        r2 = np.broadcast_to(r[None, :], r1.shape)
        dens = _psi_angular(state, r1, r2, x) ** 2 @ w
        total += float(wr[sl] @ (dens * (r1 * r2) ** 2) @ wr)
    return 8.0 * math.pi**2 * total
