"""Dense eigensolvers, the variational solve and the mu scan.

The standard dense problems are thin wrappers over LAPACK (numpy/scipy)
that add the contract checks and a deterministic sign convention.  The
extended-precision generalized solve goes through python-flint.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import flint
import numpy as np
from scipy.linalg import eigh_tridiagonal, lapack, solve_triangular

from hyldot import _extended as ext
from hyldot.basis import BasisSet
from hyldot.errors import ContractViolation, IllConditionedOverlap
from hyldot.matrix_elements import (
    ModelParams,
    assemble,
    raw_norms,
    reduced_operators,
)

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _fix_signs(vectors: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """Flip columns so the first significant component is positive."""
    v = np.array(vectors, dtype=float, copy=True)
    if v.ndim == 1:
        return _fix_signs(v[:, None], rel_tol)[:, 0]
    for k in range(v.shape[1]):
        col = v[:, k]
        big = np.flatnonzero(np.abs(col) > rel_tol * np.abs(col).max()) if col.any() else []
        if len(big) and col[big[0]] < 0:
            v[:, k] = -col
    return v


def _check_symmetric(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation(f"{name} must be square, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1e-300)
    if np.abs(a - a.T).max() > SYMMETRY_TOL * scale:
        raise ContractViolation(f"{name} is not symmetric")
    return a


def sym_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    a = _check_symmetric(a)
    w, v = np.linalg.eigh(a)
    return w, _fix_signs(v)


class GenEigResult(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray
    condition: float


def _condition_estimate(s: np.ndarray) -> float:
    w = np.linalg.eigvalsh(s)
    return float("inf") if w[0] <= 0 else float(w[-1] / w[0])


def gen_sym_eig(
    h, s, precision: str = "double", n_states: int | None = None, dps: int = ext.CHOLESKY_DPS
) -> GenEigResult:
    """Solve ``H c = E S c`` for symmetric ``H`` and positive-definite ``S``.

    Returns ascending eigenvalues, ``S``-orthonormal eigenvectors (columns)
    and an estimate of the 2-norm condition number of ``S``.  With
    ``precision='extended'`` the inputs may be arrays of ``flint.arb``; the
    reduction is carried out in arbitrary precision and the lowest
    ``n_states`` (default 1) eigenpairs are refined by inverse iteration;
    ``dps`` is the precision of the extended Cholesky factorization.

    Raises
    ------
    IllConditionedOverlap
        If the Cholesky factorization of ``S`` breaks down.
    """
    if precision == "double":
        return _gen_sym_eig_double(h, s, n_states)
    if precision == "extended":
        return _gen_sym_eig_extended(h, s, n_states or 1, dps)
    raise ValueError(f"unknown precision {precision!r}")


def _gen_sym_eig_double(h, s, n_states):
    h = _check_symmetric(h, "H")
    s = _check_symmetric(s, "S")
    chol, info = lapack.dpotrf(s, lower=1, clean=1)
    if info > 0:
        raise IllConditionedOverlap(info - 1, _condition_estimate(s))
    if info < 0:
        raise ContractViolation(f"dpotrf argument {-info} invalid")
    rcond, _ = lapack.dpocon(chol, np.abs(s).sum(axis=0).max(), uplo="L")
    cond = float("inf") if rcond == 0 else 1.0 / rcond
    a = solve_triangular(chol, solve_triangular(chol, h, lower=True).T, lower=True)
    w, y = np.linalg.eigh(0.5 * (a + a.T))
    x = solve_triangular(chol.T, y, lower=False)
    if n_states is not None:
        w, x = w[:n_states], x[:, :n_states]
    return GenEigResult(w, _fix_signs(x), cond)


def _gen_sym_eig_extended(h, s, n_states, dps):
    h = ext.arb_array(h)
    s = ext.arb_array(s)
    try:
        chol = ext.cholesky(s, dps)
    except ext.NotPositiveDefinite as exc:
        raise IllConditionedOverlap(
            exc.pivot, _condition_estimate(ext.to_float(s)), certain=exc.certain
        ) from None
    with ext.working_dps(ext.EXTENDED_DPS):
        n = s.shape[0]
        lf = ext.to_arb_mat(chol)
        linv = lf.solve(flint.arb_mat(n, n, [int(i == j) for i in range(n) for j in range(n)]), algorithm="approx")
        hf = ext.to_arb_mat(h)
        sf = ext.to_arb_mat(s)
        a = ext.to_float(ext.from_arb_mat(linv * hf * linv.transpose()))
        w, y = np.linalg.eigh(0.5 * (a + a.T))
        linv_t = linv.transpose()
        cond = (np.linalg.norm(ext.to_float(chol), 2) * np.linalg.norm(ext.to_float(ext.from_arb_mat(linv)), 2)) ** 2
        values = []
        vectors = []
        for k in range(n_states):
            x = linv_t * flint.arb_mat([[float(v)] for v in y[:, k]])
            energy, x = _inverse_iteration(hf, sf, x, w[k])
            values.append(energy)
            vectors.append(ext.to_float(ext.from_arb_mat(x))[:, 0])
    return GenEigResult(np.array(values), _fix_signs(np.column_stack(vectors)), float(cond))


def _inverse_iteration(hf, sf, x, shift, max_iter: int = 8):
    """Refine one eigenpair of ``(H, S)`` near ``shift`` in arb arithmetic."""
    target = flint.arb(10) ** (-(ext.EXTENDED_DPS - 10))
    sigma = flint.arb(shift) - flint.arb(1e-12) * (1 + abs(shift))
    shifted = hf - sigma * sf
    energy = None
    for _ in range(max_iter):
        x = shifted.solve(sf * x, algorithm="approx")
        x = x * (1 / (x.transpose() * sf * x)[0, 0].sqrt())
        new = (x.transpose() * hf * x)[0, 0]
        if energy is not None and abs(new - energy).mid() < target:
            energy = new
            break
        energy = new
    return float(energy.mid()), x


def svd(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``M = U diag(sigma) V^T`` with ``sigma`` descending; returns ``(sigma, U, V^T)``."""
    u, sigma, vt = np.linalg.svd(np.asarray(m, dtype=float))
    return sigma, u, vt


def tridiag_eig(diagonal, off_diagonal, n_states: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``n_states`` eigenpairs of a symmetric tridiagonal matrix."""
    d = np.asarray(diagonal, dtype=float)
    e = np.asarray(off_diagonal, dtype=float)
    if e.shape != (max(len(d) - 1, 0),):
        raise ContractViolation("off-diagonal must have length len(diagonal) - 1")
    if len(d) == 1:
        return d.copy(), np.ones((1, 1))
    w, v = eigh_tridiagonal(d, e, select="i", select_range=(0, n_states - 1))
    return w, _fix_signs(v)


@dataclass(frozen=True)
class VariationalState:
    """Variational eigenpair of the model Hamiltonian.

    ``coefficients`` refer to the unit-norm basis functions
    ``phi_k / norms[k]`` and satisfy ``c^T S c = 1``.
    """

    energy: float
    coefficients: np.ndarray
    params: ModelParams
    basis: BasisSet
    residual: float
    norms: np.ndarray
    condition: float

    @property
    def raw_coefficients(self) -> np.ndarray:
        """Coefficients of the bare monomials ``exp(-mu s) s^n t^m u^p``."""
        return self.coefficients / self.norms

    @property
    def parity(self) -> str:
        return self.basis.parity


def lowest_energy(basis: BasisSet, params: ModelParams) -> float:
    """Lowest variational eigenvalue at ``basis.mu`` (reduced-operator path)."""
    if not basis.is_standard:
        pair = assemble(basis, params)
        return float(gen_sym_eig(pair.H, pair.S, n_states=1).values[0])
    ops = reduced_operators(basis.omega, basis.parity)
    return float(np.linalg.eigvalsh(ops.hamiltonian(basis.mu, params))[0])


def solve_state(basis: BasisSet, params: ModelParams, precision: str = "double", index: int = 0) -> VariationalState:
    """Variational eigenstate number ``index`` (0 = lowest) in ``basis``."""
    if precision == "extended":
        dps = ext.CHOLESKY_DPS
        while True:
            pair = assemble(basis, params, "extended", dps)
            try:
                res = gen_sym_eig(pair.H, pair.S, "extended", n_states=index + 1, dps=dps)
                break
            except IllConditionedOverlap as exc:
                # an indeterminate pivot only means the input balls were too wide
                if exc.certain or dps >= ext.MAX_DPS:
                    raise exc.with_mu(basis.mu) from None
                dps *= 2
        energy, c, cond = float(res.values[index]), res.vectors[:, index], res.condition
        h = ext.to_float(pair.H)
        s = ext.to_float(pair.S)
    elif not basis.is_standard:
        pair = assemble(basis, params)
        h, s = pair.H, pair.S
        res = gen_sym_eig(h, s)
        energy, c, cond = float(res.values[index]), res.vectors[:, index], res.condition
    else:
        ops = reduced_operators(basis.omega, basis.parity)
        w, y = np.linalg.eigh(ops.hamiltonian(basis.mu, params))
        c = solve_triangular(ops.chol.T, y[:, index], lower=False)
        energy, cond = float(w[index]), ops.condition
        pair = assemble(basis, params)
        h, s = pair.H, pair.S
    # both paths already give c^T S c = 1 in exact arithmetic; renormalizing
    # against the double-rounded S would undo that when S is ill-conditioned
    c = _fix_signs(c)
    residual = float(np.linalg.norm(h @ c - energy * (s @ c)))
    return VariationalState(energy, c, params, basis, residual, raw_norms(basis), cond)


@dataclass(frozen=True)
class MuScan:
    mu: float
    energy: float
    grid: np.ndarray
    grid_energies: np.ndarray
    unimodal: bool


def _local_minima(values: np.ndarray) -> int:
    inner = (values[1:-1] < values[:-2]) & (values[1:-1] <= values[2:])
    return int(inner.sum())


def optimize_mu(
    params: ModelParams,
    omega: int,
    mu_range: tuple[float, float] = (0.05, 200.0),
    parity: str = "even",
    tol: float = 1e-3,
    grid_points: int = 16,
    max_widen: int = 6,
) -> MuScan:
    """Minimize the lowest eigenvalue over the exponent ``mu``.

    A log-spaced grid locates the global minimum; the bracket is widened
    by a factor of 4 when the minimum sits on an edge.  Golden-section
    search between the neighbouring grid points then refines ``mu`` to
    absolute tolerance ``tol``.
    """
    lo, hi = map(float, mu_range)
    if not 0 < lo < hi:
        raise ValueError("mu_range must satisfy 0 < lo < hi")
    template = BasisSet(omega, parity, 1.0)

    def energy(mu: float) -> float:
        try:
            return lowest_energy(template.with_mu(mu), params)
        except IllConditionedOverlap as exc:
            raise exc.with_mu(mu) from None

    for _ in range(max_widen + 1):
        grid = np.geomspace(lo, hi, grid_points)
        values = np.array([energy(m) for m in grid])
        k = int(np.argmin(values))
        if 0 < k < grid_points - 1:
            break
        if k == 0:
            lo /= 4.0
        else:
            hi *= 4.0
    else:
        log.warning("mu scan minimum stayed on the bracket edge after widening")
    unimodal = _local_minima(values) <= 1
    if not unimodal:
        log.info("mu scan found %d local minima; using the global one", _local_minima(values))

    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, grid_points - 1)]
    best_mu, best_e = grid[k], values[k]
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = energy(c), energy(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = energy(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = energy(d)
    for mu, e in ((c, fc), (d, fd)):
        if e < best_e:
            best_mu, best_e = mu, e
    return MuScan(float(best_mu), float(best_e), grid, values, unimodal)
