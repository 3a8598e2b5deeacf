"""Closed-form Hamiltonian and overlap matrices in the Hylleraas basis.

The model Hamiltonian is

    H = sum_i [ -1/2 nabla_i^2 + trap * r_i^2 / 2 + z / r_i ] + lambda_ee / r12

which is the scaled quantum-dot Hamiltonian for ``trap=True, z=eta*gamma,
lambda_ee=gamma`` and a free two-electron ion for ``trap=False, z=-Z,
lambda_ee=1``.

All integrals use the S-state measure ``2 pi^2 u (s^2 - t^2) ds du dt`` on
``0 <= t <= u <= s``.  With ``r1^2 + r2^2 = (s^2 + t^2)/2``,
``1/r1 + 1/r2 = 4 s / (s^2 - t^2)`` and ``1/r12 = 1/u`` every integrand is a
polynomial times ``exp(-2 mu s)``.
"""
from __future__ import annotations

import functools
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import flint
import numpy as np

from hyldot import _extended as ext
from hyldot.basis import BasisSet, base_integrals, generate_terms
from hyldot.errors import IllConditionedOverlap

log = logging.getLogger(__name__)

PRECISIONS = ("double", "extended")


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the model Hamiltonian.

    Attributes
    ----------
    trap : bool
        Whether the ``r^2/2`` confinement acts on each electron.
    z : float
        Coefficient of ``1/r_i`` (``eta*gamma`` in the dot model).
    lambda_ee : float
        Coefficient of ``1/r12`` (``gamma`` in the dot model).
    """

    trap: bool
    z: float
    lambda_ee: float

    def __post_init__(self):
        if self.lambda_ee < 0:
            raise ValueError("lambda_ee must be non-negative")

    @classmethod
    def scaled_dot(cls, eta: float, gamma: float) -> "ModelParams":
        if gamma < 0:
            raise ValueError("gamma must be non-negative")
        return cls(True, float(eta) * float(gamma), float(gamma))

    @classmethod
    def free_space(cls, charge: float = -2.0) -> "ModelParams":
        return cls(False, float(charge), 1.0)


def _pair_exponents(basis: BasisSet):
    e = basis.exponents
    n, m, p = (e[:, k] for k in range(3))
    ni, nj = np.meshgrid(n, n, indexing="ij")
    mi, mj = np.meshgrid(m, m, indexing="ij")
    pi, pj = np.meshgrid(p, p, indexing="ij")
    return ni, nj, mi, mj, pi, pj


def _forms(integral, ni, nj, mi, mj, pi, pj, mu, which):
    """Raw bilinear forms (without the 2 pi^2 prefactor).

    ``integral(a, b, c)`` is ``I(a, b, c; 2 mu)`` with ``b`` the ``u`` and
    ``c`` the ``t`` exponent; it must return 0 for negative exponents.
    Works elementwise on integer arrays or on Python ints with arb ``mu``.
    """
    N, M, P = ni + nj, mi + mj, pi + pj

    def W(ds, du, dt):
        # measure weight u (s^2 - t^2)
        return integral(N + 2 + ds, P + 1 + du, M + dt) - integral(N + ds, P + 1 + du, M + 2 + dt)

    out = {}
    s0 = W(0, 0, 0)
    if "overlap" in which:
        out["overlap"] = s0
    if "kinetic" in which:
        # u (s^2 - t^2)(psi_s^2 + psi_t^2 + psi_u^2) with psi_s = (n/s - mu) psi etc.
        diag = (
            ni * nj * W(-2, 0, 0)
            - mu * (ni + nj) * W(-1, 0, 0)
            + mu * mu * s0
            + mi * mj * W(0, 0, -2)
            + pi * pj * W(0, -2, 0)
        )
        # 2 s (u^2 - t^2) psi_s psi_u, symmetrized
        x0 = integral(N, P + 1, M) - integral(N, P - 1, M + 2)
        x1 = integral(N + 1, P + 1, M) - integral(N + 1, P - 1, M + 2)
        su = (ni * pj + nj * pi) * x0 - mu * (pi + pj) * x1
        # 2 t (s^2 - u^2) psi_t psi_u, symmetrized
        tu = (mi * pj + mj * pi) * (integral(N + 2, P - 1, M) - integral(N, P + 1, M))
        out["kinetic"] = diag + su + tu
    if "trap" in which:
        out["trap"] = (integral(N + 4, P + 1, M) - integral(N, P + 1, M + 4)) / 4
    if "impurity" in which:
        out["impurity"] = 4 * integral(N + 1, P + 1, M)
    if "interaction" in which:
        out["interaction"] = integral(N + 2, P, M) - integral(N, P, M + 2)
    if "radius" in which:
        # (r1 + r2) / 2 = s / 2
        out["radius"] = W(1, 0, 0) / 2
    return out


def _raw_double(basis: BasisSet, which) -> dict[str, np.ndarray]:
    beta = 2.0 * basis.mu
    forms = _forms(
        lambda a, b, c: base_integrals(a, b, c, beta),
        *_pair_exponents(basis),
        basis.mu,
        which,
    )
    pref = 2.0 * np.pi**2
    return {k: pref * v for k, v in forms.items()}


def _raw_extended(basis: BasisSet, which, dps: int) -> dict[str, np.ndarray]:
    with ext.working_dps(dps):
        mu = flint.arb(basis.mu)
        beta = 2 * mu
        zero = flint.arb(0)
        cache: dict[tuple[int, int, int], flint.arb] = {}

        def integral(a, b, c):
            if a < 0 or b < 0 or c < 0:
                return zero
            key = (a, b, c)
            val = cache.get(key)
            if val is None:
                k = a + b + c + 2
                val = flint.arb.fac_ui(k) / ((c + 1) * (b + c + 2)) / beta ** (k + 1)
                cache[key] = val
            return val

        e = [tuple(int(x) for x in row) for row in basis.exponents]
        n = len(e)
        pref = 2 * flint.arb.pi() ** 2
        out = {k: np.empty((n, n), dtype=object) for k in which}
        for i in range(n):
            ni, mi, pi = e[i]
            for j in range(i, n):
                nj, mj, pj = e[j]
                vals = _forms(integral, ni, nj, mi, mj, pi, pj, mu, which)
                for k, v in vals.items():
                    out[k][i, j] = out[k][j, i] = pref * v
    return out


def raw_norms(basis: BasisSet) -> np.ndarray:
    """``sqrt(<phi_k|phi_k>)`` of the un-normalized basis functions."""
    e = basis.exponents
    n, m, p = 2 * e[:, 0], 2 * e[:, 1], 2 * e[:, 2]
    beta = 2.0 * basis.mu
    w = base_integrals(n + 2, p + 1, m, beta) - base_integrals(n, p + 1, m + 2, beta)
    return np.sqrt(2.0 * np.pi**2 * w)


def _normalized(mats, precision: str, dps: int = ext.EXTENDED_DPS):
    s = mats["overlap"]
    if precision == "double":
        d = 1.0 / np.sqrt(np.diag(s))
        return {k: v * np.outer(d, d) for k, v in mats.items()}
    with ext.working_dps(dps):
        d = np.array([1 / s[i, i].sqrt() for i in range(s.shape[0])], dtype=object)
        scale = np.outer(d, d)
        return {k: v * scale for k, v in mats.items()}


def _check_precision(precision: str) -> None:
    if precision not in PRECISIONS:
        raise ValueError(f"precision must be one of {PRECISIONS}, got {precision!r}")


def _blocks(basis: BasisSet, which, precision: str = "double", dps: int = ext.EXTENDED_DPS):
    _check_precision(precision)
    which = tuple(which) + ("overlap",)
    raw = _raw_double(basis, which) if precision == "double" else _raw_extended(basis, which, dps)
    return _normalized(raw, precision, dps)


def overlap(basis: BasisSet, precision: str = "double") -> np.ndarray:
    """Overlap matrix in the unit-diagonal convention (see :func:`raw_norms`)."""
    return _blocks(basis, (), precision)["overlap"]


def kinetic(basis: BasisSet, precision: str = "double") -> np.ndarray:
    return _blocks(basis, ("kinetic",), precision)["kinetic"]


def potential_matrices(basis: BasisSet, params: ModelParams, precision: str = "double"):
    """``(V_trap, V_imp, V_ee)`` in the normalized basis.

    ``V_imp`` and ``V_ee`` already carry ``params.z`` and
    ``params.lambda_ee``; ``V_trap`` is the bare ``(r1^2 + r2^2)/2``.
    """
    b = _blocks(basis, ("trap", "impurity", "interaction"), precision)
    if precision == "double":
        return b["trap"], params.z * b["impurity"], params.lambda_ee * b["interaction"]
    with ext.working_dps(ext.EXTENDED_DPS):
        z, lam = flint.arb(params.z), flint.arb(params.lambda_ee)
        return b["trap"], z * b["impurity"], lam * b["interaction"]


def radius_matrix(basis: BasisSet) -> np.ndarray:
    """Normalized matrix of the mean electron radius ``(r1 + r2)/2``."""
    return _blocks(basis, ("radius",))["radius"]


@dataclass(frozen=True)
class HamiltonianPair:
    """Generalized eigenproblem ``H c = E S c`` in the normalized basis."""

    H: np.ndarray
    S: np.ndarray
    params: ModelParams
    basis: BasisSet
    norms: np.ndarray


def assemble(
    basis: BasisSet, params: ModelParams, precision: str = "double", dps: int = ext.CHOLESKY_DPS
) -> HamiltonianPair:
    """Normalized ``(H, S)``; ``dps`` is the working precision of extended assembly."""
    b = _blocks(basis, ("kinetic", "trap", "impurity", "interaction"), precision, dps)
    if precision == "double":
        h = _combine(b, params.z, params.lambda_ee, params.trap)
    else:
        # the combination must run at the assembly precision, not the default
        with ext.working_dps(dps):
            h = _combine(b, flint.arb(params.z), flint.arb(params.lambda_ee), params.trap)
    return HamiltonianPair(h, b["overlap"], params, basis, raw_norms(basis))


def _combine(b, z, lam, trap: bool):
    h = b["kinetic"] + z * b["impurity"] + lam * b["interaction"]
    return h + b["trap"] if trap else h


# --- reduced operators ------------------------------------------------------
#
# In the unit-diagonal convention the overlap matrix does not depend on mu,
# and the remaining operators scale as mu^2 (kinetic), mu (Coulomb) and
# mu^-2 (trap).  Reducing them once with an extended-precision Cholesky
# factor of the overlap gives well-conditioned mu-independent matrices.

_CACHE_VERSION = 1
_OPERATORS = ("kinetic", "trap", "impurity", "interaction")


@dataclass(frozen=True)
class ReducedOperators:
    """Unit-``mu`` operators in the overlap-orthonormalized basis.

    ``chol`` is the double-rounded lower Cholesky factor of the
    normalized overlap matrix; coefficients in the normalized basis follow
    from ``chol.T @ c = y``.
    """

    omega: int
    parity: str
    kinetic: np.ndarray
    trap: np.ndarray
    impurity: np.ndarray
    interaction: np.ndarray
    chol: np.ndarray
    condition: float

    def hamiltonian(self, mu: float, params: ModelParams) -> np.ndarray:
        a = mu * mu * self.kinetic + mu * (params.z * self.impurity + params.lambda_ee * self.interaction)
        if params.trap:
            a = a + self.trap / (mu * mu)
        return a


def cache_dir() -> Path:
    env = os.environ.get("HYLDOT_CACHE_DIR")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "hyldot"


def _cache_path(omega: int, parity: str) -> Path:
    return cache_dir() / f"reduced-v{_CACHE_VERSION}-omega{omega}-{parity}.npz"


def _compute_reduced(omega: int, parity: str) -> ReducedOperators:
    basis = BasisSet(omega, parity, 1.0)
    dps = ext.CHOLESKY_DPS
    while True:
        mats = _blocks(basis, _OPERATORS, "extended", dps)
        try:
            chol = ext.cholesky(mats["overlap"], dps)
            break
        except ext.NotPositiveDefinite as exc:
            if exc.certain or dps >= ext.MAX_DPS:
                raise IllConditionedOverlap(exc.pivot, float("inf")) from None
            dps *= 2
    with ext.working_dps(ext.EXTENDED_DPS):
        lf = ext.to_arb_mat(chol)
        n = lf.nrows()
        linv = lf.solve(flint.arb_mat(n, n, [int(i == j) for i in range(n) for j in range(n)]), algorithm="approx")
        linv_t = linv.transpose()
        reduced = {}
        for name in _OPERATORS:
            r = ext.to_float(ext.from_arb_mat(linv * ext.to_arb_mat(mats[name]) * linv_t))
            reduced[name] = 0.5 * (r + r.T)
        linv_d = ext.to_float(ext.from_arb_mat(linv))
    chol_d = ext.to_float(chol)
    condition = float(np.linalg.norm(chol_d, 2) * np.linalg.norm(linv_d, 2)) ** 2
    return ReducedOperators(omega, parity, chol=chol_d, condition=condition, **reduced)


def _save(ops: ReducedOperators, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".npz.tmp")
    os.close(fd)
    try:
        with open(tmp, "wb") as fh:
            np.savez(
                fh,
                omega=ops.omega,
                parity=ops.parity,
                condition=ops.condition,
                chol=ops.chol,
                **{k: getattr(ops, k) for k in _OPERATORS},
            )
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _load(path: Path) -> ReducedOperators:
    with np.load(path) as data:
        return ReducedOperators(
            int(data["omega"]),
            str(data["parity"]),
            condition=float(data["condition"]),
            chol=data["chol"],
            **{k: data[k] for k in _OPERATORS},
        )


@functools.lru_cache(maxsize=None)
def reduced_operators(omega: int, parity: str) -> ReducedOperators:
    """Reduced operators for ``(omega, parity)``, memoized in memory and on disk.

    Set ``HYLDOT_CACHE_DIR`` to relocate the on-disk cache.
    """
    path = _cache_path(omega, parity)
    if path.exists():
        try:
            return _load(path)
        except (OSError, KeyError, ValueError):
            log.warning("ignoring unreadable operator cache %s", path)
    ops = _compute_reduced(omega, parity)
    try:
        _save(ops, path)
    except OSError as exc:
        log.warning("could not write operator cache %s: %s", path, exc)
    return ops

