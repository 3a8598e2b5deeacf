"""Natural occupancies and entanglement entropies from partial-wave kernels.

Even (singlet) kernels are symmetric; their signed eigenvalues ``k`` give
occupancies ``(4 pi k / (2l+1))**2``, each ``(2l+1)``-fold degenerate.
Odd (triplet) kernels are antisymmetric; their singular values come in
equal pairs and each pair yields one occupancy, ``2(2l+1)``-fold degenerate.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from hyldot.eigensolvers import VariationalState, svd, sym_eig
from hyldot.errors import ContractViolation, PairingDefect
from hyldot.wavefunction import DEFAULT_QUAD, PartialWaveKernel, RadialGrid, kernel_matrices

OCCUPANCY_FLOOR = 1e-12
PAIRING_TOL = 1e-8


def degeneracy(l: int, parity: str) -> int:
    return (2 * l + 1) * (1 if parity == "even" else 2)


def occupancies(kernel: PartialWaveKernel, pairing_tol: float = PAIRING_TOL) -> np.ndarray:
    """Descending occupancies ``lambda_nl`` for one partial wave.

    Raises
    ------
    PairingDefect
        If the singular values of an odd kernel do not pair up to
        ``pairing_tol`` times the largest one.
    """
    l = kernel.l
    if kernel.parity == "even":
        k, _ = sym_eig(kernel.M)
    else:
        if kernel.symmetry_defect() > 1e-12 * max(np.abs(kernel.M).max(), 1e-300):
            raise ContractViolation("odd-parity kernel is not antisymmetric")
        sigma, _, _ = svd(kernel.M)
        n_pairs = len(sigma) // 2
        defect = np.abs(sigma[0:2 * n_pairs:2] - sigma[1:2 * n_pairs:2])
        scale = max(sigma[0], 1e-300)
        if defect.size and defect.max() > pairing_tol * scale:
            raise PairingDefect(
                f"l={l}: singular values unpaired by {defect.max() / scale:.2e} (relative)"
            )
        k = 0.5 * (sigma[0:2 * n_pairs:2] + sigma[1:2 * n_pairs:2])
    lam = (4.0 * math.pi * np.asarray(k) / (2 * l + 1)) ** 2
    return np.sort(lam)[::-1]


def pairing_defect(kernel: PartialWaveKernel) -> float:
    """Largest relative mismatch between paired singular values of an odd kernel."""
    sigma, _, _ = svd(kernel.M)
    n_pairs = len(sigma) // 2
    if not n_pairs:
        return 0.0
    return float(np.abs(sigma[0:2 * n_pairs:2] - sigma[1:2 * n_pairs:2]).max() / max(sigma[0], 1e-300))


@dataclass(frozen=True)
class OccupancySpectrum:
    """Retained occupancies per ``l`` plus the sum-rule defect.

    ``per_l[l]`` is descending and excludes values below the floor; the
    dropped mass is part of ``truncation_defect = |1 - sum g_l lambda|``.
    """

    parity: str
    per_l: tuple[np.ndarray, ...]
    truncation_defect: float

    def weighted(self) -> Iterable[tuple[int, float]]:
        """``(g_l, lambda)`` pairs over all retained occupancies."""
        for l, lam in enumerate(self.per_l):
            g = degeneracy(l, self.parity)
            for v in lam:
                yield g, float(v)

    def l_mass(self) -> np.ndarray:
        """Degeneracy-weighted occupancy mass per ``l``."""
        return np.array([degeneracy(l, self.parity) * lam.sum() for l, lam in enumerate(self.per_l)])


def spectrum_from_lists(parity: str, per_l: Sequence, floor: float = OCCUPANCY_FLOOR) -> OccupancySpectrum:
    """Build a spectrum from raw per-``l`` occupancy lists."""
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    kept = []
    total = 0.0
    for lam in per_l:
        lam = np.sort(np.asarray(lam, dtype=float))[::-1]
        if (lam < -floor).any():
            raise ContractViolation("occupancies must be non-negative")
        kept.append(lam[lam >= floor])
    total = sum(degeneracy(l, parity) * lam.sum() for l, lam in enumerate(kept))
    return OccupancySpectrum(parity, tuple(kept), float(abs(1.0 - total)))


def spectrum(kernels: Sequence[PartialWaveKernel], floor: float = OCCUPANCY_FLOOR) -> OccupancySpectrum:
    """Occupancy spectrum over ``l = 0..l_max`` from kernels ordered by ``l``."""
    if not kernels:
        raise ContractViolation("need at least one kernel")
    parity = kernels[0].parity
    if any(k.parity != parity for k in kernels) or [k.l for k in kernels] != list(range(len(kernels))):
        raise ContractViolation("kernels must share a parity and be ordered l = 0, 1, ...")
    return spectrum_from_lists(parity, [occupancies(k) for k in kernels], floor)


def _xlog2x(g: float, lam: float) -> float:
    return g * lam * math.log2(lam) if lam > 0 else 0.0


def entropy_singlet(spec: OccupancySpectrum) -> float:
    """``S_S = -sum (2l+1) lambda log2 lambda`` in bits."""
    if spec.parity != "even":
        raise ContractViolation("singlet entropy needs an even-parity spectrum")
    return -math.fsum(_xlog2x(g, lam) for g, lam in spec.weighted()) + 0.0


def entropy_triplet(spec: OccupancySpectrum, s_z: int = 1) -> float:
    """``S_T = -1 - 2 sum (2l+1) lambda log2 lambda`` for ``s_z = +-1``; one more for ``s_z = 0``."""
    if spec.parity != "odd":
        raise ContractViolation("triplet entropy needs an odd-parity spectrum")
    if s_z not in (-1, 0, 1):
        raise ContractViolation("s_z must be -1, 0 or 1")
    # weighted() already carries the factor 2 in the odd degeneracy
    value = -1.0 - math.fsum(_xlog2x(g, lam) for g, lam in spec.weighted())
    return value + 1.0 if s_z == 0 else value


def linear_entropy(spec: OccupancySpectrum) -> float:
    """``L = 1 - sum (2l+1) lambda**2`` over retained occupancies."""
    if spec.parity != "even":
        raise ContractViolation("linear entropy is defined here for singlet spectra")
    return 1.0 - math.fsum(g * lam * lam for g, lam in spec.weighted())


@dataclass(frozen=True)
class EntropyReport:
    """Entropies of one state together with the resolution that produced them."""

    state: str
    s_z: int | None
    S_vN: float
    L: float | None
    spectrum: OccupancySpectrum
    l_max: int
    n_max: int
    R: float
    Q: int
    extras: dict = field(default_factory=dict, compare=False)


def entropy_report(
    state: VariationalState,
    R: float,
    n_max: int,
    l_max: int = 4,
    quad_order: int = DEFAULT_QUAD,
    s_z: int = 1,
) -> EntropyReport:
    """Full chain from a variational state to its entropies."""
    kernels = kernel_matrices(state, l_max, RadialGrid(R, n_max), quad_order)
    spec = spectrum(kernels)
    if state.parity == "even":
        return EntropyReport("singlet", None, entropy_singlet(spec), linear_entropy(spec), spec, l_max, n_max, R, quad_order)
    return EntropyReport("triplet", s_z, entropy_triplet(spec, s_z), None, spec, l_max, n_max, R, quad_order)


TABLE_COLUMNS = ("l_max", "n_max", "R", "Q", "L_ap")


def convergence_table(
    state: VariationalState,
    R: float,
    l_max_list: Sequence[int],
    n_max_list: Sequence[int],
    quad_order: int = DEFAULT_QUAD,
) -> list[dict]:
    """Linear entropy on a grid of ``(l_max, n_max)``; one row per cell.

    Kernels are computed once per ``n_max`` at the largest ``l_max``;
    smaller ``l_max`` values reuse the leading partial waves.
    """
    if state.parity != "even":
        raise ContractViolation("convergence table needs a singlet state")
    top = max(l_max_list)
    per_n = {}
    for n_max in n_max_list:
        kernels = kernel_matrices(state, top, RadialGrid(R, n_max), quad_order)
        per_n[n_max] = [occupancies(k) for k in kernels]
    rows = []
    for l_max in l_max_list:
        for n_max in n_max_list:
            spec = spectrum_from_lists("even", per_n[n_max][: l_max + 1])
            rows.append(dict(l_max=l_max, n_max=n_max, R=R, Q=quad_order, L_ap=linear_entropy(spec)))
    return rows


def table_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
