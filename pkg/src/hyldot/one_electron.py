"""One electron in the trap plus impurity, and the ionization threshold.

The radial equation for ``u(r) = r R(r)`` with ``l = 0``,

    -u''/2 + (trap * r**2 / 2 + z / r) u = E u,   u(0) = u(r_max) = 0,

is discretized by three-point finite differences.  Two grids ``h`` and
``h/2`` are Richardson-combined to cancel the leading ``h**2`` error.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from hyldot.eigensolvers import tridiag_eig
from hyldot.errors import BracketError, ResolutionError

log = logging.getLogger(__name__)

# kinetic-energy floor of the detached electron in the trap
ZERO_POINT = 1.5


@dataclass(frozen=True)
class RadialProblem:
    """s-wave radial problem; ``n_points`` interior nodes on ``(0, r_max)``."""

    z: float
    trap: bool = True
    r_max: float | None = None
    n_points: int = 1000
    l: int = 0

    def __post_init__(self):
        if self.l != 0:
            raise ValueError("only the l = 0 channel is supported")
        if self.n_points < 10:
            raise ValueError("n_points must be at least 10")
        if self.r_max is not None and not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if not self.trap and self.z >= 0:
            raise ValueError("without the trap a bound state needs z < 0")

    @property
    def default_r_max(self) -> float:
        """Four times the confining length: the oscillator length in the
        trap, the Coulomb length ``1/|z|`` without it.

        In the trap a weak impurity would otherwise inflate the box far
        beyond the density; box doubling covers repulsive shells.
        """
        return 4.0 if self.trap else 4.0 / abs(self.z)


def fd_energy(problem: RadialProblem, r_max: float, n_points: int) -> float:
    """Lowest eigenvalue of the finite-difference matrix on one grid."""
    h = r_max / (n_points + 1)
    r = h * np.arange(1, n_points + 1)
    potential = problem.z / r
    if problem.trap:
        potential = potential + 0.5 * r * r
    diagonal = 1.0 / (h * h) + potential
    off = np.full(n_points - 1, -0.5 / (h * h))
    w, _ = tridiag_eig(diagonal, off, 1)
    return float(w[0])


def _richardson(problem: RadialProblem, r_max: float, n_points: int) -> tuple[float, float]:
    coarse = fd_energy(problem, r_max, n_points)
    # h/2 requires 2(n+1) - 1 interior nodes
    fine = fd_energy(problem, r_max, 2 * n_points + 1)
    return (4.0 * fine - coarse) / 3.0, abs(fine - coarse)


def _refined(problem: RadialProblem, r_max: float, n_points: int, tol: float, max_refine: int):
    """Richardson value, halving the spacing until the two grids agree to ``tol``."""
    for _ in range(max_refine + 1):
        energy, gap = _richardson(problem, r_max, n_points)
        if gap <= tol:
            return energy, n_points
        n_points = 2 * n_points + 1
    raise ResolutionError(f"grids h and h/2 still differ by {gap:.2e} > {tol:g} at {n_points} points")


def ground_energy_1e(
    problem: RadialProblem,
    tol: float = 1e-4,
    r_tol: float = 1e-8,
    max_doublings: int = 8,
    max_refine: int = 4,
) -> float:
    """Richardson-extrapolated ground-state energy.

    The mesh is refined (at most ``max_refine`` halvings) until the ``h``
    and ``h/2`` energies agree to ``tol``.  Without an explicit ``r_max``
    the box is then doubled at fixed spacing until the energy changes by
    less than ``r_tol``.

    Raises
    ------
    ResolutionError
        If either refinement fails to converge.
    """
    r_max = problem.default_r_max if problem.r_max is None else problem.r_max
    energy, n = _refined(problem, r_max, problem.n_points, tol, max_refine)
    if problem.r_max is not None:
        return energy
    for _ in range(max_doublings):
        r_max *= 2.0
        n = 2 * n + 1
        new, _ = _richardson(problem, r_max, n)
        if abs(new - energy) < r_tol:
            return new
        energy = new
    raise ResolutionError(f"box size did not converge (r_max={r_max:g})")


@dataclass(frozen=True)
class ThresholdResult:
    gamma_c: float
    bracket: tuple[float, float]
    g_bracket: tuple[float, float]
    iterations: int
    tol: float


def ionization_threshold(
    eta: float,
    two_electron_energy: Callable[[float], float],
    bracket: tuple[float, float] = (0.1, 5.0),
    tol: float = 1e-4,
    zero_point: bool = False,
    one_electron_energy: Callable[[float], float] | None = None,
) -> ThresholdResult:
    """Bisect ``g(gamma) = E_2e(gamma) - E_1e(gamma)`` for its sign change.

    ``two_electron_energy`` maps ``gamma`` to the two-electron ground-state
    energy at fixed ``eta``.  The one-electron energy defaults to the trap
    problem with ``z = eta * gamma``; ``zero_point=True`` adds the 3/2
    oscillator energy of the detached electron.

    Raises
    ------
    BracketError
        If ``g`` has the same sign at both ends of ``bracket``.
    """
    if one_electron_energy is None:
        def one_electron_energy(gamma: float) -> float:
            return ground_energy_1e(RadialProblem(eta * gamma, trap=True))

    offset = ZERO_POINT if zero_point else 0.0

    def g(gamma: float) -> float:
        return two_electron_energy(gamma) - one_electron_energy(gamma) - offset

    a, b = map(float, bracket)
    ga, gb = g(a), g(b)
    if ga == 0.0:
        return ThresholdResult(a, (a, a), (ga, ga), 0, tol)
    if gb == 0.0:
        return ThresholdResult(b, (b, b), (gb, gb), 0, tol)
    if (ga > 0) == (gb > 0):
        raise BracketError(f"g has no sign change on [{a:g}, {b:g}]: g = {ga:.4g}, {gb:.4g}")
    iterations = 0
    while b - a > tol:
        mid = 0.5 * (a + b)
        gm = g(mid)
        iterations += 1
        log.debug("bisection gamma=%.8f g=%.3e", mid, gm)
        if gm == 0.0:
            a = b = mid
            ga = gb = gm
            break
        if (gm > 0) == (ga > 0):
            a, ga = mid, gm
        else:
            b, gb = mid, gm
    return ThresholdResult(0.5 * (a + b), (a, b), (ga, gb), iterations, tol)
