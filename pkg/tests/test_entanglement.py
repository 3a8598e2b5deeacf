import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyldot.basis import BasisSet
from hyldot.eigensolvers import solve_state
from hyldot.entanglement import (
    OCCUPANCY_FLOOR,
    TABLE_COLUMNS,
    convergence_table,
    degeneracy,
    entropy_report,
    entropy_singlet,
    entropy_triplet,
    linear_entropy,
    occupancies,
    pairing_defect,
    spectrum,
    spectrum_from_lists,
    table_to_csv,
)
from hyldot.errors import ContractViolation, PairingDefect
from hyldot.matrix_elements import ModelParams
from hyldot.wavefunction import PartialWaveKernel, RadialGrid, kernel_matrices


def singlet(*per_l):
    return spectrum_from_lists("even", per_l)


def triplet(*per_l):
    return spectrum_from_lists("odd", per_l)


def test_degeneracy():
    assert [degeneracy(l, "even") for l in range(3)] == [1, 3, 5]
    assert [degeneracy(l, "odd") for l in range(3)] == [2, 6, 10]


def test_singlet_entropy_examples():
    assert entropy_singlet(singlet([1.0])) == 0.0
    assert entropy_singlet(singlet([0.5, 0.5])) == pytest.approx(1.0, abs=1e-15)
    assert linear_entropy(singlet([1.0])) == 0.0
    assert linear_entropy(singlet([0.5, 0.5])) == pytest.approx(0.5)


def test_triplet_entropy_examples():
    half = triplet([0.5])
    assert entropy_triplet(half, 1) == 0.0
    assert entropy_triplet(half, -1) == 0.0
    assert entropy_triplet(half, 0) == 1.0
    assert entropy_triplet(triplet([0.25, 0.25]), 1) == pytest.approx(1.0, abs=1e-15)


def test_degenerate_shells_weighted():
    # a filled p shell: three equal occupancies of 1/3
    spec = singlet([], [1.0 / 3.0])
    assert entropy_singlet(spec) == pytest.approx(math.log2(3.0), rel=1e-14)
    assert spec.truncation_defect == pytest.approx(0.0, abs=1e-15)


def test_parity_contracts():
    with pytest.raises(ContractViolation):
        entropy_singlet(triplet([0.5]))
    with pytest.raises(ContractViolation):
        entropy_triplet(singlet([1.0]))
    with pytest.raises(ContractViolation):
        linear_entropy(triplet([0.5]))
    with pytest.raises(ContractViolation):
        entropy_triplet(triplet([0.5]), 2)
    with pytest.raises(ContractViolation):
        spectrum_from_lists("even", [[-0.1]])


def test_floor_drops_noise_into_defect():
    spec = singlet([0.9, 0.1 - 1e-13, 1e-13])
    assert len(spec.per_l[0]) == 2
    assert spec.truncation_defect == pytest.approx(1e-13, rel=1e-3)
    assert OCCUPANCY_FLOOR == 1e-12


def _log_sum_entropy(per_l, parity):
    # independent path: materialize every degenerate copy, natural log, convert
    lam = np.concatenate([np.repeat(np.asarray(v), degeneracy(l, parity)) for l, v in enumerate(per_l)])
    lam = lam[lam > 0]
    return float(-(lam * np.log(lam)).sum() / np.log(2.0))


def test_singlet_entropy_log_sum_oracle(helium10):
    report = entropy_report(helium10, 7.5, 150, l_max=3)
    oracle = _log_sum_entropy(report.spectrum.per_l, "even")
    assert report.S_vN == pytest.approx(oracle, rel=1e-12)
    assert 0.0 < report.L < report.S_vN


def test_triplet_entropy_log_sum_oracle(dot_triplet):
    report = entropy_report(dot_triplet, 6.0, 150, l_max=3)
    oracle = -1.0 + _log_sum_entropy(report.spectrum.per_l, "odd")
    assert report.S_vN == pytest.approx(oracle, rel=1e-10)


occ_lists = st.lists(
    st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=6), min_size=1, max_size=4
)


@settings(max_examples=80)
@given(occ_lists)
def test_triplet_sz_offset_is_exact(per_l):
    spec = triplet(*per_l)
    assert entropy_triplet(spec, 0) - entropy_triplet(spec, 1) == 1.0


@settings(max_examples=80)
@given(occ_lists)
def test_normalized_singlet_bounds(per_l):
    total = sum(degeneracy(l, "even") * sum(v) for l, v in enumerate(per_l))
    if total < 1e-6:
        return
    spec = singlet(*[[x / total for x in v] for v in per_l])
    s, lin = entropy_singlet(spec), linear_entropy(spec)
    assert s >= -1e-12
    assert -1e-12 <= lin < 1.0
    # linear entropy never exceeds the natural-log von Neumann entropy
    assert lin <= s * math.log(2.0) + 1e-12


def test_product_state_has_a_single_occupancy():
    # exp(-2 s) is the exact noninteracting ground state for z = -2 without a trap
    state = solve_state(BasisSet(4, "even", 2.0), ModelParams(False, -2.0, 0.0))
    assert state.energy == pytest.approx(-4.0, abs=1e-12)
    report = entropy_report(state, 7.5, 300, l_max=2)
    per_l = report.spectrum.per_l
    assert per_l[0][0] == pytest.approx(1.0, abs=1e-6)
    assert all(v <= 1e-6 for lam in per_l for v in lam[1:] if len(lam)) and not len(per_l[1])
    assert report.S_vN <= 1e-5
    assert report.L <= 1e-5


def test_sum_rules_and_pairing(dot_singlet, dot_triplet):
    grid = RadialGrid(6.0, 200)
    singlet_spec = spectrum(kernel_matrices(dot_singlet, 4, grid))
    assert singlet_spec.truncation_defect <= 1e-3
    odd = kernel_matrices(dot_triplet, 4, grid)
    triplet_spec = spectrum(odd)
    assert triplet_spec.truncation_defect <= 1e-3
    assert 2 * sum((2 * l + 1) * lam.sum() for l, lam in enumerate(triplet_spec.per_l)) == pytest.approx(1.0, abs=1e-3)
    assert max(pairing_defect(k) for k in odd) <= 1e-8


def test_l_tail_decreasing(dot_singlet, dot_triplet):
    for state in (dot_singlet, dot_triplet):
        mass = entropy_report(state, 6.0, 150, l_max=5).spectrum.l_mass()
        assert (np.diff(mass) < 0).all()
        assert mass[5:].sum() < 1e-4


def test_unpaired_kernel_raises():
    grid = RadialGrid(1.0, 3)
    m = np.zeros((4, 4))
    m[1, 2], m[2, 1] = 0.3, -0.3
    kernel = PartialWaveKernel(0, "odd", m, grid)
    assert occupancies(kernel)[0] == pytest.approx((4 * math.pi * 0.3) ** 2)
    bad = m.copy()
    bad[3, 3] = 0.1
    with pytest.raises(ContractViolation):
        occupancies(PartialWaveKernel(0, "odd", bad, grid))
    skew = np.zeros((4, 4))
    skew[1, 2], skew[2, 1] = 0.3, -0.29
    with pytest.raises(ContractViolation):
        occupancies(PartialWaveKernel(0, "odd", skew, grid))


def test_pairing_defect_detects_split_singular_values():
    grid = RadialGrid(1.0, 3)
    m = np.zeros((4, 4))
    m[0, 1], m[2, 3] = 1.0, 0.5
    kernel = PartialWaveKernel(0, "odd", m, grid)
    assert pairing_defect(kernel) == pytest.approx(0.5)
    # exact antisymmetry forces pairing; noise inside the antisymmetry
    # tolerance can still split a pair beyond a tight pairing tolerance
    noisy = m - m.T
    noisy[0, 1] += 5e-13
    with pytest.raises(PairingDefect):
        occupancies(PartialWaveKernel(0, "odd", noisy, grid), pairing_tol=1e-14)


def test_even_occupancies_use_signed_eigenvalues():
    grid = RadialGrid(1.0, 1)
    m = np.diag([0.2, -0.1])
    lam = occupancies(PartialWaveKernel(1, "even", m, grid))
    expected = sorted([(4 * math.pi * 0.2 / 3) ** 2, (4 * math.pi * 0.1 / 3) ** 2], reverse=True)
    assert np.allclose(lam, expected, rtol=1e-14)


def test_convergence_table(helium10):
    rows = convergence_table(helium10, 7.5, [0, 1], [50, 100, 200])
    assert [(r["l_max"], r["n_max"]) for r in rows] == [(0, 50), (0, 100), (0, 200), (1, 50), (1, 100), (1, 200)]
    for l_max in (0, 1):
        row = [r["L_ap"] for r in rows if r["l_max"] == l_max]
        assert row == sorted(row, reverse=True)
    # adding a partial wave can only lower L at fixed grid
    assert all(a["L_ap"] >= b["L_ap"] for a, b in zip(rows[:3], rows[3:]))


def test_single_cell_table_is_linear_entropy(helium10):
    (row,) = convergence_table(helium10, 7.5, [1], [80])
    assert row["L_ap"] == linear_entropy(spectrum(kernel_matrices(helium10, 1, RadialGrid(7.5, 80))))


def test_convergence_table_csv(helium10):
    rows = convergence_table(helium10, 7.5, [0], [40, 60])
    lines = table_to_csv(rows).splitlines()
    assert lines[0] == ",".join(TABLE_COLUMNS)
    assert len(lines) == 3
    assert float(lines[1].split(",")[-1]) == rows[0]["L_ap"]
    with pytest.raises(ContractViolation):
        convergence_table(solve_state(BasisSet(4, "odd", 1.0), ModelParams.scaled_dot(0.0, 1.0)), 5.0, [0], [10])
