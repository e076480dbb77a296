"""
Tests for exact propagation, two-qubit entanglement and the master equation.
"""
import numpy as np
import pytest

from physics.dynamics import (
    PureState,
    SectorState,
    TwoQubitState,
    assemble_hamiltonian,
    bell_amplitudes,
    bell_state,
    bright_sign,
    calibrate_gamma0,
    collective_decomposition,
    concurrence,
    dark_sign,
    dicke_evolution,
    directional_fraction,
    evolve_exact,
    evolve_master,
    evolve_spectral,
    field_snapshot,
    reduced_two_qubit,
    single_excitation_concurrence,
)
from physics.errors import LatticeDomainError, StepSizeError
from physics.lattice import LatticeSpec, Orientation, Site, enumerate_modes
from physics.rates import AtomSet, RateMatrix, steady_rates

SQUARE = enumerate_modes(LatticeSpec(49, 49))
ATOM1 = (25, 20)
PAIR_A = (20, 25)
PAIR_B = (25, 30)
PAIR_C = (40, 25)


def run_pair(site, sign, T=200.0, table=SQUARE, lam=0.05):
    atoms = AtomSet.from_pairs([ATOM1, site], lam=lam)
    H = assemble_hamiltonian(table, atoms)
    psi0 = bell_state(2, (0, 1), sign, n_modes=len(table))
    return evolve_exact(H, psi0, dt=0.01, T=T, stride=int(round(T / 0.01)))[-1]


def pair_concurrence(state):
    return concurrence(reduced_two_qubit(state, (0, 1)))


# ============== Exact propagation ==============

def test_assemble_hamiltonian_blocks():
    table = enumerate_modes(LatticeSpec(4, 5))
    atoms = AtomSet.from_pairs([(1, 2), (3, 4)], omega=0.3, lam=0.1)
    H = assemble_hamiltonian(table, atoms)
    dense = H.to_dense()
    assert dense.shape == (22, 22)
    np.testing.assert_allclose(dense, dense.T, atol=0)
    np.testing.assert_allclose(np.diag(dense)[:2], 0.3)
    np.testing.assert_allclose(np.diag(dense)[2:], table.omega)
    np.testing.assert_allclose(dense[:2, 2:], 0.1 * table.profiles(atoms.positions))
    vec = np.random.default_rng(1).normal(size=22) + 0j
    np.testing.assert_allclose(H.apply(vec), dense @ vec, atol=1e-13)


def test_zero_coupling_keeps_atoms_frozen():
    table = enumerate_modes(LatticeSpec(5, 5))
    atoms = AtomSet.from_pairs([(2, 2), (4, 3)], lam=0.0)
    H = assemble_hamiltonian(table, atoms)
    psi0 = bell_state(2, (0, 1), 1, n_modes=len(table))
    final = evolve_exact(H, psi0, dt=0.01, T=20.0, stride=500)[-1]
    np.testing.assert_allclose(final.atom_amps, psi0.atom_amps, atol=1e-12)
    assert final.lattice_population() == 0.0


def test_exact_matches_spectral_oracle():
    table = enumerate_modes(LatticeSpec(6, 6))
    atoms = AtomSet.from_pairs([(2, 3), (4, 5)], lam=0.05)
    H = assemble_hamiltonian(table, atoms)
    psi0 = PureState.from_atom_amps([1.0, 0.0], len(table))
    final = evolve_exact(H, psi0, dt=0.005, T=50.0, stride=10000)[-1]
    oracle = evolve_spectral(H, psi0, [50.0])[0]
    assert final.time == pytest.approx(50.0)
    assert np.max(np.abs(final.vector() - oracle.vector())) <= 1e-8


def test_norm_and_energy_conserved():
    table = enumerate_modes(LatticeSpec(9, 9))
    atoms = AtomSet.from_pairs([(3, 3), (5, 7), (8, 2)], omega=0.1, lam=0.2)
    H = assemble_hamiltonian(table, atoms)
    psi0 = PureState.from_atom_amps(np.array([1.0, 1.0j, -1.0]) / np.sqrt(3.0), len(table))
    trajectory = evolve_exact(H, psi0, dt=0.01, T=30.0, stride=300)
    assert [round(s.time, 9) for s in trajectory] == [0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0, 21.0, 24.0, 27.0, 30.0]
    e0 = H.energy(psi0.vector())
    for state in trajectory:
        assert abs(state.norm_squared() - 1.0) <= 1e-8
        assert H.energy(state.vector()) == pytest.approx(e0, abs=1e-8)


def test_step_size_limits():
    table = enumerate_modes(LatticeSpec(3, 3))
    H = assemble_hamiltonian(table, AtomSet.from_pairs([(2, 2)]))
    psi0 = PureState.from_atom_amps([1.0], len(table))
    with pytest.raises(StepSizeError):
        evolve_exact(H, psi0, dt=0.05, T=1.0)
    with pytest.raises(StepSizeError):
        evolve_exact(H, psi0, dt=0.0, T=1.0)
    with pytest.raises(LatticeDomainError):
        evolve_exact(H, PureState.from_atom_amps([2.0], len(table)), T=1.0)


def test_norm_drift_is_reported():
    table = enumerate_modes(LatticeSpec(3, 3))
    H = assemble_hamiltonian(table, AtomSet.from_pairs([(2, 2)], lam=1.0))
    psi0 = PureState.from_atom_amps([1.0], len(table))
    with pytest.raises(StepSizeError):
        evolve_exact(H, psi0, dt=0.02, T=10.0, stride=1, norm_drift_limit=1e-16)


def test_zero_final_time_returns_initial_state():
    table = enumerate_modes(LatticeSpec(3, 3))
    H = assemble_hamiltonian(table, AtomSet.from_pairs([(1, 1)]))
    psi0 = PureState.from_atom_amps([1.0], len(table))
    trajectory = evolve_exact(H, psi0, T=0.0)
    assert len(trajectory) == 1
    np.testing.assert_allclose(trajectory[0].vector(), psi0.vector())


# ============== Bell-pair entanglement ==============

@pytest.fixture(scope="module")
def pair_a_states():
    ratio = steady_rates(SQUARE, AtomSet.from_pairs([ATOM1, PAIR_A])).ratio(0, 1)
    return run_pair(PAIR_A, dark_sign(ratio)), run_pair(PAIR_A, bright_sign(ratio))


def test_pair_a_dark_state_stays_entangled(pair_a_states):
    dark, _ = pair_a_states
    assert pair_concurrence(dark) >= 0.8


def test_pair_a_bright_state_loses_entanglement(pair_a_states):
    _, bright = pair_a_states
    assert pair_concurrence(bright) <= 0.1


def test_pair_a_norm_drift(pair_a_states):
    for state in pair_a_states:
        assert abs(state.norm_squared() - 1.0) <= 1e-6


def test_pair_c_both_bell_states_decay():
    for sign in (1, -1):
        assert pair_concurrence(run_pair(PAIR_C, sign)) <= 0.1


def test_pair_b_dark_sign_follows_ratio():
    ratio = steady_rates(SQUARE, AtomSet.from_pairs([ATOM1, PAIR_B])).ratio(0, 1)
    assert ratio == pytest.approx(1.0, abs=1e-10)
    assert dark_sign(ratio) == -1
    dark = pair_concurrence(run_pair(PAIR_B, dark_sign(ratio)))
    bright = pair_concurrence(run_pair(PAIR_B, bright_sign(ratio)))
    assert dark > bright


# ============== Field snapshots ==============

def test_field_snapshot_of_single_mode():
    table = enumerate_modes(LatticeSpec(5, 4))
    amps = np.zeros(len(table), dtype=complex)
    amps[table.index(2, 3)] = 1.0
    grid = field_snapshot(PureState(atom_amps=np.zeros(1, dtype=complex), mode_amps=amps), table)
    expected = np.outer(table.sx[:, 1], table.sy[:, 2])
    np.testing.assert_allclose(grid, expected, atol=1e-14)
    assert np.sum(np.abs(grid) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_field_snapshot_vacuum_and_unitarity():
    table = enumerate_modes(LatticeSpec(6, 7))
    vacuum = PureState.from_atom_amps([1.0], len(table))
    assert np.all(field_snapshot(vacuum, table) == 0)
    rng = np.random.default_rng(11)
    amps = rng.normal(size=len(table)) + 1j * rng.normal(size=len(table))
    grid = field_snapshot(PureState(atom_amps=np.zeros(1, dtype=complex), mode_amps=amps), table)
    assert np.sum(np.abs(grid) ** 2) == pytest.approx(np.sum(np.abs(amps) ** 2), rel=1e-12)


def test_directional_emission_from_pair_c():
    atoms = AtomSet.from_pairs([ATOM1, PAIR_C], lam=0.05)
    H = assemble_hamiltonian(SQUARE, atoms)
    psi0 = bell_state(2, (0, 1), 1, n_modes=len(SQUARE))
    final = evolve_exact(H, psi0, dt=0.01, T=10.0, stride=1000)[-1]
    grid = field_snapshot(final, SQUARE)
    assert directional_fraction(grid, atoms, Orientation.STANDARD, width=1) >= 0.7


def test_directional_fraction_masks():
    grid = np.zeros((5, 5))
    grid[0, 0] = 1.0
    atoms = AtomSet.from_pairs([(3, 3)])
    assert directional_fraction(grid, atoms, Orientation.STANDARD, width=0) == 1.0
    assert directional_fraction(grid, atoms, Orientation.TILTED, width=0) == 0.0
    assert directional_fraction(np.zeros((5, 5)), atoms, Orientation.STANDARD) == 0.0


# ============== Two-qubit states ==============

def test_reduced_two_qubit_layout():
    state = PureState.from_atom_amps([0.6, 0.8j, 0.0], 0)
    rho = reduced_two_qubit(state, (0, 1)).rho
    assert rho[2, 2].real == pytest.approx(0.36)
    assert rho[1, 1].real == pytest.approx(0.64)
    assert rho[0, 0].real == pytest.approx(0.0, abs=1e-15)
    assert rho[1, 2] == pytest.approx(0.8j * 0.6)
    assert rho[3, 3] == 0
    with pytest.raises(LatticeDomainError):
        reduced_two_qubit(state, (1, 1))


def test_reduced_two_qubit_from_sector_state():
    sector = SectorState.from_amplitudes(np.array([0.6, 0.8j]))
    pure = PureState.from_atom_amps([0.6, 0.8j], 0)
    np.testing.assert_allclose(reduced_two_qubit(sector, (0, 1)).rho, reduced_two_qubit(pure, (0, 1)).rho, atol=1e-15)


def test_concurrence_reference_values():
    bell = PureState.from_atom_amps(bell_amplitudes(2, (0, 1), -1), 0)
    assert concurrence(reduced_two_qubit(bell, (0, 1))) == pytest.approx(1.0, abs=1e-12)
    product = PureState.from_atom_amps([1.0, 0.0], 0)
    assert concurrence(reduced_two_qubit(product, (0, 1))) == pytest.approx(0.0, abs=1e-12)
    mixed = np.diag([0.25, 0.25, 0.25, 0.25]).astype(complex)
    assert concurrence(TwoQubitState(rho=mixed)) == pytest.approx(0.0, abs=1e-12)
    partial = PureState.from_atom_amps([np.sqrt(0.3), np.sqrt(0.3)], 0)
    assert concurrence(reduced_two_qubit(partial, (0, 1))) == pytest.approx(0.6, abs=1e-12)


def test_concurrence_shortcut_matches_wootters():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        p = rng.dirichlet(np.ones(3))
        coh = np.sqrt(p[1] * p[2]) * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
        rho = np.zeros((4, 4), dtype=complex)
        rho[0, 0], rho[1, 1], rho[2, 2] = p
        rho[1, 2] = coh
        rho[2, 1] = np.conj(coh)
        state = TwoQubitState(rho=rho)
        assert concurrence(state) == pytest.approx(single_excitation_concurrence(state), abs=1e-12)


def test_two_qubit_validation():
    with pytest.raises(LatticeDomainError):
        concurrence(TwoQubitState(rho=np.eye(4)))
    with pytest.raises(LatticeDomainError):
        concurrence(TwoQubitState(rho=np.diag([1.2, -0.2, 0.0, 0.0]).astype(complex)))
    with pytest.raises(LatticeDomainError):
        TwoQubitState(rho=np.eye(3)).validate()


# ============== Bell states ==============

def test_bell_amplitudes_and_signs():
    np.testing.assert_allclose(bell_amplitudes(3, (0, 2), -1), np.array([1, 0, -1]) / np.sqrt(2))
    assert dark_sign(-1.0) == 1 and bright_sign(-1.0) == -1
    assert dark_sign(1.0) == -1 and bright_sign(1.0) == 1
    with pytest.raises(LatticeDomainError):
        bell_amplitudes(2, (0, 1), 0.5)
    with pytest.raises(LatticeDomainError):
        bell_amplitudes(2, (0, 2), 1)


# ============== Master equation ==============

def pair_rates(gammac, gamma0=1.0):
    return RateMatrix(gamma=np.array([[gamma0, gammac], [gammac, gamma0]]), manifold_size=1)


DUMMY_PAIR = AtomSet.from_pairs([(1, 1), (1, 2)], lam=0.0)


def test_collective_decomposition():
    modes = collective_decomposition(1.0, 1.0)
    assert (modes.gamma_plus, modes.gamma_minus) == (2.0, 0.0)
    g = pair_rates(0.4).gamma
    for w, rate in zip(modes.weights, (1.4, 0.6)):
        assert w @ g @ w == pytest.approx(rate)
    with pytest.raises(LatticeDomainError):
        collective_decomposition(1.0, 1.5)


def test_master_symmetric_state_is_stationary():
    rho0 = SectorState.from_amplitudes(bell_amplitudes(2, (0, 1), 1))
    final = evolve_master(pair_rates(-1.0), None, DUMMY_PAIR, rho0, dt=0.01, T=5.0, stride=500)[-1]
    np.testing.assert_allclose(final.rho_ee, rho0.rho_ee, atol=1e-12)
    assert final.p_ground == pytest.approx(0.0, abs=1e-12)


def test_master_antisymmetric_state_decays_at_twice_gamma0():
    rho0 = SectorState.from_amplitudes(bell_amplitudes(2, (0, 1), -1))
    trajectory = evolve_master(pair_rates(-1.0), None, DUMMY_PAIR, rho0, dt=0.01, T=2.0, stride=50)
    for state in trajectory:
        assert state.excited_population() == pytest.approx(np.exp(-2.0 * state.time), abs=1e-8)
        assert state.trace() == pytest.approx(1.0, abs=1e-10)
        assert state.min_eigenvalue() >= -1e-10


def test_master_lamb_shift_rotates_pair():
    from physics.rates import LambMatrix

    lamb = LambMatrix(shift=np.array([[0.0, 0.5], [0.5, 0.0]]))
    rho0 = SectorState.from_amplitudes([1.0, 0.0])
    zero = RateMatrix(gamma=np.zeros((2, 2)), manifold_size=0)
    final = evolve_master(zero, lamb, DUMMY_PAIR, rho0, dt=0.01, T=1.0, stride=100)[-1]
    assert final.atom_populations()[1] == pytest.approx(np.sin(0.5) ** 2, abs=1e-9)


def test_master_rejects_non_psd_rates():
    rho0 = SectorState.from_amplitudes([1.0, 0.0])
    with pytest.raises(LatticeDomainError):
        evolve_master(pair_rates(1.5), None, DUMMY_PAIR, rho0, T=1.0)
    with pytest.raises(LatticeDomainError):
        evolve_master(RateMatrix(gamma=np.array([[1.0, 0.2], [0.1, 1.0]]), manifold_size=1), None, DUMMY_PAIR, rho0, T=1.0)


def test_dicke_dark_and_bright_states():
    signs = [1, -1, 1, -1]
    dark = SectorState.from_amplitudes(np.array([1, 1, 1, 1]) / 2.0)
    bright = SectorState.from_amplitudes(np.array(signs) / 2.0)
    dark_final = dicke_evolution(signs, 1.0, dark, dt=0.01, T=3.0, stride=300)[-1]
    bright_traj = dicke_evolution(signs, 1.0, bright, dt=0.01, T=1.0, stride=20)
    assert dark_final.excited_population() == pytest.approx(1.0, abs=1e-12)
    for state in bright_traj:
        assert state.excited_population() == pytest.approx(np.exp(-4.0 * state.time), abs=1e-8)


def test_dicke_single_excitation_splits():
    rho0 = SectorState.from_amplitudes([1.0, 0.0])
    final = dicke_evolution([1, 1], 0.5, rho0, dt=0.01, T=40.0, stride=4000)[-1]
    # the symmetric half decays, the antisymmetric half survives
    assert final.excited_population() == pytest.approx(0.5, abs=1e-8)
    with pytest.raises(LatticeDomainError):
        dicke_evolution([1, 0], 1.0, rho0, T=1.0)


# ============== Markovian agreement ==============

@pytest.fixture(scope="module")
def tilted_pair():
    table = enumerate_modes(LatticeSpec(49, 29, orientation=Orientation.TILTED))
    atoms = AtomSet.from_pairs([(15, 14), (19, 14)], lam=0.01)
    gamma0 = calibrate_gamma0(table, Site(15, 14), 0.0, 0.01)
    return table, atoms, gamma0


def compare_with_exact(table, atoms, gamma0, amps, T):
    rates = steady_rates(table, atoms).scaled(gamma0)
    sector = evolve_master(rates, None, atoms, SectorState.from_amplitudes(amps), dt=0.01, T=T, stride=1000)
    H = assemble_hamiltonian(table, atoms)
    exact = evolve_exact(H, PureState.from_atom_amps(amps, len(table)), dt=0.01, T=T, stride=1000)
    return sector, exact


def test_calibrated_gamma0_is_small_and_positive(tilted_pair):
    _, _, gamma0 = tilted_pair
    assert 5e-4 < gamma0 < 1.2e-3


def test_master_matches_exact_for_dark_pair(tilted_pair):
    table, atoms, gamma0 = tilted_pair
    amps = bell_amplitudes(2, (0, 1), -1)
    sector, exact = compare_with_exact(table, atoms, gamma0, amps, 300.0)
    for s, e in zip(sector, exact):
        if s.time >= 100.0:
            assert abs(s.excited_population() - e.atom_populations().sum()) <= 0.05


def test_master_matches_exact_for_single_atom(tilted_pair):
    table, atoms, gamma0 = tilted_pair
    sector, exact = compare_with_exact(table, atoms, gamma0, np.array([1.0, 0.0]), 200.0)
    for s, e in zip(sector, exact):
        assert s.time == pytest.approx(e.time)
        if s.time >= 100.0:
            assert abs(s.excited_population() - e.atom_populations().sum()) <= 0.05
