"""
Single-excitation dynamics of emitters coupled to a finite lattice.

Two propagators live here: the exact atoms+lattice wavefunction (fixed-step
RK4 on a diagonal-plus-border Hamiltonian, with a dense spectral oracle) and
the reduced master equation for the excited-sector block, which also covers
collective Dicke models with a single jump operator.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh

from physics.errors import DegenerateSourceError, LatticeDomainError, StepSizeError
from physics.lattice import ModeTable, Orientation, Site
from physics.rates import AtomSet, LambMatrix, RateMatrix

logger = logging.getLogger(__name__)

DEFAULT_DT = 0.01
MAX_DT = 0.02
DEFAULT_STRIDE = 100
NORM_DRIFT_LIMIT = 1e-6
PSD_TOL = 1e-10

SIGMA_Y2 = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]])).real


# ============== State and operator types ==============

@dataclass
class PureState:
    """Joint atom+lattice amplitudes in the single-excitation sector."""
    atom_amps: np.ndarray
    mode_amps: np.ndarray
    time: float = 0.0

    @property
    def n_atoms(self) -> int:
        return len(self.atom_amps)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.atom_amps, self.mode_amps])

    @classmethod
    def from_vector(cls, vec: np.ndarray, n_atoms: int, time: float = 0.0) -> "PureState":
        vec = np.asarray(vec, dtype=complex)
        return cls(atom_amps=vec[:n_atoms].copy(), mode_amps=vec[n_atoms:].copy(), time=time)

    @classmethod
    def from_atom_amps(cls, amps: Sequence[complex], n_modes: int) -> "PureState":
        return cls(atom_amps=np.asarray(amps, dtype=complex), mode_amps=np.zeros(n_modes, dtype=complex))

    def norm_squared(self) -> float:
        return float(np.vdot(self.atom_amps, self.atom_amps).real + np.vdot(self.mode_amps, self.mode_amps).real)

    def atom_populations(self) -> np.ndarray:
        return np.abs(self.atom_amps) ** 2

    def lattice_population(self) -> float:
        return float(np.sum(np.abs(self.mode_amps) ** 2))


@dataclass
class Hamiltonian:
    """
    H = Omega sum_j |j><j| + sum_k w_k |k><k| + sum_jk g_jk (|j><k| + h.c.)

    Stored as its diagonal and the n x M border block, so a product costs
    O(n M) instead of O((n+M)^2).
    """
    mode_freqs: np.ndarray
    atom_freq: float
    coupling: np.ndarray

    @property
    def n_atoms(self) -> int:
        return self.coupling.shape[0]

    @property
    def dim(self) -> int:
        return self.n_atoms + len(self.mode_freqs)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        n = self.n_atoms
        atoms, modes = vec[:n], vec[n:]
        out = np.empty_like(vec)
        out[:n] = self.atom_freq * atoms + self.coupling @ modes
        out[n:] = self.mode_freqs * modes + self.coupling.T @ atoms
        return out

    def energy(self, vec: np.ndarray) -> float:
        return float(np.vdot(vec, self.apply(vec)).real)

    def to_dense(self) -> np.ndarray:
        n = self.n_atoms
        dense = np.zeros((self.dim, self.dim))
        dense[:n, :n] = self.atom_freq * np.eye(n)
        dense[n:, n:] = np.diag(self.mode_freqs)
        dense[:n, n:] = self.coupling
        dense[n:, :n] = self.coupling.T
        return dense


@dataclass
class SectorState:
    """Excited-sector block of the density matrix plus the ground population."""
    rho_ee: np.ndarray
    p_ground: float = 0.0
    time: float = 0.0

    @property
    def n_atoms(self) -> int:
        return self.rho_ee.shape[0]

    @classmethod
    def from_amplitudes(cls, amps: Sequence[complex]) -> "SectorState":
        amps = np.asarray(amps, dtype=complex)
        return cls(rho_ee=np.outer(amps, amps.conj()), p_ground=float(1.0 - np.vdot(amps, amps).real))

    def excited_population(self) -> float:
        return float(np.trace(self.rho_ee).real)

    def atom_populations(self) -> np.ndarray:
        return np.diag(self.rho_ee).real.copy()

    def trace(self) -> float:
        return self.excited_population() + self.p_ground

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho_ee + self.rho_ee.conj().T)).min())


@dataclass
class TwoQubitState:
    """Two-qubit density matrix in the basis |00>, |01>, |10>, |11>."""
    rho: np.ndarray

    @property
    def coherence(self) -> complex:
        return complex(self.rho[1, 2])

    def validate(self, tol: float = PSD_TOL) -> None:
        if self.rho.shape != (4, 4):
            raise LatticeDomainError(f"Two-qubit state must be 4x4, got {self.rho.shape}")
        if np.max(np.abs(self.rho - self.rho.conj().T)) > tol:
            raise LatticeDomainError("Two-qubit state is not Hermitian")
        if abs(np.trace(self.rho).real - 1.0) > tol:
            raise LatticeDomainError("Two-qubit state does not have unit trace")
        if np.linalg.eigvalsh(self.rho).min() < -tol:
            raise LatticeDomainError("Two-qubit state is not positive semidefinite")


@dataclass
class CollectiveModes:
    """Decay rates of the symmetric and antisymmetric pair modes."""
    gamma_plus: float
    gamma_minus: float
    weights: np.ndarray = field(default_factory=lambda: np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0))


# ============== Exact wavefunction propagation ==============

def assemble_hamiltonian(table: ModeTable, atoms: AtomSet) -> Hamiltonian:
    """Diagonal-plus-border Hamiltonian with couplings lambda * f_{r_j,k}."""
    coupling = atoms.lam * table.profiles(atoms.positions)
    return Hamiltonian(mode_freqs=table.omega.copy(), atom_freq=atoms.omega, coupling=coupling)


def _rk4_step(rhs, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _step_plan(dt: float, T: float, max_dt: float) -> Tuple[int, float]:
    if dt <= 0 or dt > max_dt:
        raise StepSizeError(f"Step dt={dt} outside (0, {max_dt}]")
    if T < 0:
        raise LatticeDomainError(f"Final time must be >= 0, got {T}")
    n_steps = int(np.ceil(T / dt - 1e-9))
    return n_steps, (T / n_steps if n_steps else dt)


def evolve_exact(
    H: Hamiltonian,
    psi0: PureState,
    dt: float = DEFAULT_DT,
    T: float = 100.0,
    stride: int = DEFAULT_STRIDE,
    max_dt: float = MAX_DT,
    norm_drift_limit: float = NORM_DRIFT_LIMIT,
) -> List[PureState]:
    """
    Solve i d|psi>/dt = H|psi> with fixed-step RK4.

    Args:
        H: System Hamiltonian
        psi0: Normalised initial state
        dt: Step in 1/J (rounded down so an integer number of steps reaches T)
        T: Final time in 1/J
        stride: Steps between stored samples; the final state is always stored

    Returns:
        Trajectory of PureState samples, starting with psi0

    Raises:
        StepSizeError: dt too large, or norm drift above norm_drift_limit
    """
    if abs(psi0.norm_squared() - 1.0) > 1e-8:
        raise LatticeDomainError(f"Initial state is not normalised (|psi|^2={psi0.norm_squared():.12g})")
    n_steps, step = _step_plan(dt, T, max_dt)
    n = psi0.n_atoms

    def rhs(y):
        return -1j * H.apply(y)

    y = psi0.vector().astype(complex)
    trajectory = [PureState.from_vector(y, n, time=psi0.time)]
    for i in range(1, n_steps + 1):
        y = _rk4_step(rhs, y, step)
        if i % stride == 0 or i == n_steps:
            state = PureState.from_vector(y, n, time=psi0.time + i * step)
            drift = abs(state.norm_squared() - 1.0)
            if drift > norm_drift_limit:
                raise StepSizeError(f"Norm drift {drift:.3g} at t={state.time:.4g}; reduce dt")
            trajectory.append(state)
            logger.debug("t=%.3f atom population %.6f", state.time, state.atom_populations().sum())
    return trajectory


def evolve_spectral(H: Hamiltonian, psi0: PureState, times: Sequence[float]) -> List[PureState]:
    """Dense diagonalisation oracle: psi(t) = V exp(-iEt) V^T psi(0)."""
    energies, vectors = eigh(H.to_dense())
    coeffs = vectors.T @ psi0.vector()
    states = []
    for t in times:
        vec = vectors @ (np.exp(-1j * energies * t) * coeffs)
        states.append(PureState.from_vector(vec, psi0.n_atoms, time=psi0.time + t))
    return states


def field_snapshot(state: PureState, table: ModeTable) -> np.ndarray:
    """Real-space lattice amplitude c_r = sum_k f_{r,k} c_k, indexed [x-1, y-1]."""
    return table.to_real_space(state.mode_amps)


def directional_fraction(
    grid: np.ndarray,
    atoms: AtomSet,
    orientation: Orientation,
    width: int = 1,
) -> float:
    """
    Share of lattice population within `width` sites of the emission lines
    through the atoms: diagonals for Standard, row and column for Tilted.
    """
    nx, ny = grid.shape
    x, y = np.meshgrid(np.arange(1, nx + 1), np.arange(1, ny + 1), indexing="ij")
    mask = np.zeros(grid.shape, dtype=bool)
    for site in atoms.positions:
        if Orientation(orientation) is Orientation.TILTED:
            mask |= (np.abs(x - site.x) <= width) | (np.abs(y - site.y) <= width)
        else:
            mask |= np.abs((x - y) - (site.x - site.y)) <= width
            mask |= np.abs((x + y) - (site.x + site.y)) <= width
    population = np.abs(grid) ** 2
    total = population.sum()
    if total == 0:
        return 0.0
    return float(population[mask].sum() / total)


# ============== Two-qubit reduction and entanglement ==============

def reduced_two_qubit(state, pair: Tuple[int, int]) -> TwoQubitState:
    """
    Two-qubit state of atoms (i, j); |10> means atom i excited.

    Works on PureState (coherence c_j c_i*) and SectorState alike. The
    |11> population is zero in the single-excitation sector.
    """
    i, j = pair
    if i == j or not (0 <= i < state.n_atoms and 0 <= j < state.n_atoms):
        raise LatticeDomainError(f"Invalid atom pair {pair} for {state.n_atoms} atoms")

    if isinstance(state, PureState):
        ci, cj = state.atom_amps[i], state.atom_amps[j]
        p10, p01, coh = abs(ci) ** 2, abs(cj) ** 2, cj * np.conj(ci)
    else:
        p10 = state.rho_ee[i, i].real
        p01 = state.rho_ee[j, j].real
        coh = state.rho_ee[j, i]

    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1.0 - p01 - p10
    rho[1, 1] = p01
    rho[2, 2] = p10
    rho[1, 2] = coh
    rho[2, 1] = np.conj(coh)
    return TwoQubitState(rho=rho)


def concurrence(state: TwoQubitState) -> float:
    """
    Wootters concurrence max(0, l1 - l2 - l3 - l4).

    With rho = A A^dag over its non-null eigenvectors, the l_i are the
    singular values of A^T (sy x sy) A, padded with zeros.
    """
    state.validate()
    rho = 0.5 * (state.rho + state.rho.conj().T)
    evals, evecs = np.linalg.eigh(rho)
    keep = evals > 1e-12 * evals.max()
    factor = evecs[:, keep] * np.sqrt(evals[keep])
    lambdas = np.zeros(4)
    singular = np.linalg.svd(factor.T @ SIGMA_Y2 @ factor, compute_uv=False)
    lambdas[: singular.size] = singular
    lambdas = np.sort(lambdas)[::-1]
    return float(min(1.0, max(0.0, lambdas[0] - lambdas[1:].sum())))


def single_excitation_concurrence(state: TwoQubitState) -> float:
    """Shortcut 2 max(0, |rho_01,10| - sqrt(p00 p11))."""
    p00 = max(state.rho[0, 0].real, 0.0)
    p11 = max(state.rho[3, 3].real, 0.0)
    return float(2.0 * max(0.0, abs(state.coherence) - np.sqrt(p00 * p11)))


# ============== Bell states ==============

def bell_amplitudes(n_atoms: int, pair: Tuple[int, int], sign: float) -> np.ndarray:
    """Atom amplitudes (|10> + sign |01>)/sqrt(2) on pair (i, j): 1 on i, sign on j."""
    if sign not in (1, -1):
        raise LatticeDomainError(f"Bell sign must be +1 or -1, got {sign}")
    i, j = pair
    if i == j or not (0 <= i < n_atoms and 0 <= j < n_atoms):
        raise LatticeDomainError(f"Invalid atom pair {pair} for {n_atoms} atoms")
    amps = np.zeros(n_atoms, dtype=complex)
    amps[i] = 1.0 / np.sqrt(2.0)
    amps[j] = sign / np.sqrt(2.0)
    return amps


def bell_state(n_atoms: int, pair: Tuple[int, int], sign: float, n_modes: int = 0) -> PureState:
    return PureState.from_atom_amps(bell_amplitudes(n_atoms, pair, sign), n_modes)


def dark_sign(ratio: float) -> int:
    """Bell sign annihilated by a pair with cross-talk ratio Gamma_ij/Gamma_ii."""
    return -1 if ratio > 0 else 1


def bright_sign(ratio: float) -> int:
    return -dark_sign(ratio)


# ============== Master equation ==============

def collective_decomposition(gamma0: float, gammac: float) -> CollectiveModes:
    """Gamma_+- = Gamma0 +- Gammac for the pair modes (1, +-1)/sqrt(2)."""
    if abs(gammac) > gamma0 * (1.0 + 1e-12):
        raise LatticeDomainError(f"|Gammac|={abs(gammac)} exceeds Gamma0={gamma0}")
    return CollectiveModes(gamma_plus=gamma0 + gammac, gamma_minus=gamma0 - gammac)


def _check_psd(gamma: np.ndarray, tol: float = 1e-12) -> None:
    if np.max(np.abs(gamma - gamma.T)) > tol * max(1.0, np.max(np.abs(gamma))):
        raise LatticeDomainError("Rate matrix is not symmetric")
    scale = max(1.0, float(np.max(np.abs(gamma))))
    if np.linalg.eigvalsh(gamma).min() < -tol * scale:
        raise LatticeDomainError("Rate matrix is not positive semidefinite")


def evolve_master(
    gamma: RateMatrix,
    lamb: Optional[LambMatrix],
    atoms: AtomSet,
    rho0: SectorState,
    dt: float = DEFAULT_DT,
    T: float = 100.0,
    stride: int = DEFAULT_STRIDE,
    max_dt: float = MAX_DT,
) -> List[SectorState]:
    """
    Excited-sector master equation at T=0.

    d rho/dt = -i (H_eff rho - rho H_eff^dag), H_eff = Omega + H_LS - i Gamma/2,
    d p_ground/dt = tr(Gamma rho). Gamma must already carry physical units.
    """
    g = np.asarray(gamma.gamma, dtype=float)
    _check_psd(g)
    n = g.shape[0]
    if rho0.n_atoms != n:
        raise LatticeDomainError(f"State has {rho0.n_atoms} atoms, rate matrix {n}")
    shift = np.zeros((n, n)) if lamb is None else np.asarray(lamb.shift, dtype=float)
    h_eff = atoms.omega * np.eye(n) + shift - 0.5j * g
    h_eff_dag = h_eff.conj().T

    def rhs(y):
        rho = y[:-1].reshape(n, n)
        drho = -1j * (h_eff @ rho - rho @ h_eff_dag)
        return np.concatenate([drho.ravel(), [np.trace(g @ rho)]])

    n_steps, step = _step_plan(dt, T, max_dt)
    y = np.concatenate([rho0.rho_ee.astype(complex).ravel(), [complex(rho0.p_ground)]])
    trajectory = [SectorState(rho_ee=rho0.rho_ee.astype(complex), p_ground=rho0.p_ground, time=rho0.time)]
    for i in range(1, n_steps + 1):
        y = _rk4_step(rhs, y, step)
        if i % stride == 0 or i == n_steps:
            trajectory.append(
                SectorState(rho_ee=y[:-1].reshape(n, n).copy(), p_ground=float(y[-1].real), time=rho0.time + i * step)
            )
    return trajectory


def dicke_evolution(
    signs: Sequence[int],
    gamma0: float,
    rho0: SectorState,
    dt: float = DEFAULT_DT,
    T: float = 100.0,
    stride: int = DEFAULT_STRIDE,
    omega: float = 0.0,
) -> List[SectorState]:
    """Master equation with one collective jump operator sum_i s_i sigma_i^-."""
    s = np.asarray(signs, dtype=float)
    if s.ndim != 1 or not np.all(np.isin(s, (-1.0, 1.0))):
        raise LatticeDomainError("Dicke signs must be a vector of +1/-1")
    if gamma0 < 0:
        raise LatticeDomainError(f"Gamma0 must be >= 0, got {gamma0}")
    rates = RateMatrix(gamma=gamma0 * np.outer(s, s), manifold_size=1)
    # positions are placeholders; only omega enters the sector equation
    atoms = AtomSet(positions=tuple(Site(i + 1, 1) for i in range(len(s))), omega=omega, lam=0.0)
    return evolve_master(rates, None, atoms, rho0, dt=dt, T=T, stride=stride)


# ============== Calibration ==============

def calibrate_gamma0(
    table: ModeTable,
    site: Site,
    omega: float,
    lam: float,
    dt: float = DEFAULT_DT,
    window: Tuple[float, float] = (50.0, 150.0),
) -> float:
    """
    Physical single-emitter decay rate from a log-linear fit of the exact
    excited population over `window` (units of J).
    """
    atoms = AtomSet(positions=(site,), omega=omega, lam=lam)
    H = assemble_hamiltonian(table, atoms)
    psi0 = PureState.from_atom_amps([1.0], len(table))
    stride = max(1, int(round(1.0 / dt)))
    trajectory = evolve_exact(H, psi0, dt=dt, T=window[1], stride=stride)

    times = np.array([s.time for s in trajectory])
    populations = np.array([s.atom_populations()[0] for s in trajectory])
    inside = (times >= window[0] - 1e-9) & (populations > 0)
    if inside.sum() < 2:
        raise DegenerateSourceError("Not enough samples in the calibration window")
    slope, _ = np.polyfit(times[inside], np.log(populations[inside]), 1)
    gamma0 = float(-slope)
    logger.info("Calibrated Gamma0=%.6g at site (%d, %d), lambda=%g", gamma0, site.x, site.y, lam)
    return gamma0
