"""
Master-equation coefficients for emitters coupled to a finite lattice.

Rate matrices carry the factor lambda^2; Lamb-shift matrices are
lambda^2 / J. Both are symmetrised after summation.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from physics.errors import DegenerateSourceError, LatticeDomainError
from physics.lattice import DEFAULT_RESONANCE_TOL, ModeTable, Site

logger = logging.getLogger(__name__)

DEGENERATE_SOURCE_LIMIT = 1e-14


@dataclass(frozen=True)
class AtomSet:
    """
    Emitter positions with a common splitting omega and coupling lam.
    lam = 0 is the decoupled limit: every rate and shift vanishes.
    """
    positions: Tuple[Site, ...]
    omega: float = 0.0
    lam: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(self.positions))
        if not self.positions:
            raise LatticeDomainError("AtomSet needs at least one emitter")
        if len(set(self.positions)) != len(self.positions):
            raise LatticeDomainError("Emitter positions must be pairwise distinct")
        if self.lam < 0:
            raise LatticeDomainError(f"Coupling lambda must be >= 0, got {self.lam}")

    @property
    def n(self) -> int:
        return len(self.positions)

    @classmethod
    def from_pairs(cls, coords: Sequence[Sequence[int]], omega: float = 0.0, lam: float = 0.05) -> "AtomSet":
        return cls(positions=tuple(Site(int(x), int(y)) for x, y in coords), omega=omega, lam=lam)


@dataclass
class RateMatrix:
    """Steady dissipation matrix Gamma_jl and the manifold it was summed over."""
    gamma: np.ndarray
    manifold_size: int

    @property
    def n(self) -> int:
        return self.gamma.shape[0]

    def ratio(self, i: int, j: int) -> float:
        """Cross-talk Gamma_ij / Gamma_ii."""
        if self.gamma[i, i] <= DEGENERATE_SOURCE_LIMIT:
            raise DegenerateSourceError(f"Emitter {i} has zero self rate")
        return float(self.gamma[i, j] / self.gamma[i, i])

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.gamma).min())

    def scaled(self, gamma0: float) -> "RateMatrix":
        """Rescale so the mean self rate equals gamma0."""
        mean_self = float(np.mean(np.diag(self.gamma)))
        if mean_self <= DEGENERATE_SOURCE_LIMIT:
            raise DegenerateSourceError("Cannot rescale a rate matrix with zero self rates")
        return RateMatrix(gamma=self.gamma * (gamma0 / mean_self), manifold_size=self.manifold_size)


@dataclass
class LambMatrix:
    """Lamb-shift matrix: diagonal Omega_LS, off-diagonal lambda_LS."""
    shift: np.ndarray

    def max_off_diagonal(self) -> float:
        off = self.shift - np.diag(np.diag(self.shift))
        return float(np.max(np.abs(off))) if off.size else 0.0


def steady_rates(table: ModeTable, atoms: AtomSet, tol: float = DEFAULT_RESONANCE_TOL) -> RateMatrix:
    """
    Gamma_jl = lambda^2 sum_{k in manifold} f_{r_j,k} f_{r_l,k}.

    An empty manifold gives the zero matrix (no decay channel).
    """
    idx = table.resonant_indices(atoms.omega, tol)
    profiles = table.profiles(atoms.positions)[:, idx]
    gamma = atoms.lam ** 2 * (profiles @ profiles.T)
    gamma = 0.5 * (gamma + gamma.T)
    if idx.size == 0:
        logger.warning("No lattice modes resonant with omega=%g; rates vanish", atoms.omega)
    return RateMatrix(gamma=gamma, manifold_size=int(idx.size))


def crosstalk_map(
    table: ModeTable,
    atom1: Site,
    omega0: float,
    tol: float = DEFAULT_RESONANCE_TOL,
) -> np.ndarray:
    """
    Ratio Gamma_1r / Gamma_11 on every lattice site.

    Returns:
        Grid indexed [x-1, y-1]

    Raises:
        DegenerateSourceError: atom1 has no overlap with the resonant manifold
    """
    idx = table.resonant_indices(omega0, tol)
    source = table.profiles([atom1])[0]
    weights = np.zeros(len(table))
    weights[idx] = source[idx]
    self_rate = float(np.dot(weights, weights))
    if self_rate <= DEGENERATE_SOURCE_LIMIT:
        raise DegenerateSourceError(
            f"Site ({atom1.x}, {atom1.y}) is decoupled from the manifold at omega={omega0}"
        )
    grid = table.to_real_space(weights) / self_rate
    grid[atom1.x - 1, atom1.y - 1] = 1.0
    return grid


def rate_buildup(table: ModeTable, atoms: AtomSet, t: float) -> np.ndarray:
    """
    Time-dependent coefficients
    Gamma_jl(t) = 2 lambda^2 sum_k f_j f_l sin((Omega - w_k) t) / (Omega - w_k),
    with the resonant limit t for Omega = w_k.
    """
    if t < 0:
        raise LatticeDomainError(f"Buildup time must be >= 0, got {t}")
    profiles = table.profiles(atoms.positions)
    detuning = atoms.omega - table.omega
    kernel = 2.0 * t * np.sinc(detuning * t / np.pi)
    gamma_t = atoms.lam ** 2 * (profiles * kernel) @ profiles.T
    return 0.5 * (gamma_t + gamma_t.T)


def buildup_ratios(table: ModeTable, atoms: AtomSet, times: Sequence[float], pair: Tuple[int, int] = (0, 1)) -> np.ndarray:
    """Gamma_ij(t) / Gamma_ii(t) over a time scan (nan at t=0)."""
    i, j = pair
    profiles = table.profiles([atoms.positions[i], atoms.positions[j]])
    product = profiles[0] * profiles[1]
    self_weight = profiles[0] ** 2
    detuning = atoms.omega - table.omega

    ratios = []
    for t in times:
        kernel = np.sinc(detuning * t / np.pi)
        self_rate = float(np.dot(self_weight, kernel))
        ratios.append(np.dot(product, kernel) / self_rate if t > 0 and self_rate != 0 else np.nan)
    return np.array(ratios)


def buildup_time(
    table: ModeTable,
    atoms: AtomSet,
    times: Sequence[float],
    fraction: float = 0.9,
    pair: Tuple[int, int] = (0, 1),
    tol: float = DEFAULT_RESONANCE_TOL,
) -> Optional[float]:
    """
    First scanned time after which Gamma_ij(t)/Gamma_ii(t) stays at or above
    `fraction` of the steady ratio. None if it never settles in the scan.
    """
    steady = steady_rates(table, atoms, tol).ratio(*pair)
    if steady == 0:
        raise DegenerateSourceError("Steady cross-talk is zero; buildup time is undefined")

    reached = np.nan_to_num(buildup_ratios(table, atoms, times, pair) / steady, nan=0.0) >= fraction
    if not reached[-1]:
        return None
    misses = np.flatnonzero(~reached)
    first = 0 if misses.size == 0 else misses[-1] + 1
    return float(times[first])


def lamb_shift(table: ModeTable, atoms: AtomSet, tol: float = DEFAULT_RESONANCE_TOL) -> LambMatrix:
    """
    Principal-value sum lambda^2 sum_{k not resonant} f_j f_l / (Omega - w_k).
    """
    detuning = atoms.omega - table.omega
    off_resonant = np.abs(detuning) > tol
    profiles = table.profiles(atoms.positions)[:, off_resonant]
    shift = atoms.lam ** 2 * (profiles / detuning[off_resonant]) @ profiles.T
    return LambMatrix(shift=0.5 * (shift + shift.T))


def ratio_table(rates: RateMatrix) -> List[dict]:
    """
    Rows {i, j, gamma, ratio} for every ordered pair with i < j. The ratio is
    NaN when atom i does not decay on its own.
    """
    rows = []
    for i in range(rates.n):
        decoupled = rates.gamma[i, i] <= DEGENERATE_SOURCE_LIMIT
        if decoupled:
            logger.info("Atom %d has no steady self rate; its ratios are reported as NaN", i)
        for j in range(i + 1, rates.n):
            ratio = float("nan") if decoupled else rates.ratio(i, j)
            rows.append({"i": i, "j": j, "gamma": float(rates.gamma[i, j]), "ratio": ratio})
    return rows
