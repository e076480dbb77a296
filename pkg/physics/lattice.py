"""
Finite square lattice with reflecting boundaries.

Builds the sine eigenmodes of the tight-binding lattice, evaluates the
dispersion relation for the Standard and Tilted orientations, selects the
modes resonant with an emitter and measures how straight the iso-frequency
contour is in momentum space.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from physics.errors import LatticeDomainError, NoContourError, UnsupportedConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_RESONANCE_TOL = 1e-9
DEFAULT_CONTOUR_SAMPLES = 400


class Orientation(str, Enum):
    """Lattice axes relative to the reflecting boundary."""
    STANDARD = "Standard"
    TILTED = "Tilted"


@dataclass(frozen=True)
class Site:
    """Lattice site, 1-based coordinates."""
    x: int
    y: int

    def as_tuple(self) -> Tuple[int, int]:
        return (self.x, self.y)


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry and hoppings of a finite 2D lattice (energies in units of J)."""
    Nx: int
    Ny: int
    J: float = 1.0
    Jtilde: float = 0.0
    orientation: Orientation = Orientation.STANDARD

    def __post_init__(self):
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        if self.Nx < 2 or self.Ny < 2:
            raise LatticeDomainError(f"Lattice needs Nx, Ny >= 2, got {self.Nx}x{self.Ny}")
        if self.J <= 0:
            raise LatticeDomainError(f"Hopping J must be positive, got {self.J}")
        if self.Jtilde < 0:
            raise LatticeDomainError(f"Jtilde must be >= 0, got {self.Jtilde}")
        if self.orientation is Orientation.TILTED and self.Jtilde != 0:
            raise UnsupportedConfigurationError("Tilted lattices do not support Jtilde != 0")

    @property
    def n_sites(self) -> int:
        return self.Nx * self.Ny

    def contains(self, site: Site) -> bool:
        return 1 <= site.x <= self.Nx and 1 <= site.y <= self.Ny

    def check_site(self, site: Site) -> Site:
        """Return the site unchanged or raise when it lies off the lattice."""
        if not self.contains(site):
            raise LatticeDomainError(
                f"Site ({site.x}, {site.y}) outside lattice [1, {self.Nx}] x [1, {self.Ny}]"
            )
        return site


@dataclass(frozen=True)
class Mode:
    """One eigenmode of the finite lattice."""
    lx: int
    ly: int
    kx: float
    ky: float
    omega: float


@dataclass
class ModeTable:
    """
    All Nx*Ny eigenmodes of a lattice, lx-major.

    The mode at (lx, ly) sits at flat index (lx-1)*Ny + (ly-1). Mode profiles
    are separable, f(x, y) = Sx[x-1, lx-1] * Sy[y-1, ly-1], so the table keeps
    only the two 1D sine matrices.
    """
    spec: LatticeSpec
    modes: List[Mode]
    sx: np.ndarray = field(repr=False)
    sy: np.ndarray = field(repr=False)

    @property
    def omega(self) -> np.ndarray:
        return np.array([mode.omega for mode in self.modes])

    def __len__(self) -> int:
        return len(self.modes)

    def index(self, lx: int, ly: int) -> int:
        return (lx - 1) * self.spec.Ny + (ly - 1)

    def profiles(self, sites: Sequence[Site]) -> np.ndarray:
        """Matrix F with F[j, k] = f_{r_j, k} for the given sites."""
        rows = []
        for site in sites:
            self.spec.check_site(site)
            rows.append(np.outer(self.sx[site.x - 1], self.sy[site.y - 1]).ravel())
        return np.array(rows).reshape(len(rows), len(self.modes))

    def full_profile_matrix(self) -> np.ndarray:
        """All profiles, sites (x-major) by modes."""
        return np.kron(self.sx, self.sy)

    def to_real_space(self, mode_amps: np.ndarray) -> np.ndarray:
        """Grid c[x-1, y-1] = sum_k f_{r,k} c_k."""
        ck = np.asarray(mode_amps).reshape(self.spec.Nx, self.spec.Ny)
        return self.sx @ ck @ self.sy.T

    def resonant_indices(self, omega0: float, tol: float = DEFAULT_RESONANCE_TOL) -> np.ndarray:
        if tol < 0:
            raise LatticeDomainError(f"Resonance tolerance must be >= 0, got {tol}")
        return np.flatnonzero(np.abs(self.omega - omega0) <= tol)


def dispersion(spec: LatticeSpec, kx, ky):
    """
    Band frequency at pseudomomentum (kx, ky).

    Standard: -2J(cos kx + cos ky) - 4 Jtilde cos kx cos ky.
    Tilted:   -2J cos kx cos ky.

    Accepts scalars or broadcastable arrays.
    """
    kx = np.asarray(kx, dtype=float)
    ky = np.asarray(ky, dtype=float)
    if spec.orientation is Orientation.TILTED:
        if spec.Jtilde != 0:
            raise UnsupportedConfigurationError("Tilted lattices do not support Jtilde != 0")
        omega = -2.0 * spec.J * np.cos(kx) * np.cos(ky)
    else:
        omega = -2.0 * spec.J * (np.cos(kx) + np.cos(ky)) - 4.0 * spec.Jtilde * np.cos(kx) * np.cos(ky)
    if omega.ndim == 0:
        return float(omega)
    return omega


def _sine_matrix(n: int) -> np.ndarray:
    # S[x-1, l-1] = sqrt(2/(n+1)) sin(pi l x / (n+1)), orthogonal and symmetric
    idx = np.arange(1, n + 1)
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * np.outer(idx, idx) / (n + 1))


def enumerate_modes(spec: LatticeSpec) -> ModeTable:
    """All eigenmodes k_a = pi l_a / (N_a + 1), l_a in [1, N_a], lx-major."""
    kxs = np.pi * np.arange(1, spec.Nx + 1) / (spec.Nx + 1)
    kys = np.pi * np.arange(1, spec.Ny + 1) / (spec.Ny + 1)
    modes = []
    for lx, kx in enumerate(kxs, start=1):
        for ly, ky in enumerate(kys, start=1):
            modes.append(Mode(lx=lx, ly=ly, kx=float(kx), ky=float(ky), omega=dispersion(spec, kx, ky)))

    logger.debug("Enumerated %d modes for %dx%d %s lattice", len(modes), spec.Nx, spec.Ny, spec.orientation.value)
    return ModeTable(spec=spec, modes=modes, sx=_sine_matrix(spec.Nx), sy=_sine_matrix(spec.Ny))


def mode_amplitude(spec: LatticeSpec, mode: Mode, site: Site) -> float:
    """f_{r,k} = 2/sqrt((Nx+1)(Ny+1)) sin(kx x) sin(ky y)."""
    spec.check_site(site)
    norm = 2.0 / np.sqrt((spec.Nx + 1) * (spec.Ny + 1))
    return float(norm * np.sin(mode.kx * site.x) * np.sin(mode.ky * site.y))


def resonant_manifold(table: ModeTable, omega0: float, tol: float = DEFAULT_RESONANCE_TOL) -> List[Mode]:
    """Modes with |omega_k - omega0| <= tol. Empty when no channel exists."""
    return [table.modes[i] for i in table.resonant_indices(omega0, tol)]


def band_range(spec: LatticeSpec, samples: int = DEFAULT_CONTOUR_SAMPLES) -> Tuple[float, float]:
    """Minimum and maximum of the dispersion over [0, pi]^2."""
    grid = np.linspace(0.0, np.pi, samples + 1)
    values = dispersion(spec, grid[:, None], grid[None, :])
    return float(values.min()), float(values.max())


# ============== Iso-frequency contour ==============

@dataclass
class BranchReport:
    """Straightness of one connected contour branch."""
    n_points: int
    deviation: float
    direction: float

    def to_dict(self) -> dict:
        return {"n_points": self.n_points, "deviation": self.deviation, "direction": self.direction}


@dataclass
class ContourReport:
    """Contour points plus a per-branch straightness report."""
    omega0: float
    points: np.ndarray
    branches: List[BranchReport]

    @property
    def max_deviation(self) -> float:
        return max(branch.deviation for branch in self.branches)

    def to_dict(self) -> dict:
        return {
            "omega0": self.omega0,
            "n_points": int(len(self.points)),
            "max_deviation": self.max_deviation,
            "branches": [branch.to_dict() for branch in self.branches],
        }


def _scan_roots(spec: LatticeSpec, omega0: float, samples: int, transpose: bool) -> np.ndarray:
    """
    Roots of dispersion - omega0 along lines of constant ky (or kx when
    transposed), bisected to 1e-12 in k. Returns (m, 2) array of (kx, ky).
    """
    spacing = np.pi / samples
    fixed = spacing * (np.arange(samples) + 0.5)
    free = np.linspace(0.0, np.pi, samples + 1)

    def g(k_free, k_fixed):
        if transpose:
            return dispersion(spec, k_fixed, k_free) - omega0
        return dispersion(spec, k_free, k_fixed) - omega0

    values = g(free[None, :], fixed[:, None])
    signs = np.sign(values)

    line_idx, grid_idx = np.nonzero(signs == 0)
    exact_free = free[grid_idx]
    exact_fixed = fixed[line_idx]

    line_idx, grid_idx = np.nonzero(signs[:, :-1] * signs[:, 1:] < 0)
    lo = free[grid_idx].copy()
    hi = free[grid_idx + 1].copy()
    k_fixed = fixed[line_idx]
    lo_sign = signs[line_idx, grid_idx]

    while lo.size and np.max(hi - lo) > 1e-12:
        mid = 0.5 * (lo + hi)
        same = np.sign(g(mid, k_fixed)) == lo_sign
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)

    k_free = np.concatenate([exact_free, 0.5 * (lo + hi)])
    k_fix = np.concatenate([exact_fixed, k_fixed])
    if transpose:
        return np.column_stack([k_fix, k_free])
    return np.column_stack([k_free, k_fix])


def _components(points: np.ndarray, gap: float) -> List[np.ndarray]:
    if len(points) == 0:
        return []
    pairs = np.array(sorted(cKDTree(points).query_pairs(gap)), dtype=int).reshape(-1, 2)
    n = len(points)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    n_comp, labels = connected_components(graph, directed=False)
    return [points[labels == c] for c in range(n_comp)]


def _straightness(points: np.ndarray) -> BranchReport:
    """Largest perpendicular distance from the total-least-squares line."""
    centered = points - points.mean(axis=0)
    if len(points) < 2:
        return BranchReport(n_points=len(points), deviation=0.0, direction=0.0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[-1]
    deviation = float(np.max(np.abs(centered @ normal)))
    direction = float(np.arctan2(vt[0, 1], vt[0, 0]) % np.pi)
    return BranchReport(n_points=len(points), deviation=deviation, direction=direction)


def isofrequency_contour(
    spec: LatticeSpec,
    omega0: float,
    samples: int = DEFAULT_CONTOUR_SAMPLES,
) -> ContourReport:
    """
    Contour dispersion(kx, ky) = omega0 in [0, pi]^2 with a straightness report.

    Roots are bisected along horizontal scan lines; a vertical scan picks up
    branches that run parallel to them. Branches are the connected pieces of
    each scan family (gap threshold 3x the scan spacing); vertical pieces that
    duplicate a horizontal branch are dropped.

    Args:
        spec: Lattice geometry and hoppings
        omega0: Emitter frequency (units of J)
        samples: Scan lines per family

    Returns:
        ContourReport with all points and one BranchReport per branch

    Raises:
        NoContourError: omega0 outside the band or no points found
    """
    if samples < 3:
        raise LatticeDomainError(f"Contour needs at least 3 samples, got {samples}")
    lo, hi = band_range(spec, samples)
    if not lo < omega0 < hi:
        raise NoContourError(f"omega0={omega0} outside band ({lo:.6g}, {hi:.6g})")

    spacing = np.pi / samples
    gap = 3.0 * spacing
    horizontal = _scan_roots(spec, omega0, samples, transpose=False)
    vertical = _scan_roots(spec, omega0, samples, transpose=True)

    branches = _components(horizontal, gap)
    if len(horizontal):
        tree = cKDTree(horizontal)
        for piece in _components(vertical, gap):
            distances, _ = tree.query(piece)
            if np.max(distances) > 2.0 * spacing:
                branches.append(piece)
    else:
        branches = _components(vertical, gap)

    if not branches:
        raise NoContourError(f"No contour points found for omega0={omega0}")

    points = np.vstack(branches)
    reports = [_straightness(piece) for piece in branches]
    logger.debug(
        "Contour at omega0=%g: %d points, %d branches, max deviation %.3g",
        omega0, len(points), len(reports), max(r.deviation for r in reports),
    )
    return ContourReport(omega0=omega0, points=points, branches=reports)
