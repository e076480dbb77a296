"""
Dark-state architectures.

Null spaces of steady dissipation matrices, Bell-pair superpositions and the
catalogued layouts (diamond, cross, parallel rows on a tilted lattice), plus
exact-dynamics certification of candidate dark vectors.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from physics.dynamics import PureState, assemble_hamiltonian, evolve_exact
from physics.errors import CapacityError, LatticeDomainError, UnsupportedConfigurationError
from physics.lattice import ModeTable, Orientation, Site
from physics.rates import AtomSet, LambMatrix, RateMatrix, crosstalk_map, lamb_shift, steady_rates

logger = logging.getLogger(__name__)

NULL_CUTOFF = 1e-9
RECURRENCE_TOL = 1e-9


@dataclass
class DarkVector:
    """Collective single-excitation amplitudes over the atoms, unit norm."""
    amps: np.ndarray
    residual: float = 0.0
    lamb_eigenvalue: Optional[float] = None
    leakage: Optional[float] = None

    def to_dict(self) -> dict:
        amps = np.asarray(self.amps)
        data = {
            "amps_re": [float(a) for a in amps.real],
            "amps_im": [float(a) for a in amps.imag],
            "residual": float(self.residual),
        }
        if self.lamb_eigenvalue is not None:
            data["lamb_eigenvalue"] = float(self.lamb_eigenvalue)
        if self.leakage is not None:
            data["leakage"] = float(self.leakage)
        return data


@dataclass
class Layout:
    """Emitter placement with per-atom role annotations."""
    positions: Tuple[Site, ...]
    role_tags: List[Dict[str, Any]] = field(default_factory=list)

    def __post_init__(self):
        self.positions = tuple(self.positions)
        if len(set(self.positions)) != len(self.positions):
            raise LatticeDomainError("Layout positions must be pairwise distinct")
        if not self.role_tags:
            self.role_tags = [{} for _ in self.positions]

    def __len__(self) -> int:
        return len(self.positions)

    def to_atoms(self, omega: float = 0.0, lam: float = 0.05) -> AtomSet:
        return AtomSet(positions=self.positions, omega=omega, lam=lam)

    def groups(self, key: str) -> Dict[Any, List[int]]:
        """Atom indices grouped by a role tag, in first-seen order."""
        grouped: Dict[Any, List[int]] = {}
        for i, tags in enumerate(self.role_tags):
            grouped.setdefault(tags.get(key), []).append(i)
        return grouped


@dataclass
class DarkCertificate:
    """Steady residual, Lamb-shift invariance and exact-dynamics retention."""
    steady_residual: float
    lamb_residual: float
    retained_population: float
    final_time: float

    def to_dict(self) -> dict:
        return {
            "steady_residual": self.steady_residual,
            "lamb_residual": self.lamb_residual,
            "retained_population": self.retained_population,
            "final_time": self.final_time,
        }


# ============== Null spaces ==============

def dark_basis(gamma: RateMatrix, tol: float = NULL_CUTOFF) -> List[DarkVector]:
    """
    Orthonormal basis of the null space of Gamma.

    Singular values below tol * (largest singular value) count as zero. A zero
    matrix makes every vector dark.
    """
    g = np.asarray(gamma.gamma, dtype=float)
    n = g.shape[0]
    _, singular, vh = np.linalg.svd(g)
    largest = singular[0] if singular.size else 0.0
    if largest == 0.0:
        return [DarkVector(amps=np.eye(n)[i], residual=0.0) for i in range(n)]

    rank = int(np.sum(singular > tol * largest))
    basis = []
    for v in vh[rank:]:
        residual = float(np.linalg.norm(g @ v) / largest)
        basis.append(DarkVector(amps=v.astype(complex), residual=residual))
    logger.debug("Null space of %dx%d rate matrix: dimension %d", n, n, len(basis))
    return basis


def rank_dark_vectors(basis: Sequence[DarkVector], lamb: LambMatrix) -> List[DarkVector]:
    """
    Rotate the dark basis to diagonalise the projected Lamb-shift matrix and
    order by the Lamb-shift component leaking out of the dark subspace.
    """
    if not basis:
        return []
    b = np.column_stack([np.asarray(v.amps) for v in basis])
    shift = np.asarray(lamb.shift, dtype=float)
    projected = b.conj().T @ shift @ b
    evals, evecs = np.linalg.eigh(0.5 * (projected + projected.conj().T))
    rotated = b @ evecs

    ranked = []
    for a in range(rotated.shape[1]):
        v = rotated[:, a]
        lv = shift @ v
        leakage = float(np.linalg.norm(lv - evals[a] * v))
        residual = max(vec.residual for vec in basis)
        ranked.append(DarkVector(amps=v, residual=residual, lamb_eigenvalue=float(evals[a]), leakage=leakage))
    ranked.sort(key=lambda vec: vec.leakage)
    return ranked


def collective_rate(gamma: RateMatrix, vector: DarkVector) -> float:
    """Decay rate v^dag Gamma v of a single-excitation collective state."""
    v = np.asarray(vector.amps)
    return float(np.real(np.vdot(v, np.asarray(gamma.gamma) @ v)))


def bell_superposition(pairs: Sequence[Tuple[int, int]], signs: Sequence[int], n_atoms: Optional[int] = None) -> DarkVector:
    """
    Equal superposition of Bell pairs, amplitude 1/sqrt(2P) on the first atom
    of each pair and sign/sqrt(2P) on the second.
    """
    if len(pairs) != len(signs) or not pairs:
        raise LatticeDomainError("Need one sign per pair and at least one pair")
    used = [i for pair in pairs for i in pair]
    if len(set(used)) != len(used):
        raise LatticeDomainError(f"Bell pairs overlap: {list(pairs)}")
    if any(s not in (1, -1) for s in signs):
        raise LatticeDomainError(f"Bell signs must be +1 or -1, got {list(signs)}")
    if min(used) < 0:
        raise LatticeDomainError("Atom indices must be >= 0")
    n = max(used) + 1 if n_atoms is None else n_atoms
    if max(used) >= n:
        raise LatticeDomainError(f"Pair index out of range for {n} atoms")

    amps = np.zeros(n, dtype=complex)
    scale = 1.0 / np.sqrt(2.0 * len(pairs))
    for (i, j), s in zip(pairs, signs):
        amps[i] = scale
        amps[j] = s * scale
    return DarkVector(amps=amps)


# ============== Catalogued layouts ==============

def _require_standard_square(table: ModeTable) -> int:
    spec = table.spec
    if spec.orientation is not Orientation.STANDARD:
        raise UnsupportedConfigurationError("Layout requires a Standard lattice")
    if spec.Nx != spec.Ny:
        raise UnsupportedConfigurationError(f"Layout requires a square lattice, got {spec.Nx}x{spec.Ny}")
    return spec.Nx


def diamond_layout(table: ModeTable, center: Tuple[int, int], d: int) -> Layout:
    """Four atoms at (cx, cy-d), (cx-d, cy), (cx, cy+d), (cx+d, cy)."""
    if table.spec.orientation is not Orientation.STANDARD:
        raise UnsupportedConfigurationError("Diamond layout requires a Standard lattice")
    if d < 1:
        raise LatticeDomainError(f"Diamond half-width must be >= 1, got {d}")
    cx, cy = center
    sites = [Site(cx, cy - d), Site(cx - d, cy), Site(cx, cy + d), Site(cx + d, cy)]
    for site in sites:
        table.spec.check_site(site)
    tags = [{"role": "corner", "index": i} for i in range(4)]
    return Layout(positions=tuple(sites), role_tags=tags)


def _vertex_offset(table: ModeTable, center: Site, omega0: float) -> int:
    """
    Diagonal distance from the center to the vertex atoms: the first
    |ratio| = 1 recurrence, else the first |ratio| = 1/2 site.
    """
    ratios = crosstalk_map(table, center, omega0)
    reach = table.spec.Nx - max(center.x, center.y)
    diagonal = np.array([ratios[center.x + d - 1, center.y + d - 1] for d in range(1, reach + 1)])
    for target in (1.0, 0.5):
        hits = np.flatnonzero(np.abs(np.abs(diagonal) - target) <= RECURRENCE_TOL)
        if hits.size:
            if target < 1.0:
                logger.info("No |ratio|=1 recurrence on the diagonal; vertices at the first |ratio|=1/2 site")
            return int(hits[0]) + 1
    raise UnsupportedConfigurationError("No diagonal cross-talk recurrence from the lattice center")


def cross_layout(table: ModeTable, omega0: float = 0.0) -> Layout:
    """
    Full central row and column (2(N-1) arm atoms plus the center) and four
    vertex atoms diagonal to the center, 2N+3 atoms in total.
    """
    n = _require_standard_square(table)
    if n % 2 == 0:
        raise UnsupportedConfigurationError(f"Cross layout needs odd N, got {n}")
    c = (n + 1) // 2

    sites, tags = [], []
    for i in range(1, n + 1):
        if i != c:
            sites.append(Site(c, i))
            tags.append({"role": "arm", "axis": "vertical"})
    for i in range(1, n + 1):
        if i != c:
            sites.append(Site(i, c))
            tags.append({"role": "arm", "axis": "horizontal"})
    sites.append(Site(c, c))
    tags.append({"role": "center"})

    d = _vertex_offset(table, Site(c, c), omega0)
    for dx, dy in ((-d, -d), (-d, d), (d, -d), (d, d)):
        sites.append(Site(c + dx, c + dy))
        tags.append({"role": "vertex"})

    logger.debug("Cross layout on N=%d: %d atoms, vertex offset %d", n, len(sites), d)
    return Layout(positions=tuple(sites), role_tags=tags)


def multiline_layout(table: ModeTable, rows_requested: int, rows: Optional[Sequence[int]] = None) -> Layout:
    """
    Parallel emitter rows on a Tilted lattice: atoms at every odd x of rows
    at even y. Rows default to y = 2, 4, ...; explicit rows must be even.

    Raises:
        UnsupportedConfigurationError: not Tilted, or Nx/Ny even
        CapacityError: more rows than (Ny-1)/2
    """
    spec = table.spec
    if spec.orientation is not Orientation.TILTED:
        raise UnsupportedConfigurationError("Multiline layout requires a Tilted lattice")
    if spec.Nx % 2 == 0 or spec.Ny % 2 == 0:
        raise UnsupportedConfigurationError(f"Multiline layout needs odd Nx and Ny, got {spec.Nx}x{spec.Ny}")

    capacity = (spec.Ny - 1) // 2
    if rows_requested > capacity:
        raise CapacityError(f"{rows_requested} rows requested, lattice holds {capacity}")
    if rows_requested < 1:
        raise LatticeDomainError("At least one row is required")

    if rows is None:
        rows = [2 * (r + 1) for r in range(rows_requested)]
    rows = list(rows)
    if len(rows) != rows_requested or len(set(rows)) != len(rows):
        raise LatticeDomainError(f"Expected {rows_requested} distinct rows, got {rows}")
    for y in rows:
        if y % 2 or not 1 <= y <= spec.Ny:
            raise LatticeDomainError(f"Row y={y} must be even and inside the lattice")

    sites, tags = [], []
    for y in rows:
        for x in range(1, spec.Nx + 1, 2):
            sites.append(Site(x, y))
            tags.append({"row": y, "parity": 1 if (x - 1) % 4 == 0 else -1})
    return Layout(positions=tuple(sites), role_tags=tags)


def row_signs(layout: Layout, row: int) -> np.ndarray:
    """s_i = sin(pi x_i / 2) for the atoms of one row (the row's jump operator)."""
    signs = [1 if (site.x - 1) % 4 == 0 else -1 for site, tags in zip(layout.positions, layout.role_tags)
             if tags.get("row") == row]
    if not signs:
        raise LatticeDomainError(f"Layout has no atoms in row {row}")
    return np.array(signs, dtype=float)


def block_diagonal_check(gamma: RateMatrix, groups: Sequence[Sequence[int]], lam: float, tol: float = 1e-12) -> bool:
    """True when every Gamma entry between different groups is below tol * lambda^2."""
    g = np.asarray(gamma.gamma)
    label = np.full(g.shape[0], -1)
    for gi, members in enumerate(groups):
        label[list(members)] = gi
    between = label[:, None] != label[None, :]
    if not between.any():
        return True
    return bool(np.max(np.abs(g[between])) <= tol * lam ** 2)


# ============== Certification ==============

def certify_dark(
    layout: Layout,
    vector: DarkVector,
    table: ModeTable,
    omega: float,
    lam: float,
    T: float,
    dt: float = 0.01,
    rates: Optional[RateMatrix] = None,
    lamb: Optional[LambMatrix] = None,
) -> DarkCertificate:
    """
    Certify a candidate dark vector on a layout.

    Reports ||Gamma v|| / ||Gamma||, the Lamb-shift invariance residual
    ||H_LS v - (v^dag H_LS v) v|| in units of lambda^2, and the atomic
    population left after exact propagation to T.
    """
    v = np.asarray(vector.amps, dtype=complex)
    if len(v) != len(layout):
        raise LatticeDomainError(f"Vector has {len(v)} entries, layout {len(layout)} atoms")
    v = v / np.linalg.norm(v)
    atoms = layout.to_atoms(omega=omega, lam=lam)

    if rates is None:
        rates = steady_rates(table, atoms)
    if lamb is None:
        lamb = lamb_shift(table, atoms)
    g_norm = np.linalg.norm(rates.gamma, 2)
    steady_residual = float(np.linalg.norm(rates.gamma @ v) / g_norm) if g_norm > 0 else 0.0

    lv = lamb.shift @ v
    lamb_residual = float(np.linalg.norm(lv - np.vdot(v, lv) * v))
    if lam > 0:
        lamb_residual /= lam ** 2

    if T > 0 and lam > 0:
        H = assemble_hamiltonian(table, atoms)
        psi0 = PureState.from_atom_amps(v, len(table))
        final = evolve_exact(H, psi0, dt=dt, T=T, stride=max(1, int(round(T / dt))))[-1]
        retained = float(final.atom_populations().sum())
    else:
        retained = 1.0

    logger.info("Certified vector: residual %.3g, Lamb residual %.3g, retained %.4f", steady_residual, lamb_residual, retained)
    return DarkCertificate(
        steady_residual=steady_residual,
        lamb_residual=lamb_residual,
        retained_population=retained,
        final_time=float(T),
    )
