"""
Base engine interface for single-excitation time evolution.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from physics.dynamics import reduced_two_qubit, concurrence
from physics.lattice import ModeTable
from physics.rates import AtomSet


@dataclass
class EngineResult:
    """Standard result format for all engines."""
    success: bool
    message: str
    data: Optional[Dict[str, Any]] = None
    engine_name: str = ""

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "message": self.message,
            "data": self.data,
            "engine_name": self.engine_name,
        }


@dataclass
class EvolutionRequest:
    """Everything an engine needs to propagate one initial state."""
    table: ModeTable
    atoms: AtomSet
    amplitudes: np.ndarray
    dt: float
    T: float
    stride: int
    pairs: List[Tuple[int, int]] = field(default_factory=list)
    snapshot_times: List[float] = field(default_factory=list)
    resonance_tol: float = 1e-9
    gamma0: Optional[float] = None
    calibration_window: Tuple[float, float] = (50.0, 150.0)
    include_lamb: bool = True
    signs: Optional[List[int]] = None


def default_pairs(n_atoms: int, limit: int = 6) -> List[Tuple[int, int]]:
    """All pairs for small systems, otherwise only the first pair."""
    if n_atoms < 2:
        return []
    if n_atoms <= limit:
        return list(combinations(range(n_atoms), 2))
    return [(0, 1)]


def trajectory_row(time: float, state, pairs: Sequence[Tuple[int, int]], lattice_population: float) -> Dict[str, float]:
    """One traj.csv row: t, pop_i, conc_i_j, lattice_population."""
    row = {"t": float(time)}
    for i, p in enumerate(state.atom_populations()):
        row[f"pop_{i}"] = float(p)
    for i, j in pairs:
        row[f"conc_{i}_{j}"] = concurrence(reduced_two_qubit(state, (i, j)))
    row["lattice_population"] = float(lattice_population)
    return row


class BaseEngine(ABC):
    """
    Abstract base class for all evolution engines.

    Each engine must implement the `run` method, which turns an
    EvolutionRequest into trajectory rows.
    """

    def __init__(self, name: str):
        self.name = name

    @abstractmethod
    def run(self, request: EvolutionRequest) -> EngineResult:
        """
        Propagate the requested initial state.

        Args:
            request: Lattice, atoms, initial amplitudes and integrator settings

        Returns:
            EngineResult whose data holds "rows" (trajectory table) and any
            engine-specific extras
        """
        pass

    def _create_result(
        self,
        success: bool,
        message: str,
        data: Optional[Dict[str, Any]] = None,
    ) -> EngineResult:
        """Helper to create standardized results."""
        return EngineResult(
            success=success,
            message=message,
            data=data,
            engine_name=self.name,
        )
