"""
Dicke engine for the lattice subradiance simulator.
Collective decay through a single jump operator sum_i s_i sigma_i^-.
"""
import logging
import os
import sys
from typing import List

import numpy as np

# Add parent path for imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "../..")))

from engines.base_engine import BaseEngine, EngineResult, EvolutionRequest, trajectory_row
from engines.master_engine.master_engine import check_sector_trajectory, resolve_gamma0
from physics.dynamics import SectorState, dicke_evolution
from physics.errors import DegenerateSourceError
from physics.rates import steady_rates

logger = logging.getLogger(__name__)


def signs_from_rates(request: EvolutionRequest) -> List[int]:
    """
    Jump-operator signs read off the dominant eigenvector of the steady
    dissipation matrix.
    """
    gamma = steady_rates(request.table, request.atoms, request.resonance_tol).gamma
    evals, evecs = np.linalg.eigh(gamma)
    if evals[-1] <= 0:
        raise DegenerateSourceError("No collective decay channel: steady rates vanish")
    if evals.size > 1 and evals[-2] > 1e-9 * evals[-1]:
        logger.warning("Steady rates have rank > 1; the Dicke model keeps only the dominant channel")
    top = evecs[:, -1]
    if np.min(np.abs(top)) <= 1e-9 * np.max(np.abs(top)):
        raise DegenerateSourceError("An atom is decoupled from the dominant decay channel")
    signs = np.sign(top / top[0]).astype(int)
    return [int(s) for s in signs]


class DickeEngine(BaseEngine):
    """
    Engine backed by the Dicke master equation with Gamma = Gamma0 s s^T.

    Signs come from the request when given, otherwise from the steady
    dissipation matrix of the configured layout.
    """

    def __init__(self):
        super().__init__("Dicke Engine")

    def run(self, request: EvolutionRequest) -> EngineResult:
        signs = list(request.signs) if request.signs is not None else signs_from_rates(request)
        gamma0 = resolve_gamma0(request)
        logger.info("Dicke model with Gamma0=%.6g and signs %s", gamma0, signs)

        rho0 = SectorState.from_amplitudes(request.amplitudes)
        trajectory = dicke_evolution(
            signs, gamma0, rho0,
            dt=request.dt, T=request.T, stride=request.stride, omega=request.atoms.omega,
        )
        hygiene = check_sector_trajectory(trajectory, self.name)

        rows = [trajectory_row(s.time, s, request.pairs, s.p_ground) for s in trajectory]
        return self._create_result(
            success=True,
            message=f"Integrated Dicke model for {len(signs)} atoms to Jt={request.T:g}",
            data={"rows": rows, "gamma0": gamma0, "signs": signs, **hygiene},
        )


# For direct testing
if __name__ == "__main__":
    from physics.dynamics import bell_amplitudes
    from physics.lattice import LatticeSpec, enumerate_modes
    from physics.rates import AtomSet

    table = enumerate_modes(LatticeSpec(15, 15))
    atoms = AtomSet.from_pairs([(8, 5), (5, 8)], lam=0.05)
    request = EvolutionRequest(
        table=table, atoms=atoms, amplitudes=bell_amplitudes(2, (0, 1), 1),
        dt=0.01, T=200.0, stride=5000, pairs=[(0, 1)], signs=[1, 1], gamma0=0.01,
    )
    result = DickeEngine().run(request)
    print(result.message)
    print(result.data["rows"][-1])
