"""
Experiment Orchestrator for the lattice subradiance simulator.
Routes CLI commands to handlers, builds lattices and layouts from validated
experiment configs, and delegates time evolution to the engines.
"""
import logging
import os
import sys
import time
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

# Add parent path for imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "../..")))

from config import Config
from engines.base_engine import BaseEngine, EngineResult, EvolutionRequest, default_pairs
from physics.design import (
    DarkVector,
    Layout,
    bell_superposition,
    block_diagonal_check,
    certify_dark,
    collective_rate,
    cross_layout,
    dark_basis,
    diamond_layout,
    multiline_layout,
    rank_dark_vectors,
)
from physics.dynamics import bell_amplitudes, bright_sign, dark_sign
from physics.errors import LatticeDomainError, LatticeQEDError
from physics.lattice import LatticeSpec, ModeTable, Site, enumerate_modes, isofrequency_contour
from physics.rates import (
    AtomSet,
    buildup_ratios,
    buildup_time,
    crosstalk_map,
    lamb_shift,
    ratio_table,
    steady_rates,
)
from utils.output_writer import OutputWriter

logger = logging.getLogger(__name__)


class ExperimentOrchestrator:
    """
    Central orchestrator that turns one experiment config into data files.

    Commands:
    - dispersion: band table (and optional contour report)
    - xtalk-map: steady cross-talk map, pair ratios, optional buildup scan
    - evolve: trajectory through the exact, master or Dicke engine
    - dark: null-space basis, Lamb-shift ranking and certification
    """

    COMMANDS = {
        "dispersion": "_handle_dispersion",
        "xtalk-map": "_handle_xtalk_map",
        "evolve": "_handle_evolve",
        "dark": "_handle_dark",
    }

    ENGINES = ("exact", "master", "dicke")

    def __init__(self):
        """Initialize the orchestrator; engines load on first use."""
        self._exact_engine = None
        self._master_engine = None
        self._dicke_engine = None

    @property
    def exact_engine(self):
        """Lazy load exact engine."""
        if self._exact_engine is None:
            from engines.exact_engine.exact_engine import ExactEngine
            self._exact_engine = ExactEngine()
        return self._exact_engine

    @property
    def master_engine(self):
        """Lazy load master engine."""
        if self._master_engine is None:
            from engines.master_engine.master_engine import MasterEngine
            self._master_engine = MasterEngine()
        return self._master_engine

    @property
    def dicke_engine(self):
        """Lazy load Dicke engine."""
        if self._dicke_engine is None:
            from engines.dicke_engine.dicke_engine import DickeEngine
            self._dicke_engine = DickeEngine()
        return self._dicke_engine

    def engine(self, name: str) -> BaseEngine:
        if name not in self.ENGINES:
            raise LatticeDomainError(f"Unknown engine {name!r}; expected one of {', '.join(self.ENGINES)}")
        return getattr(self, f"{name}_engine")

    # ============== Entry points ==============

    def run(
        self,
        command: str,
        config,
        out_dir: str,
        engine: str = "exact",
        tol: Optional[float] = None,
    ) -> EngineResult:
        """
        Execute one command and write its outputs plus the run manifest.

        Args:
            command: One of COMMANDS
            config: Validated ExperimentConfig
            out_dir: Output directory
            engine: Engine name for `evolve`
            tol: Resonance tolerance override

        Returns:
            EngineResult summarising the run

        Raises:
            LatticeQEDError subclasses for physics and numerical failures
        """
        if command not in self.COMMANDS:
            raise LatticeDomainError(f"Unknown command {command!r}")
        started = time.perf_counter()
        writer = OutputWriter(out_dir)
        handler = getattr(self, self.COMMANDS[command])
        resonance_tol = self._resonance_tol(config, tol)
        result = handler(config, writer, engine, resonance_tol)
        writer.write_manifest(
            config_echo=config.model_dump(mode="json", by_alias=True),
            tool_version=Config.TOOL_VERSION,
            wall_seconds=time.perf_counter() - started,
            numerics={**Config.numerics(), "resonance_tol_used": resonance_tol},
        )
        return result

    def execute(self, command: str, config, out_dir: str, engine: str = "exact", tol: Optional[float] = None) -> int:
        """Run a command and map the outcome to a process exit code."""
        try:
            result = self.run(command, config, out_dir, engine=engine, tol=tol)
        except LatticeQEDError as e:
            logger.error("%s failed: %s", command, e)
            return e.exit_code
        print(result.message)
        return 0

    # ============== Builders ==============

    @staticmethod
    def _resonance_tol(config, tol: Optional[float]) -> float:
        if tol is not None:
            return tol
        if config.run.tol is not None:
            return config.run.tol
        return Config.RESONANCE_TOL

    @staticmethod
    def _table(config) -> ModeTable:
        lat = config.lattice
        spec = LatticeSpec(Nx=lat.Nx, Ny=lat.Ny, J=lat.J, Jtilde=lat.Jtilde, orientation=lat.orientation)
        return enumerate_modes(spec)

    @staticmethod
    def _layout(config, table: ModeTable) -> Layout:
        design = config.design
        if design.layout == "diamond":
            return diamond_layout(table, design.center, design.d)
        if design.layout == "cross":
            return cross_layout(table, config.atoms.omega)
        if design.layout == "multiline":
            return multiline_layout(table, design.rows, design.row_positions)
        return Layout(positions=tuple(Site(x, y) for x, y in config.atoms.positions))

    @staticmethod
    def _atoms(config, layout: Layout) -> AtomSet:
        return layout.to_atoms(omega=config.atoms.omega, lam=config.atoms.lam)

    def _initial_amplitudes(self, config, table: ModeTable, atoms: AtomSet, tol: float) -> np.ndarray:
        """Resolve the configured initial state into atom amplitudes."""
        state = config.run.initial_state
        n = atoms.n
        if state is None or state.kind == "atom":
            amps = np.zeros(n, dtype=complex)
            index = 0 if state is None else state.atom
            if not 0 <= index < n:
                raise LatticeDomainError(f"Initial atom {index} outside 0..{n - 1}")
            amps[index] = 1.0
            return amps

        if state.kind == "amplitudes":
            re = np.asarray(state.amplitudes, dtype=float)
            im = np.asarray(state.amplitudes_im or [0.0] * len(re), dtype=float)
            if len(re) != n or len(im) != n:
                raise LatticeDomainError(f"Initial amplitudes need {n} entries")
            amps = re + 1j * im
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise LatticeDomainError("Initial amplitudes are all zero")
            return amps / norm

        pair = tuple(state.pair)
        sign = state.sign
        if sign in ("dark", "bright"):
            ratio = steady_rates(table, atoms, tol).ratio(*pair)
            sign = dark_sign(ratio) if sign == "dark" else bright_sign(ratio)
            logger.info("Pair %s has steady ratio %.6g; %s sign resolves to %+d", pair, ratio, state.sign, sign)
        return bell_amplitudes(n, pair, sign)

    # ============== Command handlers ==============

    def _handle_dispersion(self, config, writer: OutputWriter, engine: str, tol: float) -> EngineResult:
        """Band table in lx-major order, plus the contour report when requested."""
        table = self._table(config)
        rows = [
            {"lx": m.lx, "ly": m.ly, "kx": m.kx, "ky": m.ky, "omega": m.omega}
            for m in table.modes
        ]
        n_rows = writer.write_table("band.csv", rows, columns=["lx", "ly", "kx", "ky", "omega"])
        data: Dict[str, Any] = {"rows": n_rows}

        omega0 = config.run.omega0 if config.run.omega0 is not None else config.atoms.omega
        data["resonant_modes"] = int(table.resonant_indices(omega0, tol).size)
        if config.run.contour:
            report = isofrequency_contour(table.spec, omega0, samples=Config.CONTOUR_SAMPLES)
            document = report.to_dict()
            document["points"] = report.points
            writer.write_document("contour.json", document, rows=len(report.points))
            data["max_deviation"] = report.max_deviation

        return EngineResult(
            success=True,
            message=f"dispersion: {n_rows} modes, {data['resonant_modes']} resonant at omega0={omega0:g}",
            data=data,
            engine_name="orchestrator",
        )

    def _handle_xtalk_map(self, config, writer: OutputWriter, engine: str, tol: float) -> EngineResult:
        """Cross-talk map from atom1, pair ratios among configured atoms, optional buildup scan."""
        table = self._table(config)
        omega0 = config.run.omega0 if config.run.omega0 is not None else config.atoms.omega
        if config.run.atom1 is not None:
            atom1 = Site(*config.run.atom1)
        elif config.atoms.positions:
            atom1 = Site(*config.atoms.positions[0])
        else:
            raise LatticeDomainError("xtalk-map needs run.atom1 or at least one atom position")
        table.spec.check_site(atom1)

        grid = crosstalk_map(table, atom1, omega0, tol)
        nx, ny = grid.shape
        x, y = np.meshgrid(np.arange(1, nx + 1), np.arange(1, ny + 1), indexing="ij")
        frame_rows = {"x": x.ravel(), "y": y.ravel(), "ratio": grid.ravel()}
        n_rows = writer.write_table("map.csv", pd.DataFrame(frame_rows))
        data: Dict[str, Any] = {"rows": n_rows}

        layout = self._layout(config, table) if config.atoms.positions or config.design.layout != "explicit" else None
        if layout is not None and len(layout) >= 2:
            atoms = self._atoms(config, layout)
            rates = steady_rates(table, atoms, tol)
            writer.write_table("pairs.csv", ratio_table(rates), columns=["i", "j", "gamma", "ratio"])
            if config.run.buildup_T is not None:
                data["buildup_time"] = self._buildup(config, writer, table, atoms, tol)

        return EngineResult(
            success=True,
            message=f"xtalk-map: {n_rows} sites from source ({atom1.x}, {atom1.y})",
            data=data,
            engine_name="orchestrator",
        )

    def _buildup(self, config, writer: OutputWriter, table: ModeTable, atoms: AtomSet, tol: float) -> Optional[float]:
        run = config.run
        times = np.arange(run.buildup_step, run.buildup_T + 0.5 * run.buildup_step, run.buildup_step)
        ratios = buildup_ratios(table, atoms, times)
        writer.write_table("buildup.csv", [{"t": t, "ratio": r} for t, r in zip(times, ratios)], columns=["t", "ratio"])
        settled = buildup_time(table, atoms, times, fraction=run.buildup_fraction, tol=tol)
        if settled is None:
            logger.warning("Cross-talk buildup has not settled at %g of steady by Jt=%g", run.buildup_fraction, run.buildup_T)
        else:
            logger.info("Cross-talk buildup reaches %g of steady at Jt=%g", run.buildup_fraction, settled)
        return settled

    def _handle_evolve(self, config, writer: OutputWriter, engine: str, tol: float) -> EngineResult:
        """Trajectory table plus field snapshots from the chosen engine."""
        table = self._table(config)
        layout = self._layout(config, table)
        atoms = self._atoms(config, layout)
        run = config.run
        pairs = [tuple(p) for p in run.pairs] if run.pairs is not None else default_pairs(atoms.n)

        request = EvolutionRequest(
            table=table,
            atoms=atoms,
            amplitudes=self._initial_amplitudes(config, table, atoms, tol),
            dt=run.dt if run.dt is not None else Config.DEFAULT_DT,
            T=run.T,
            stride=run.stride if run.stride is not None else Config.OUTPUT_STRIDE,
            pairs=pairs,
            snapshot_times=list(run.snapshot_times),
            resonance_tol=tol,
            gamma0=run.gamma0,
            calibration_window=tuple(run.calibration_window),
            include_lamb=run.include_lamb,
            signs=run.dicke_signs,
        )
        result = self.engine(engine).run(request)

        rows = result.data["rows"]
        columns = list(rows[0].keys())
        writer.write_table("traj.csv", rows, columns=columns)
        for t, grid in sorted(result.data.get("snapshots", {}).items()):
            writer.write_table(f"field_t{t:g}.csv", self._snapshot_rows(grid), columns=["x", "y", "re", "im", "population"])
        return result

    @staticmethod
    def _snapshot_rows(grid: np.ndarray) -> List[Dict[str, float]]:
        rows = []
        for (i, j), value in np.ndenumerate(grid):
            rows.append({
                "x": i + 1,
                "y": j + 1,
                "re": float(np.real(value)),
                "im": float(np.imag(value)),
                "population": float(abs(value) ** 2),
            })
        return rows

    def _handle_dark(self, config, writer: OutputWriter, engine: str, tol: float) -> EngineResult:
        """Null-space basis ranked by Lamb-shift leakage, with optional certification."""
        table = self._table(config)
        layout = self._layout(config, table)
        if len(layout) < 2:
            raise LatticeDomainError("dark needs at least 2 atoms")
        atoms = self._atoms(config, layout)
        design = config.design

        rates = steady_rates(table, atoms, tol)
        lamb = lamb_shift(table, atoms, tol)
        ranked = rank_dark_vectors(dark_basis(rates, Config.NULL_CUTOFF), lamb)
        g0 = float(np.mean(np.diag(rates.gamma)))

        document: Dict[str, Any] = {
            "n_atoms": atoms.n,
            "positions": [list(s.as_tuple()) for s in layout.positions],
            "role_tags": layout.role_tags,
            "manifold_size": rates.manifold_size,
            "nullity": len(ranked),
            "mean_self_rate": g0,
            "lamb_max_off_diagonal": lamb.max_off_diagonal(),
            "vectors": [v.to_dict() for v in ranked],
        }
        if design.layout == "multiline":
            groups = list(layout.groups("row").values())
            document["block_diagonal"] = block_diagonal_check(rates, groups, atoms.lam)

        candidates = self._candidates(config, atoms.n)
        if candidates:
            document["candidates"] = []
            for vec in candidates:
                entry = vec.to_dict()
                entry["collective_rate"] = collective_rate(rates, vec)
                if design.certify:
                    entry["certificate"] = self._certify(config, layout, vec, table, rates, lamb)
                document["candidates"].append(entry)
        if design.certify:
            for entry, vec in zip(document["vectors"][: design.certify_count], ranked):
                entry["certificate"] = self._certify(config, layout, vec, table, rates, lamb)

        writer.write_document("darkbasis.json", document, rows=len(ranked))
        return EngineResult(
            success=True,
            message=f"dark: {atoms.n} atoms, nullity {len(ranked)}",
            data={"nullity": len(ranked), "block_diagonal": document.get("block_diagonal")},
            engine_name="orchestrator",
        )

    @staticmethod
    def _candidates(config, n_atoms: int) -> List[DarkVector]:
        design = config.design
        vectors = []
        for amps in design.candidates:
            if len(amps) != n_atoms:
                raise LatticeDomainError(f"Candidate vector needs {n_atoms} entries, got {len(amps)}")
            vec = np.asarray(amps, dtype=complex)
            if not np.any(vec):
                raise LatticeDomainError("Candidate vector is all zero")
            vectors.append(DarkVector(amps=vec / np.linalg.norm(vec)))
        if design.bell_pairs:
            pairs = [tuple(p) for p in design.bell_pairs]
            vectors.append(bell_superposition(pairs, design.bell_signs, n_atoms=n_atoms))
        return vectors

    def _certify(self, config, layout: Layout, vector: DarkVector, table: ModeTable, rates, lamb) -> dict:
        run = config.run
        cert = certify_dark(
            layout,
            vector,
            table,
            omega=config.atoms.omega,
            lam=config.atoms.lam,
            T=config.design.certify_T,
            dt=run.dt if run.dt is not None else Config.DEFAULT_DT,
            rates=rates,
            lamb=lamb,
        )
        return cert.to_dict()
