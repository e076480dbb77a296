"""
Lattice subradiance simulator - command-line entry point.
Validates a JSON experiment config and hands it to the orchestrator.

Usage:
    python main.py dispersion --config configs/dispersion_3x3.json --out results/band
    python main.py evolve --config configs/square49_pair_a.json --engine exact
"""
import argparse
import json
import logging
import os
import sys
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config import Config
from engines.orchestrator.orchestrator import ExperimentOrchestrator
from utils.logging_setup import configure_logging

logger = logging.getLogger(__name__)

CONFIG_ERROR_EXIT = 2


# ============== Experiment Config Models ==============

class StrictModel(BaseModel):
    """Base model that rejects unknown keys."""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class LatticeConfig(StrictModel):
    """Lattice geometry and hoppings (units of J)."""
    Nx: int = Field(..., ge=2, description="Sites along x")
    Ny: int = Field(..., ge=2, description="Sites along y")
    J: float = Field(1.0, gt=0, description="Nearest-neighbour hopping")
    Jtilde: float = Field(0.0, ge=0, description="Next-nearest-neighbour hopping (Standard only)")
    orientation: Literal["Standard", "Tilted"] = "Standard"


class AtomsConfig(StrictModel):
    """Emitter positions (1-based sites), splitting and coupling."""
    positions: List[Tuple[int, int]] = Field(default_factory=list)
    omega: float = Field(0.0, description="Atomic splitting Omega")
    lam: float = Field(0.05, ge=0, alias="lambda", description="Atom-lattice coupling")


class InitialStateConfig(StrictModel):
    """Initial single-excitation state of the atoms."""
    kind: Literal["atom", "bell", "amplitudes"] = "atom"
    atom: int = Field(0, ge=0)
    pair: Tuple[int, int] = (0, 1)
    sign: Union[Literal["dark", "bright"], Literal[1, -1]] = "dark"
    amplitudes: List[float] = Field(default_factory=list)
    amplitudes_im: List[float] = Field(default_factory=list)


class RunConfig(StrictModel):
    """Command-specific parameters; unset values fall back to Config defaults."""
    dt: Optional[float] = Field(None, gt=0)
    T: float = Field(100.0, ge=0)
    stride: Optional[int] = Field(None, ge=1)
    tol: Optional[float] = Field(None, ge=0)
    initial_state: Optional[InitialStateConfig] = None
    pairs: Optional[List[Tuple[int, int]]] = None
    snapshot_times: List[float] = Field(default_factory=list)
    gamma0: Optional[float] = Field(None, gt=0)
    calibration_window: Tuple[float, float] = (50.0, 150.0)
    include_lamb: bool = True
    dicke_signs: Optional[List[Literal[1, -1]]] = None
    omega0: Optional[float] = None
    atom1: Optional[Tuple[int, int]] = None
    contour: bool = False
    buildup_T: Optional[float] = Field(None, gt=0)
    buildup_step: float = Field(1.0, gt=0)
    buildup_fraction: float = Field(0.9, gt=0, le=1)

    @model_validator(mode="after")
    def check_window(self):
        lo, hi = self.calibration_window
        if not 0 <= lo < hi:
            raise ValueError("calibration_window must satisfy 0 <= start < end")
        return self


class DesignConfig(StrictModel):
    """Layout selection and dark-state certification options."""
    layout: Literal["explicit", "diamond", "cross", "multiline"] = "explicit"
    center: Optional[Tuple[int, int]] = None
    d: Optional[int] = Field(None, ge=1)
    rows: Optional[int] = Field(None, ge=1)
    row_positions: Optional[List[int]] = None
    candidates: List[List[float]] = Field(default_factory=list)
    bell_pairs: List[Tuple[int, int]] = Field(default_factory=list)
    bell_signs: List[Literal[1, -1]] = Field(default_factory=list)
    certify: bool = False
    certify_count: int = Field(1, ge=0)
    certify_T: float = Field(150.0, ge=0)

    @model_validator(mode="after")
    def check_layout_fields(self):
        if self.layout == "diamond" and (self.center is None or self.d is None):
            raise ValueError("diamond layout needs center and d")
        if self.layout == "multiline" and self.rows is None:
            raise ValueError("multiline layout needs rows")
        if len(self.bell_pairs) != len(self.bell_signs):
            raise ValueError("bell_pairs and bell_signs must have the same length")
        return self


class ExperimentConfig(StrictModel):
    """One JSON experiment document."""
    schema_version: Literal[1] = Config.SCHEMA_VERSION
    lattice: LatticeConfig
    atoms: AtomsConfig = Field(default_factory=AtomsConfig)
    run: RunConfig = Field(default_factory=RunConfig)
    design: DesignConfig = Field(default_factory=DesignConfig)


def load_config(path: str) -> ExperimentConfig:
    """Read and validate an experiment document."""
    with open(path, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    return ExperimentConfig.model_validate(raw)


def format_validation_error(error: ValidationError) -> str:
    """One line per problem, naming the offending field."""
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"  {location}: {item['msg']}")
    return "Invalid experiment config:\n" + "\n".join(lines)


# ============== CLI ==============

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lattice-qed",
        description="Collective decay and dark states of emitters on a finite 2D lattice",
    )
    parser.add_argument("--log-level", default=None, help="Logging level (default from LQED_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("dispersion", "Band table lx, ly, kx, ky, omega"),
        ("xtalk-map", "Steady cross-talk map from atom 1"),
        ("evolve", "Time evolution with the exact, master or Dicke engine"),
        ("dark", "Dark-state basis, ranking and certification"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="Experiment config (JSON)")
        cmd.add_argument("--out", default=None, help="Output directory (default LQED_OUTPUT_DIR/<command>)")
        cmd.add_argument("--tol", type=float, default=None, help="Resonance tolerance override")
        cmd.add_argument("--seedless", action="store_true", help="Reserved; every command is deterministic")
        if name == "evolve":
            cmd.add_argument("--engine", choices=ExperimentOrchestrator.ENGINES, default="exact")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    problems = Config.validate()
    if problems:
        for problem in problems:
            logger.error("Configuration: %s", problem)
        return CONFIG_ERROR_EXIT

    try:
        config = load_config(args.config)
    except ValidationError as e:
        print(format_validation_error(e), file=sys.stderr)
        return CONFIG_ERROR_EXIT
    except (OSError, json.JSONDecodeError) as e:
        print(f"Cannot read config {args.config}: {e}", file=sys.stderr)
        return CONFIG_ERROR_EXIT

    out_dir = args.out or os.path.join(Config.OUTPUT_DIR, args.command)
    engine = getattr(args, "engine", "exact")
    return ExperimentOrchestrator().execute(args.command, config, out_dir, engine=engine, tol=args.tol)


if __name__ == "__main__":
    sys.exit(main())
