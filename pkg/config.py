"""
Centralized configuration management for the lattice subradiance simulator.
"""
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Config:
    """Process-wide defaults for numerics, outputs and logging."""

    TOOL_VERSION = "1.0.0"
    SCHEMA_VERSION = 1

    # Integrator (units of 1/J)
    DEFAULT_DT = float(os.getenv("LQED_DEFAULT_DT", "0.01"))
    MAX_DT = float(os.getenv("LQED_MAX_DT", "0.02"))
    OUTPUT_STRIDE = int(os.getenv("LQED_OUTPUT_STRIDE", "100"))
    NORM_DRIFT_LIMIT = float(os.getenv("LQED_NORM_DRIFT_LIMIT", "1e-6"))

    # Spectral tolerances
    RESONANCE_TOL = float(os.getenv("LQED_RESONANCE_TOL", "1e-9"))
    NULL_CUTOFF = float(os.getenv("LQED_NULL_CUTOFF", "1e-9"))
    CONTOUR_SAMPLES = int(os.getenv("LQED_CONTOUR_SAMPLES", "400"))

    # Outputs
    OUTPUT_DIR = os.getenv("LQED_OUTPUT_DIR", "results")
    LOG_LEVEL = os.getenv("LQED_LOG_LEVEL", "INFO")

    @classmethod
    def validate(cls) -> list[str]:
        """Validate numeric defaults. Returns list of problems."""
        problems = []

        if not 0 < cls.DEFAULT_DT <= cls.MAX_DT:
            problems.append("LQED_DEFAULT_DT must lie in (0, LQED_MAX_DT]")
        if cls.OUTPUT_STRIDE < 1:
            problems.append("LQED_OUTPUT_STRIDE must be >= 1")
        if cls.RESONANCE_TOL < 0:
            problems.append("LQED_RESONANCE_TOL must be >= 0")
        if not 0 < cls.NULL_CUTOFF < 1:
            problems.append("LQED_NULL_CUTOFF must lie in (0, 1)")
        if cls.CONTOUR_SAMPLES < 3:
            problems.append("LQED_CONTOUR_SAMPLES must be >= 3")
        if cls.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            problems.append(f"LQED_LOG_LEVEL has unknown level {cls.LOG_LEVEL!r}")

        return problems

    @classmethod
    def numerics(cls) -> dict:
        """Numeric defaults, echoed into run manifests."""
        return {
            "dt": cls.DEFAULT_DT,
            "max_dt": cls.MAX_DT,
            "output_stride": cls.OUTPUT_STRIDE,
            "norm_drift_limit": cls.NORM_DRIFT_LIMIT,
            "resonance_tol": cls.RESONANCE_TOL,
            "null_cutoff": cls.NULL_CUTOFF,
            "contour_samples": cls.CONTOUR_SAMPLES,
        }
