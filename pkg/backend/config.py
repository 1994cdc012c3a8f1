import os
from dataclasses import dataclass

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(name, default))


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(name, default))


@dataclass
class Config:
    """Configuration settings for the ps-frame toolkit"""

    # Numerical tolerances
    TAU_ZERO: float = _env_float("TAU_ZERO", 1e-12)  # Degenerate magnitude
    TAU_UNIT: float = _env_float("TAU_UNIT", 1e-9)  # Rotor unitarity
    TAU_PRUNE: float = _env_float("TAU_PRUNE", 1e-12)  # Relative grade cleanup
    TAU_COLLINEAR: float = _env_float("TAU_COLLINEAR", 1e-6)  # sin(angle) floor
    TAU_ALIGN: float = _env_float("TAU_ALIGN", 1e-9)  # Alignment residual
    TAU_ANTIPODAL: float = _env_float("TAU_ANTIPODAL", 1e-6)  # Half-turn switch
    TRANSITION_THRESHOLD: float = _env_float("TRANSITION_THRESHOLD", 1e-6)

    # Sampling defaults
    DEFAULT_KAPPA: int = _env_int("DEFAULT_KAPPA", 8)  # Samples between vectors
    DEFAULT_FS: float = _env_float("DEFAULT_FS", 10_000.0)  # Hz
    DEFAULT_FREQ: float = _env_float("DEFAULT_FREQ", 50.0)  # Hz

    # Output formatting
    CSV_DIGITS: int = _env_int("CSV_DIGITS", 17)  # Lossless float text
    OUTPUT_DIGITS: int = _env_int("OUTPUT_DIGITS", 10)  # key=value output

    # Logging
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "WARNING")


config = Config()
