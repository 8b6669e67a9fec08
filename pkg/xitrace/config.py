"""
Configuration file for the xitrace spectral shift toolkit.
Handles environment variables, output locations, and numerical defaults.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name, "")
    try:
        return int(raw) if raw.strip() else default
    except ValueError:
        return default


# Project root directory
PROJECT_ROOT = Path(__file__).parent.parent
DATA_DIR = PROJECT_ROOT / "data"
OUTPUT_DIR = Path(os.getenv("XITRACE_OUTPUT_DIR", str(DATA_DIR / "output")))

# Logging
LOG_LEVEL = os.getenv("XITRACE_LOG_LEVEL", "INFO").upper()
LOG_FILE = os.getenv("XITRACE_LOG_FILE", "")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Parallel lambda / x sweeps (1 = serial)
THREADS = max(1, _env_int("XITRACE_THREADS", 1))

# ODE integration
ODE_TOL = 1e-10
SHOOTING_TOL = 1e-12
RESCALE_THRESHOLD = 1e100
# V - E beyond which Prufer phases near a wall are integrated with LSODA
STIFF_FORBIDDEN_GAP = 100.0

# Root finding and eigenvalues
ROOT_TOL = 1e-12
EIGENVALUE_TOL = 1e-8
BOX_TOL = 1e-8
WALL_MARGIN = 5.0
MAX_BOX_GROWTH = 12

# Abel summation
DEFAULT_ABEL_ALPHAS = (0.2, 0.1, 0.05, 0.025, 0.0125)
COVERAGE_ALPHAS = (0.4, 0.2, 0.1, 0.05, 0.025)
ABEL_TRUNCATION = 1e-8
ABEL_MIN_PAIRS = 4

# Boundary values G(x, x; lambda + i eps)
DEFAULT_EPS_SCHEDULE = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
WEYL_DEFAULT_CUTOFF = 50.0
CUTOFF_TOL = 1e-6
WRONSKIAN_TOL = 1e-14

# Jacobi continued fractions
CF_DEPTH_FACTOR = 20.0
CF_DEPTH_CAP = 10**6
CF_TOL = 1e-6
JACOBI_TIE_TOL = 1e-12

# Step-function xi
JUMP_MERGE_TOL = 1e-7
INTERLACING_TOL = 1e-8

# Periodic band structure
CLOSED_GAP_TOL = 1e-9
FOURIER_MIN_MODES = 48
DISCRIMINANT_POINTS_PER_BAND = 24

# Scattering
SHORT_RANGE_TOL = 1e-8
NEGLIGIBLE_POTENTIAL = 1e-16

# Borg demonstration
EVENNESS_TOL = 1e-10

# Reports
FLOAT_FORMAT = "%.12g"
REPORT_SCHEMA_VERSION = "1.0"
