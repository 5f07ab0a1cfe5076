"""
Configuration module for the PSWF reconstruction toolkit.

This module loads environment variables and exposes configuration
settings for the entire package: runtime settings that may be overridden
from a `.env` file, and the numerical constants that the PSWF, Radon and
reconstruction layers share.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# ============================================================================
# Runtime Settings
# ============================================================================

# Run history database (sweep runs recorded with --record)
DB_URL = os.getenv("PSWF_DB_URL", "sqlite:///pswf_runs.db")

# Default output directory for CLI runs
OUTPUT_DIR = Path(os.getenv("PSWF_OUTPUT_DIR", "./runs"))

# Logging
LOG_LEVEL = os.getenv("PSWF_LOG_LEVEL", "INFO").upper()

# Worker threads for angle loops and sweep jobs
DEFAULT_THREADS = int(os.getenv("PSWF_THREADS", str(os.cpu_count() or 1)))

# Eigenpairs with lambda below this floor are not certified in double precision
LAMBDA_FLOOR = float(os.getenv("PSWF_LAMBDA_FLOOR", "1e-13"))

# Project paths
PROJECT_ROOT = Path(__file__).parent.parent

# ============================================================================
# PSWF Basis
# ============================================================================

LEGENDRE_PAD = 30           # N_leg = 2 * n_request + ceil(c) + LEGENDRE_PAD
QUADRATURE_PAD = 10         # K = N_leg + ceil(c) + QUADRATURE_PAD
TAIL_TOLERANCE = 1e-15      # trailing Legendre coefficients of row n_max
TAIL_WIDTH = 4              # number of trailing coefficients inspected
MU_DENOMINATOR_FLOOR = 1e-8 # |psi_n(x*)| below this is a degenerate mu

# ============================================================================
# Regularization Rule
# ============================================================================

TAU_TOLERANCE = 1e-12
TAU_MAX_ITER = 100

# ============================================================================
# Radon / Grids
# ============================================================================

MIN_ANGLES = 8              # inverse Radon needs at least this many angles in [0, pi)
S_GRID_FACTOR = 4           # s-grid has S_GRID_FACTOR * M points
T_POINTS_PER_WAVE = 16      # backprojection table resolution per 2*pi/s_max
DEFAULT_GRID_SIZE = 256     # G of the error-metric grid
GRID_EXTENT_FACTOR = 2.0    # error grid covers [-2 sigma, 2 sigma]^2
DEFAULT_OFFSETS = 256       # M, sinogram samples in y
DEFAULT_ANGLES = 90         # K, angles in [0, pi)
SCALING_SLACK = 0.02        # discretization slack for the dilation bounds
SUPPORT_TOLERANCE = 1e-10   # |f| below this fraction of max|f| counts as zero

# ============================================================================
# Sweep Defaults
# ============================================================================

DEFAULT_BETA = 0.5
DEFAULT_MU = 0.5
