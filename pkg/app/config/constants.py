"""Configuration constants for the hypothesis test designer."""
import os
from pathlib import Path

# Load environment variables from .env file
try:
    from dotenv import load_dotenv
    env_path = Path(__file__).resolve().parents[2] / ".env"
    if env_path.exists():
        load_dotenv(env_path)
except ImportError:
    pass

ROOT = Path(__file__).resolve().parents[2]
CONFIG_DIR = Path(__file__).resolve().parent
SCENARIO_DIR = CONFIG_DIR / "scenarios"
COST_TABLE_FILE = CONFIG_DIR / "cost_table.json"
DATA_DIR = ROOT / "data"
LOG_DIR = Path(os.getenv("LOG_DIR", str(ROOT / "logs")))
LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING")

# Monte Carlo
DEFAULT_SEED = int(os.getenv("HYPDESIGN_SEED", "20240517"))
DEFAULT_TRIALS = int(os.getenv("HYPDESIGN_TRIALS", "1000000"))
BLOCK_TRIALS = int(os.getenv("HYPDESIGN_BLOCK_TRIALS", "10000"))
MAX_WORKERS = int(os.getenv("MAX_WORKERS", "1"))
MIN_TRIALS = 1000
CI_SIGMAS = 3.0

# Reporting
OUTPUT_DIGITS = int(os.getenv("OUTPUT_DIGITS", "6"))
DEFAULT_NP_SIZE = 0.05

# Numerical tolerances
MASS_TOLERANCE = 1e-12          # tabulated masses / finite instances must sum to 1 within this
LLR_TIE_TOLERANCE = 1e-10       # |ln L - t| below this counts as the test boundary
POISSON_TAIL_MASS = 1e-14       # residual mass dropped when enumerating infinite supports
DISCRETIZE_TAIL_MASS = 1e-12
MIN_CAPTURED_MASS = 0.99
QUANTILE_TOLERANCE = 1e-10
MAX_CONVOLUTION_STATES = 250_000

# Relaxation oracle
BRUTE_FORCE_MAX_ATOMS = 22
RELAXATION_TOLERANCE = 1e-12
DEFAULT_INSTANCES = 100
DEFAULT_MAX_ATOMS = 12
DEFAULT_DIRECTIONS = 1000
