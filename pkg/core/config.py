# core/config.py
# Loads logging settings from the environment and holds the numeric defaults.

import os
from dotenv import load_dotenv

# Load environment variables from a .env file
load_dotenv()

# --- Logging ---
# Only logging is configurable through the environment. Everything that can
# change a numerical result is passed as a command-line flag.
LOG_LEVEL = os.getenv("MOSLAB_LOG_LEVEL", "INFO").upper()
LOG_FILE = os.getenv("MOSLAB_LOG_FILE") or None
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"

# --- Linear algebra ---
SVD_MAX_SWEEPS = 100
SVD_TOLERANCE = 1e-12
SVD_ALGORITHM = "one-sided-jacobi+qr"
RANK_THRESHOLD_RULE = "max(rows,cols)*eps*sigma_max"

# --- Parameter initialisation ---
INIT_RANGE = 0.1
FORGET_BIAS = 1.0

# --- Training ---
SGD_LR = 1.0
GRAD_CLIP = 5.0
ADAM_LR = 1e-3
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
TRAIN_EPOCHS = 3
TRAIN_BATCH_SIZE = 20
TRAIN_BPTT_LEN = 20

# --- Synthetic fitting ---
FIT_LR = 0.02
# cosine decay to FIT_LR * FIT_LR_FINAL over the run; 1.0 keeps the rate constant
FIT_LR_FINAL = 0.01
FIT_ITERATIONS = 5000
FIT_RESTARTS = 3
FIT_LOG_EVERY = 100
LANGUAGE_SCALE = 4.0

# --- Analysis ---
RANK_MAX_ROWS = 2000
KLD_PAIRS = 10_000
SPECTRUM_GRID = 101
BENCH_WARMUP_STEPS = 5
BENCH_TIMED_STEPS = 20

# --- Runtime ---
DEFAULT_THREADS = 1


# --- Validation ---
def validate_config():
    """Checks the environment-provided settings."""
    valid_levels = {"CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"}
    if LOG_LEVEL not in valid_levels:
        raise ValueError(f"MOSLAB_LOG_LEVEL must be one of {sorted(valid_levels)}, got {LOG_LEVEL!r}.")
