"""Configuration settings for the NBNet denoiser.

This module centralizes environment variable access. Values come from the
process environment, optionally populated from a `.env` file at the
repository root, and are read once at import.
"""
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

load_dotenv(dotenv_path=Path(__file__).resolve().parents[2] / ".env")

LOG_LEVEL = os.getenv("NBNET_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Numerics
GRAM_EPS = float(os.getenv("NBNET_GRAM_EPS", "1e-4"))
LEAKY_SLOPE = float(os.getenv("NBNET_LEAKY_SLOPE", "0.2"))

# Data and checkpoints
DATA_ROOT: Optional[str] = os.getenv("NBNET_DATA_ROOT")
CHECKPOINT_DIR = os.getenv("NBNET_CHECKPOINT_DIR", "checkpoints")

# Pipeline
NUM_WORKERS = int(os.getenv("NBNET_NUM_WORKERS", "0"))
SEED = int(os.getenv("NBNET_SEED", "0"))
RUN_SLOW = os.getenv("NBNET_RUN_SLOW", "0") == "1"
