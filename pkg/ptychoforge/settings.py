"""
Process-wide settings: environment variables, worker count, logging.

Environment values come from os.environ first (a local .env file is loaded
on import), so the same code runs from a shell, a job script or CI.

    PTYCHOFORGE_THREADS    worker cap for parallel sections (default 1)
    PTYCHOFORGE_LOG_LEVEL  logging level name (default INFO)
"""

import logging
import os

from dotenv import load_dotenv
from tqdm import tqdm

load_dotenv()

LOGGER_NAME = "ptychoforge"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

logger = logging.getLogger(LOGGER_NAME)


def env_str(name: str, default: str) -> str:
    """Read a string setting from the environment, falling back to `default`."""
    val = os.environ.get(name)
    if val:
        return val
    return default


def env_int(name: str, default: int) -> int:
    raw = env_str(name, str(default))
    try:
        return int(raw)
    except ValueError:
        logger.warning("Ignoring non-integer %s=%r; using %d", name, raw, default)
        return default


def worker_count(deterministic: bool = False) -> int:
    """Number of worker threads parallel sections may use.

    Deterministic runs are always serial.
    """
    if deterministic:
        return 1
    return max(1, env_int("PTYCHOFORGE_THREADS", 1))


def configure_logging(level: str | None = None) -> None:
    """Install a single stream handler on the package logger."""
    level_name = (level or env_str("PTYCHOFORGE_LOG_LEVEL", "INFO")).upper()
    logger.setLevel(level_name)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)


def progress(iterable, desc: str, total: int | None = None):
    """Wrap a loop in a tqdm bar, silenced when logging is above INFO."""
    quiet = logger.getEffectiveLevel() > logging.INFO
    return tqdm(iterable, desc=desc, total=total, disable=quiet, leave=False)
