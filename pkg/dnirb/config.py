"""
Configuration for DnIRB
=======================

Environment-driven settings and key=value config files:
1. Settings loaded from the environment (and an optional .env file)
2. BLAS thread pinning for reproducible single-threaded runs
3. key=value config file parsing for the command line
"""

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

from dotenv import load_dotenv

from dnirb.errors import ConfigurationError

logger = logging.getLogger(__name__)

load_dotenv()

BLAS_THREAD_VARS = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS")


@dataclass
class Settings:
    """Process-wide settings read from DNIRB_* environment variables"""

    threads: int = 1
    log_level: str = "INFO"
    log_file: Optional[str] = None

    @classmethod
    def from_env(cls) -> "Settings":
        threads_raw = os.getenv("DNIRB_THREADS", "1")
        try:
            threads = max(1, int(threads_raw))
        except ValueError:
            logger.warning(f"Ignoring non-integer DNIRB_THREADS={threads_raw!r}, using 1")
            threads = 1
        return cls(
            threads=threads,
            log_level=os.getenv("DNIRB_LOG_LEVEL", "INFO").upper(),
            log_file=os.getenv("DNIRB_LOG_FILE") or None,
        )


def pin_blas_threads() -> None:
    """Pin numpy's BLAS pools to DNIRB_THREADS unless already set"""
    threads = os.getenv("DNIRB_THREADS", "1")
    for var in BLAS_THREAD_VARS:
        os.environ.setdefault(var, threads)


def load_config_file(path: Path) -> Dict[str, str]:
    """
    Parse a key=value config file.

    Blank lines and lines starting with '#' are skipped. Keys are normalised
    to click's parameter names (dashes become underscores, lower case).
    """
    values: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip().lstrip("-").replace("-", "_").lower()
            if not key:
                raise ConfigurationError(f"{path}:{lineno}: empty key")
            values[key] = value.strip()
    logger.debug(f"Loaded {len(values)} config entries from {path}")
    return values


settings = Settings.from_env()
