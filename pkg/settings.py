"""
Process-level settings loaded from the environment (.env supported)
"""
import logging
import os
from typing import Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

LOG_LEVEL = os.getenv("TFCH_LOG_LEVEL", "INFO")
LOG_FORMAT = os.getenv(
    "TFCH_LOG_FORMAT", "%(asctime)s %(levelname)s %(name)s: %(message)s"
)
MEMORY_CAP_GIB = float(os.getenv("TFCH_MEMORY_CAP_GIB", "4"))
DEFAULT_SEED = int(os.getenv("TFCH_DEFAULT_SEED", "42"))


def configure_logging(level: Optional[str] = None) -> None:
    """
    Configure root logging once for the CLI

    Args:
        level: Level name overriding TFCH_LOG_LEVEL
    """
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format=LOG_FORMAT,
    )


def memory_cap_bytes() -> int:
    """Increment-history size above which a warning is logged"""
    return int(MEMORY_CAP_GIB * 1024 ** 3)
