"""
app/config.py - Runtime settings loaded from the environment (and .env, if present).

Accessors read the environment on every call so that a test (or a long running
API process after a reload) always sees the current value.
"""
import logging
import os

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_MAX_CONTEXTS = 2 ** 22
DEFAULT_QUERY_TIMEOUT = 300.0
DEFAULT_DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")


def _positive_number(name: str, default, cast):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = cast(raw)
    except ValueError:
        logger.warning(f"⚠️ Ignoring {name}={raw!r}: not a number, using {default}")
        return default
    if value <= 0:
        logger.warning(f"⚠️ Ignoring {name}={raw!r}: must be positive, using {default}")
        return default
    return value


def max_contexts() -> int:
    """Scale guard: largest context space (or equation domain) the engine will enumerate."""
    return _positive_number("CEX_MAX_CONTEXTS", DEFAULT_MAX_CONTEXTS, int)


def query_timeout() -> float:
    return _positive_number("CEX_QUERY_TIMEOUT", DEFAULT_QUERY_TIMEOUT, float)


def log_level() -> str:
    return os.getenv("CEX_LOG_LEVEL", "INFO").upper()


def data_dir() -> str:
    return os.getenv("CEX_DATA_DIR", DEFAULT_DATA_DIR)


def configure_logging(level: str = None) -> None:
    logging.basicConfig(level=level or log_level(), format="%(levelname)s: %(message)s")
