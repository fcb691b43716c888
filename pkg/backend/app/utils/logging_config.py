"""Logging setup for command-line entry points."""
import logging

_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def resolve_log_level(name: str, default: int = logging.INFO) -> int:
    level = logging.getLevelName((name or "").strip().upper())
    return level if isinstance(level, int) else default


def configure_logging(level: str = "INFO") -> int:
    """Configure root logging once; returns the numeric level applied."""
    numeric = resolve_log_level(level)
    logging.basicConfig(level=numeric, format=_FORMAT)
    logging.getLogger().setLevel(numeric)
    return numeric
