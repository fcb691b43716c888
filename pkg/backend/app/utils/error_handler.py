"""Error handling utilities for channel operations."""
from functools import wraps
from typing import Optional
from pydantic import ValidationError
import logging

from app.models.status import StatusCode, status_name

logger = logging.getLogger(__name__)


class ChannelError(Exception):
    """Failure carrying the status code the platform interface reports for it.

    ``http_status`` is set by the HTTP parser so a server can answer with the
    matching response (400 for malformed input, 501 for unsupported framing).
    """

    def __init__(
        self,
        status: StatusCode,
        detail: str = "",
        *,
        http_status: Optional[int] = None,
    ) -> None:
        self.status = StatusCode(status)
        self.detail = detail
        self.http_status = http_status
        super().__init__(f"{status_name(self.status)}: {detail}" if detail else status_name(self.status))


def status_from_exception(exc: BaseException, default: StatusCode = StatusCode.CHANNEL_SOCKETERR) -> StatusCode:
    """Map an exception to the status code an operation should return."""
    if isinstance(exc, ChannelError):
        return exc.status
    if isinstance(exc, OSError):
        return StatusCode.CHANNEL_SOCKETERR
    if isinstance(exc, (ValidationError, ValueError, TypeError)):
        return StatusCode.CHANNEL_BADINFO
    return default


def handle_channel_errors(operation_name: str, default: StatusCode = StatusCode.CHANNEL_SOCKETERR):
    """
    Decorator turning exceptions raised by a status-returning operation into codes.

    Usage:
        @handle_channel_errors("create tcp-client channel")
        def create(self) -> StatusCode:
            ...

    The wrapped function returns its own value on success. ChannelError and
    OSError are expected failures and log at WARNING; anything else is logged
    with a traceback.
    """
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except (ChannelError, OSError, ValidationError, ValueError) as e:
                code = status_from_exception(e, default)
                logger.warning(f"Failed to {operation_name}: {e} -> {status_name(code)}")
                return code
            except Exception as e:
                logger.error(f"Failed to {operation_name}: {e}", exc_info=True)
                return default
        return wrapper
    return decorator
