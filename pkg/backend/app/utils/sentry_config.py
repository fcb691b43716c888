"""Sentry error tracking configuration."""
import sentry_sdk
from sentry_sdk.integrations.logging import LoggingIntegration
import logging

from app.config import settings

logger = logging.getLogger(__name__)


def init_sentry(dsn: str = "", environment: str = "") -> bool:
    """
    Initialize Sentry error tracking.

    Called once by channelctl at startup. Without a DSN (argument or
    SENTRY_DSN) tracking stays disabled and the capture helpers below are
    no-ops.

    Returns True when Sentry was initialized.
    """
    sentry_dsn = dsn or settings.sentry_dsn
    env = environment or settings.environment

    # Only initialize if DSN is provided
    if not sentry_dsn:
        logger.info("Sentry DSN not configured. Error tracking disabled.")
        return False

    sentry_sdk.init(
        dsn=sentry_dsn,
        environment=env,
        sample_rate=1.0,
        integrations=[
            LoggingIntegration(
                level=logging.INFO,  # Breadcrumbs from info and above
                event_level=logging.ERROR  # Send errors to Sentry
            ),
        ],
        attach_stacktrace=True,
        send_default_pii=False,
        ignore_errors=[
            KeyboardInterrupt,
        ],
        before_send=before_send_filter,
    )

    logger.info(f"Sentry initialized for environment: {env}")
    return True


def before_send_filter(event, hint):
    """
    Drop info-level events and strip payload bytes before sending.

    Channel payloads are opaque application data and never leave the process.
    """
    if event.get("level") == "info":
        return None

    extra = event.get("extra") or {}
    if "payload" in extra:
        extra["payload"] = "[Filtered]"

    event.setdefault("tags", {})
    event["tags"]["component"] = "channel-platform"
    return event


def capture_exception(exception: Exception, context: dict = None):
    """
    Manually capture an exception with optional tag context.

    Example:
        capture_exception(e, {"channel_id": 7, "driver": "reader"})
    """
    if context:
        with sentry_sdk.push_scope() as scope:
            for key, value in context.items():
                scope.set_tag(key, value)
            sentry_sdk.capture_exception(exception)
    else:
        sentry_sdk.capture_exception(exception)
