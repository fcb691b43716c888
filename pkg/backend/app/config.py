"""Application configuration settings."""
from pydantic import AliasChoices, Field
from pydantic_settings import BaseSettings
from pathlib import Path

# Find .env file relative to backend directory, not current working directory
# This ensures .env is found regardless of where the command is run from
BACKEND_DIR = Path(__file__).parent.parent
ENV_FILE = BACKEND_DIR / ".env"


class Settings(BaseSettings):
    """Platform defaults loaded from environment variables.

    Every value here that a channel reads can be overridden per channel through
    ``ChannelInfo.options``; the setting is only the fallback.
    """

    # Outgoing queue (per channel)
    channel_queue_capacity: int = 1024

    # TCP channels
    tcp_read_buffer: int = 64 * 1024
    tcp_nodelay: bool = True
    connect_timeout_seconds: float = 10.0

    # UDP channels
    # Peers silent for longer than this are forgotten. 0 disables expiry.
    udp_idle_timeout_seconds: float = 60.0
    # Gap between datagrams written by a udp-client. Keeps loopback transfers
    # inside the receiver's socket buffer.
    udp_send_interval_seconds: float = 0.0005
    udp_receive_buffer: int = 4 * 1024 * 1024

    # SOAP channels
    # The URN comes from the calculator sample the envelope layout was taken
    # from; override it with the soap_urn channel option.
    soap_urn: str = "urn:simple-calc"
    soap_http_path: str = "/"
    soap_reply_timeout_seconds: float = 0.05
    soap_client_timeout_seconds: float = 30.0

    # Handler
    # 0 keeps the incoming queue unbounded without warnings.
    incoming_high_water: int = 0
    # How often blocking drivers wake up to check for shutdown.
    driver_poll_interval_seconds: float = 0.2

    # channelctl
    cli_chunk_size: int = 16384
    # CHANNELCTL_LOG overrides --log when set.
    channelctl_log: str = Field(
        default="",
        validation_alias=AliasChoices("CHANNELCTL_LOG", "channelctl_log"),
    )

    # Monitoring
    sentry_dsn: str = ""
    environment: str = "development"

    class Config:
        # Use absolute path to .env file relative to backend directory
        # Falls back to ".env" in current directory if backend/.env doesn't exist
        env_file = str(ENV_FILE) if ENV_FILE.exists() else ".env"
        case_sensitive = False
        extra = "ignore"


# Global settings instance
settings = Settings()
