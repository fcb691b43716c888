"""Registry mapping channel type names to component factories."""
from __future__ import annotations

import logging
import threading
from typing import Callable, Dict, List, Optional

from app.models.channel import ChannelId, ChannelInfo, ChannelType
from app.models.status import StatusCode
from app.services.channel_spi import ChannelCallback, ChannelComponent

logger = logging.getLogger(__name__)

ChannelFactory = Callable[[ChannelInfo, ChannelId, ChannelCallback], ChannelComponent]


class FactoryRegistry:
    """Registry for channel component factories.

    A factory is any callable taking ``(info, channel_id, callback)`` and
    returning an uncreated ChannelComponent; component classes qualify as-is.
    """

    def __init__(self) -> None:
        self._factories: Dict[str, ChannelFactory] = {}
        self._lock = threading.Lock()

    def register(self, type_name: str, factory: ChannelFactory) -> StatusCode:
        """Register a factory under ``type_name``.

        Returns CHANNEL_BADINFO for an empty name, a non-callable factory, or a
        name that is already registered.
        """
        name = (type_name or "").strip().lower()
        if not name or not callable(factory):
            return StatusCode.CHANNEL_BADINFO
        with self._lock:
            if name in self._factories:
                logger.warning("Channel type '%s' is already registered", name)
                return StatusCode.CHANNEL_BADINFO
            self._factories[name] = factory
        logger.debug("Registered channel type '%s'", name)
        return StatusCode.CHANNEL_OK

    def resolve(self, type_name: str) -> Optional[ChannelFactory]:
        with self._lock:
            return self._factories.get((type_name or "").strip().lower())

    def names(self) -> List[str]:
        with self._lock:
            return sorted(self._factories)

    def __contains__(self, type_name: str) -> bool:
        return self.resolve(type_name) is not None


def register_builtin_channels(registry: FactoryRegistry) -> FactoryRegistry:
    """Register the six built-in channel components."""
    from app.services.soap_channels import SoapClientChannel, SoapServerChannel
    from app.services.tcp_channels import TcpClientChannel, TcpServerChannel
    from app.services.udp_channels import UdpClientChannel, UdpServerChannel

    builtins = {
        ChannelType.TCP_SERVER: TcpServerChannel,
        ChannelType.TCP_CLIENT: TcpClientChannel,
        ChannelType.UDP_SERVER: UdpServerChannel,
        ChannelType.UDP_CLIENT: UdpClientChannel,
        ChannelType.SOAP_SERVER: SoapServerChannel,
        ChannelType.SOAP_CLIENT: SoapClientChannel,
    }
    for channel_type, component in builtins.items():
        registry.register(channel_type.value, component)
    return registry


def default_registry() -> FactoryRegistry:
    """A fresh registry with the built-in types pre-registered."""
    return register_builtin_channels(FactoryRegistry())
