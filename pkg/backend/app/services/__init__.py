"""Channel components, the registry and the channel handler."""
