"""Test package for the channel platform."""
