"""Shared vocabulary: status codes, endpoints, channel info and messages."""
