"""Closed-form tracking performance limits over bandwidth-limited noisy channels."""

__version__ = "0.1.0"
