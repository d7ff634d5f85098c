"""Adaptive-mesh reconstruction of a wave-speed coefficient from boundary data."""

__version__ = "0.1.0"
