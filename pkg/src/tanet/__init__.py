"""Target-aware attention for joint local/global search tracking."""

__version__ = "0.1.0"
