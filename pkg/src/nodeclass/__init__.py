"""Node-level network classification toolkit."""

__version__ = "0.1.0"
