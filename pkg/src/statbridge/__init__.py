"""Host and guest statistical bridge."""

__version__ = "0.1.0"
