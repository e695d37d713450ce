"""Principal component copulas."""

__version__ = "0.1.0"
