"""Multi-stage distributionally robust shortest path toolkit."""

__version__ = "0.1.0"
