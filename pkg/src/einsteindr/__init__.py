"""Graph-based dimension reduction for tensor data via the Einstein product."""

__version__ = "0.1.0"
