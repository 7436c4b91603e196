"""Symbolic-numeric toolkit for k-contact Lagrangian field theories."""

from .chart import BundleChart, ChartError, Kernel

__all__ = ["BundleChart", "ChartError", "Kernel"]
__version__ = "0.1.0"
