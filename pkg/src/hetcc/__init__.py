"""Learned per-subproblem optimizer selection for cooperative coevolution."""

__version__ = "0.1.0"
