"""Compact watertight building reconstruction from airborne point clouds."""

__version__ = "0.1.0"
