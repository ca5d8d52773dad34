"""Cuspidality analysis of serial 3R and planar/spherical parallel manipulators."""

__version__ = "0.1.0"
