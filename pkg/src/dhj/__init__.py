"""Exact combinatorics of the density Hales-Jewett theorem at desk scale."""

__version__ = "0.1.0"
