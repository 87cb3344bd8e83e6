"""Exact simulator for Sidon rank-one towers and their Gaussian suspensions."""

__version__ = "0.1.0"
