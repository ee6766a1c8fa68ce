"""Atomic-ensemble quantum computing: states, optics, detectors, heralded
protocols, blockade numerics, error budgets and graph states."""

__version__ = "0.1.0"
