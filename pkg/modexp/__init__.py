"""Bounds on the exponential decay rate of parameter estimation error over a discrete memoryless channel."""

__version__ = "0.1.0"
