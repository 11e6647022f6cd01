"""Detectability of a minimal graph neural network on the stochastic block model."""

__version__ = "0.1.0"
