"""Spike patterns of the 1D Keller-Segel model with logistic growth, small d2."""

from .model import ModelParams, classify_d1, load_params

__all__ = ["ModelParams", "classify_d1", "load_params"]
__version__ = "0.1.0"
