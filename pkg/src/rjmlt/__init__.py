"""Reversible-jump Metropolis light transport."""
__version__ = "0.1.0"
