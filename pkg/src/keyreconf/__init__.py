"""Keyboard reconfiguration engine with shuffled password entry and a
timing/guessability trade-off model."""

__version__ = "0.1.0"
