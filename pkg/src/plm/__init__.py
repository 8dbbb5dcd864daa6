"""Perpetual Learning Machine: a storage classifier and a recall synthesiser
trained on each other's output, with biased recall statistics."""

__version__ = "0.1.0"
