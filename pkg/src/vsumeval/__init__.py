"""Reference-based video summary evaluation and its randomization test."""

__version__ = "0.1.0"
