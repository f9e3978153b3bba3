"""Patch description generation: context extraction, description clustering,
dual-objective sequence-to-sequence training and evaluation."""

__version__ = "0.1.0"
