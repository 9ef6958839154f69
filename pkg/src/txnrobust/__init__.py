"""Robustness checking between weak transactional consistency models."""

__version__ = "0.1.0"

from .models import Model, RobustnessVerdict  # noqa: F401
