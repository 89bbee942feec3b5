"""Aerial vs. ground terrain-property learning for ground robots."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
