"""
Models module - fit model kinds and their registry.
"""

from .model_registry import ModelKind, ModelSpec

__all__ = ["ModelKind", "ModelSpec"]
