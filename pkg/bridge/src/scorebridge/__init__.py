"""HTTP bridge exposing a causal LM through the tokmarg scoring protocol."""

from .app import create_app
from .scorers import TransformerScorer, UniformScorer

__all__ = ["create_app", "TransformerScorer", "UniformScorer"]
