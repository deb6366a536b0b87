"""salbench: benchmark harness for saliency-map evaluation metrics."""

from .sentinel import UNDEFINED, is_undefined

__all__ = ["UNDEFINED", "is_undefined"]
__version__ = "0.1.0"
