"""Stroke-level sketch VAE with MLP stroke segmentation and appearance baselines."""

__version__ = "0.1.0"

from .sketch import BBox, CATEGORY_CLASSES, ParseError, Sketch, Stroke
from .vae import VaeConfig, VaeModel

__all__ = [
    "BBox", "CATEGORY_CLASSES", "ParseError", "Sketch", "Stroke",
    "VaeConfig", "VaeModel", "__version__",
]
