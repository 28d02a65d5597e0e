"""Plain-text to Cooklang conversion and evaluation."""

__version__ = "0.1.0"
