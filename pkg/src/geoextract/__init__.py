"""Literal-toponym extraction and agentic geocoding for humanitarian text."""

from .corpus import Document, GoldGeocode, SelectionRecord, TagSpan
from .prompts import OutputFormat

__version__ = "0.1.0"

__all__ = [
    "Document",
    "GoldGeocode",
    "OutputFormat",
    "SelectionRecord",
    "TagSpan",
    "__version__",
]
