"""Character-level disease entity tagging with positive/negative modality."""

__version__ = "0.1.0"
