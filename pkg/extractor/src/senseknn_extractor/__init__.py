"""Per-target contextual embedding extraction for the senseknn store format."""

__version__ = "0.1.0"
