"""Word sense disambiguation by cosine-kNN over stored contextual embeddings."""

__version__ = "0.1.0"
