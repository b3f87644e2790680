"""imageteller: illustrated, chapter-structured stories from image sequences."""

__version__ = "0.1.0"
