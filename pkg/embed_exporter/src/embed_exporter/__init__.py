"""Phrase-to-embedding export tool.

Produces the phrase -> 768-dimensional embedding JSON file consumed by the
drumgen corpus builder and generator, using a pretrained BERT-family
language model.
"""

__version__ = "0.1.0"

from .exporter import EMBEDDING_DIM, ExporterError, export, load_backend

__all__ = ["EMBEDDING_DIM", "ExporterError", "export", "load_backend", "__version__"]
