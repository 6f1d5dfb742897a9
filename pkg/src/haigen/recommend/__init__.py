from .encoder import ToyVisionEncoder, embed
from .index import (
    EmbeddingIndex, EmbeddingVector, SketchIndexEntry, cosine_similarity,
    index_from_library, top_k,
)

__all__ = [
    "ToyVisionEncoder", "embed",
    "EmbeddingIndex", "EmbeddingVector", "SketchIndexEntry",
    "cosine_similarity", "index_from_library", "top_k",
]
