"""Embedding training, storage, and exact nearest-neighbor queries."""
from .cbow import CbowParams, encode_streams, train_embeddings
from .neighbors import (
    METRICS,
    NeighborTable,
    cosine_distance,
    nearest_neighbors,
    neighborhood,
)
from .space import EmbeddingSpace, load_binary, load_text, save_binary, save_text

__all__ = [
    "CbowParams",
    "encode_streams",
    "train_embeddings",
    "METRICS",
    "NeighborTable",
    "cosine_distance",
    "nearest_neighbors",
    "neighborhood",
    "EmbeddingSpace",
    "load_binary",
    "load_text",
    "save_binary",
    "save_text",
]
