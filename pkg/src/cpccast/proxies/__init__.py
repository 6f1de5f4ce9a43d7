"""Competition-proxy construction: semantic embeddings and kNN graph,
DTW behavioral neighborhoods, and geographic-intent tagging."""

from .embeddings import (EmbeddingMatrix, fallback_embeddings, hash_embed,
                         load_embeddings, save_embeddings)
from .semgraph import SemanticGraph, build_semantic_graph, load_graph, save_graph
from .dtw import (DtwNeighborhood, build_dtw_neighborhoods, dtw_distance,
                  load_neighborhoods, save_neighborhoods)
from .geo import (Gazetteer, GeoTag, load_bundled_gazetteer, load_geo_tags,
                  save_geo_tags, tag_geography)

__all__ = [
    "EmbeddingMatrix", "fallback_embeddings", "hash_embed",
    "load_embeddings", "save_embeddings",
    "SemanticGraph", "build_semantic_graph", "load_graph", "save_graph",
    "DtwNeighborhood", "build_dtw_neighborhoods", "dtw_distance",
    "load_neighborhoods", "save_neighborhoods",
    "Gazetteer", "GeoTag", "load_bundled_gazetteer", "load_geo_tags",
    "save_geo_tags", "tag_geography",
]
