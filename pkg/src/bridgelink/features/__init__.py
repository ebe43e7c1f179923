"""Deposit-identification features: normalized calldata embeddings and call-graph motifs."""

from .callgraph import TRIAD_ORDER, Edge, TokenAwareCallGraph, build_call_graph, motif_census
from .embedding import EmbeddingModel, EmbeddingParams, train_embeddings
from .normalize import DEFAULT_SYNONYMS, DEFAULT_TABLE, NormalizedCall, SynonymTable, canonical_name, normalize
from .vector import (
    FEATURE_COLUMNS, FUNCTIONAL_DIM, FUSED_DIM, STRUCTURAL_DIM, FeatureVector, functional_feature,
    structural_feature,
)

__all__ = [
    "TRIAD_ORDER", "Edge", "TokenAwareCallGraph", "build_call_graph", "motif_census",
    "EmbeddingModel", "EmbeddingParams", "train_embeddings",
    "DEFAULT_SYNONYMS", "DEFAULT_TABLE", "NormalizedCall", "SynonymTable", "canonical_name", "normalize",
    "FEATURE_COLUMNS", "FUNCTIONAL_DIM", "FUSED_DIM", "STRUCTURAL_DIM", "FeatureVector", "functional_feature",
    "structural_feature",
]
