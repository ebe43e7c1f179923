"""Functional (48-dim) and structural (16-dim) features of a transaction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .callgraph import N_MOTIFS
from .embedding import EmbeddingModel
from .normalize import NormalizedCall

SLOTS = 8
EMBED_DIM = 6
FUNCTIONAL_DIM = SLOTS * EMBED_DIM
STRUCTURAL_DIM = N_MOTIFS
FUSED_DIM = FUNCTIONAL_DIM + STRUCTURAL_DIM

FEATURE_COLUMNS = {
    "functional": np.arange(0, FUNCTIONAL_DIM),
    "structural": np.arange(FUNCTIONAL_DIM, FUSED_DIM),
    "fused": np.arange(0, FUSED_DIM),
}


def functional_feature(call: NormalizedCall, model: EmbeddingModel) -> np.ndarray:
    if model.dim != EMBED_DIM:
        raise ValueError(f"embedding dimension {model.dim} != {EMBED_DIM}")
    out = np.zeros(FUNCTIONAL_DIM)
    for slot, tok in enumerate(call.tokens[:SLOTS]):
        out[slot * EMBED_DIM:(slot + 1) * EMBED_DIM] = model.vector(tok)
    return out


@dataclass(frozen=True)
class FeatureVector:
    functional: np.ndarray
    structural: np.ndarray

    def __post_init__(self):
        if self.functional.shape != (FUNCTIONAL_DIM,) or self.structural.shape != (STRUCTURAL_DIM,):
            raise ValueError("feature vector has wrong dimensions")
        if (self.structural < 0).any():
            raise ValueError("motif counts must be non-negative")

    @property
    def fused(self) -> np.ndarray:
        return np.concatenate([self.functional, self.structural.astype(np.float64)])


def structural_feature(census: np.ndarray, degraded: bool = False) -> np.ndarray:
    """Motif counts; without call traces only the two-node motifs are trusted."""
    out = np.asarray(census, dtype=np.int64).copy()
    if degraded:
        out[2:] = 0
    return out
