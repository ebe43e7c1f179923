"""Skip-gram with negative sampling over normalized calls.

Each normalized call is one sentence and the context window spans the whole
sentence. Training is mini-batched SGD over shuffled (center, context)
pairs with a linearly decaying learning rate; everything is driven by one
seeded generator so a fixed seed reproduces the vectors bit for bit.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .normalize import NormalizedCall

MODEL_VERSION = 1


@dataclass(frozen=True)
class EmbeddingParams:
    dim: int = 6
    negatives: int = 5
    epochs: int = 15
    lr: float = 0.025
    min_lr: float = 0.0001 * 0.025
    batch_size: int = 64
    ns_exponent: float = 0.75
    min_count: int = 1  # rarer tokens are left out of the vocabulary (zero vector)


class EmbeddingModel:
    def __init__(self, vocab: Sequence[str], vectors: np.ndarray, params: EmbeddingParams, seed: int):
        if vectors.shape != (len(vocab), params.dim):
            raise ValueError(f"vectors shape {vectors.shape} does not match vocab/dim")
        self.vocab = list(vocab)
        self.index = {w: i for i, w in enumerate(self.vocab)}
        self.vectors = vectors
        self.params = params
        self.seed = seed

    @property
    def dim(self) -> int:
        return self.params.dim

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def vector(self, token: str) -> np.ndarray:
        i = self.index.get(token)
        if i is None:
            return np.zeros(self.dim)
        return self.vectors[i]

    def cosine(self, a: str, b: str) -> float:
        va, vb = self.vector(a), self.vector(b)
        den = np.linalg.norm(va) * np.linalg.norm(vb)
        return float(va @ vb / den) if den else 0.0

    def to_json(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "seed": self.seed,
            "params": asdict(self.params),
            "vocab": self.vocab,
            # repr round-trips float64 exactly
            "vectors": [[repr(float(x)) for x in row] for row in self.vectors],
        }

    @classmethod
    def from_json(cls, d: dict) -> "EmbeddingModel":
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported embedding model version {d.get('version')!r}")
        params = EmbeddingParams(**d["params"])
        vecs = np.array([[float(x) for x in row] for row in d["vectors"]], dtype=np.float64)
        return cls(d["vocab"], vecs.reshape(len(d["vocab"]), params.dim), params, d["seed"])

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EmbeddingModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30, 30)))


def train_embeddings(corpus: Sequence[NormalizedCall], params: EmbeddingParams = EmbeddingParams(),
                     seed: int = 0) -> EmbeddingModel:
    if not corpus:
        raise ValueError("cannot train embeddings on an empty corpus")
    counts = Counter(tok for call in corpus for tok in call.tokens)
    counts = Counter({w: c for w, c in counts.items() if c >= params.min_count})
    if not counts:
        raise ValueError(f"no token occurs at least {params.min_count} times")
    vocab = sorted(counts, key=lambda w: (-counts[w], w))
    index = {w: i for i, w in enumerate(vocab)}
    rng = np.random.default_rng(seed)
    dim = params.dim
    w_in = (rng.random((len(vocab), dim)) - 0.5) / dim
    w_out = np.zeros((len(vocab), dim))

    centers, contexts = [], []
    for call in corpus:
        ids = [index[t] for t in call.tokens if t in index]
        for i, c in enumerate(ids):
            for j, o in enumerate(ids):
                if i != j:
                    centers.append(c)
                    contexts.append(o)
    centers_a = np.array(centers, dtype=np.int64)
    contexts_a = np.array(contexts, dtype=np.int64)
    n_pairs = len(centers_a)
    if n_pairs == 0:
        return EmbeddingModel(vocab, w_in, params, seed)

    freq = np.array([counts[w] for w in vocab], dtype=np.float64) ** params.ns_exponent
    noise = freq / freq.sum()
    bs = params.batch_size
    batches_per_epoch = -(-n_pairs // bs)
    total = params.epochs * batches_per_epoch
    step = 0
    for _ in range(params.epochs):
        order = rng.permutation(n_pairs)
        negs_all = rng.choice(len(vocab), size=(n_pairs, params.negatives), p=noise)
        for b in range(batches_per_epoch):
            lr = max(params.min_lr, params.lr * (1.0 - step / total))
            step += 1
            sel = order[b * bs:(b + 1) * bs]
            c, o, neg = centers_a[sel], contexts_a[sel], negs_all[sel]
            v = w_in[c]
            u_pos = w_out[o]
            u_neg = w_out[neg]
            g_pos = (1.0 - _sigmoid(np.einsum("bd,bd->b", v, u_pos))) * lr
            g_neg = -_sigmoid(np.einsum("bd,bkd->bk", v, u_neg)) * lr
            grad_v = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
            np.add.at(w_out, o, g_pos[:, None] * v)
            np.add.at(w_out, neg.ravel(), (g_neg[:, :, None] * v[:, None, :]).reshape(-1, dim))
            np.add.at(w_in, c, grad_v)
    return EmbeddingModel(vocab, w_in, params, seed)
