"""Discrete AdaBoost over decision stumps, plus leave-one-bridge-out evaluation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .features.vector import FEATURE_COLUMNS, FUSED_DIM, FeatureVector

MODEL_VERSION = 1
DEPOSIT = "deposit"
NON_DEPOSIT = "non-deposit"
MODES = ("structural", "functional", "fused")
MODE_HEADERS = {"structural": "Struc.", "functional": "Func.", "fused": "Struc. + Func."}

_TIE_EPS = 1e-12
_MIN_ERR = 1e-10


class TrainError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledExample:
    tx_hash: str
    bridge: str
    feature: FeatureVector
    label: str

    @property
    def y(self) -> int:
        return 1 if self.label == DEPOSIT else -1


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    polarity: int  # output for x > threshold; the opposite below

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.where(x[..., self.feature] > self.threshold, self.polarity, -self.polarity)


@dataclass(frozen=True)
class BoostedModel:
    stumps: tuple
    alphas: tuple
    feature_mode: str
    rounds: int
    seed: int = 0

    def margin(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != FUSED_DIM:
            raise ValueError(f"expected {FUSED_DIM} features, got {X.shape[-1]}")
        out = np.zeros(X.shape[:-1])
        for s, a in zip(self.stumps, self.alphas):
            out = out + a * s.predict(X)
        return out

    def to_json(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "feature_mode": self.feature_mode,
            "rounds": self.rounds,
            "seed": self.seed,
            "learners": [{"feature": s.feature, "threshold": repr(s.threshold), "polarity": s.polarity,
                          "alpha": repr(a)} for s, a in zip(self.stumps, self.alphas)],
        }

    @classmethod
    def from_json(cls, d: dict) -> "BoostedModel":
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        stumps = tuple(Stump(int(x["feature"]), float(x["threshold"]), int(x["polarity"])) for x in d["learners"])
        alphas = tuple(float(x["alpha"]) for x in d["learners"])
        return cls(stumps, alphas, d["feature_mode"], int(d["rounds"]), int(d["seed"]))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=1))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BoostedModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def _as_matrix(examples: Sequence[LabeledExample]) -> tuple:
    X = np.stack([e.feature.fused for e in examples]) if examples else np.zeros((0, FUSED_DIM))
    y = np.array([e.y for e in examples], dtype=np.int64)
    return X, y


class _StumpSearch:
    """Pre-sorted columns so each boosting round is a few vectorized passes."""

    def __init__(self, X: np.ndarray, y: np.ndarray, columns: np.ndarray):
        self.columns = columns
        Xc = X[:, columns]
        self.order = np.argsort(Xc, axis=0, kind="stable")
        self.sorted_vals = np.take_along_axis(Xc, self.order, axis=0)
        self.y_sorted = y[self.order]
        # a split after row k is valid when the next value is strictly larger
        self.valid = self.sorted_vals[1:] > self.sorted_vals[:-1]
        self.mid = (self.sorted_vals[1:] + self.sorted_vals[:-1]) / 2.0

    def best(self, w: np.ndarray) -> tuple:
        w_sorted = w[self.order]
        pos = np.where(self.y_sorted > 0, w_sorted, 0.0)
        neg = w_sorted - pos
        p_tot, n_tot = pos[:, 0].sum(), neg[:, 0].sum()
        p_le = np.cumsum(pos, axis=0)[:-1]
        n_le = np.cumsum(neg, axis=0)[:-1]
        err_up = p_le + (n_tot - n_le)    # polarity +1: deposit above threshold
        err_down = n_le + (p_tot - p_le)  # polarity -1
        err_up = np.where(self.valid, err_up, np.inf)
        err_down = np.where(self.valid, err_down, np.inf)
        best_err = min(err_up.min(initial=np.inf), err_down.min(initial=np.inf))
        if not np.isfinite(best_err):
            raise TrainError("no feature takes more than one value; nothing to split on")
        cands = []
        for pol, err in ((1, err_up), (-1, err_down)):
            rows, cols = np.nonzero(err <= best_err + _TIE_EPS)
            cands += [(int(self.columns[c]), float(self.mid[r, c]), pol, float(err[r, c]))
                      for r, c in zip(rows, cols)]
        # lowest feature index, then smallest threshold; polarity +1 first
        f, thr, pol, err = min(cands, key=lambda t: (t[0], t[1], -t[2]))
        return Stump(f, thr, pol), err


def train(examples: Sequence[LabeledExample], feature_mode: str = "fused", T: int = 100,
          seed: int = 0) -> BoostedModel:
    if feature_mode not in MODES:
        raise ValueError(f"unknown feature mode {feature_mode!r}; expected one of {MODES}")
    if T < 1:
        raise ValueError("T must be at least 1")
    X, y = _as_matrix(examples)
    if len(set(y.tolist())) < 2:
        raise TrainError("training data must contain both deposits and non-deposits")
    search = _StumpSearch(X, y, FEATURE_COLUMNS[feature_mode])
    w = np.full(len(y), 1.0 / len(y))
    stumps, alphas = [], []
    for _ in range(T):
        stump, err = search.best(w)
        if err >= 0.5:
            if not stumps:
                stumps.append(stump)
                alphas.append(0.0)
            break
        e = max(err, _MIN_ERR)
        alpha = 0.5 * math.log((1.0 - e) / e)
        stumps.append(stump)
        alphas.append(alpha)
        if err <= 0.0:
            break
        h = stump.predict(X)
        w = w * np.exp(-alpha * y * h)
        w = w / w.sum()
    return BoostedModel(tuple(stumps), tuple(alphas), feature_mode, T, seed)


def predict(model: BoostedModel, feature: Union[FeatureVector, np.ndarray]) -> tuple:
    """Returns (label, margin); a margin of exactly zero is a non-deposit."""
    x = feature.fused if isinstance(feature, FeatureVector) else np.asarray(feature, dtype=np.float64)
    if x.shape != (FUSED_DIM,):
        raise ValueError(f"expected a {FUSED_DIM}-dim feature, got shape {x.shape}")
    m = float(model.margin(x))
    return (DEPOSIT if m > 0 else NON_DEPOSIT), m


def predict_many(model: BoostedModel, X: np.ndarray) -> np.ndarray:
    return np.where(model.margin(X) > 0, 1, -1)


def accuracy(model: BoostedModel, examples: Sequence[LabeledExample]) -> float:
    X, y = _as_matrix(examples)
    if not len(y):
        return float("nan")
    return float((predict_many(model, X) == y).mean())


Trainer = Callable[..., BoostedModel]


def evaluate_loo(corpus: Mapping[str, Sequence[LabeledExample]], feature_mode: str = "fused", T: int = 100,
                 seed: int = 0, trainer: Optional[Trainer] = None) -> dict:
    """For each bridge, train on every other bridge and report accuracy on it."""
    if len(corpus) < 2:
        raise ValueError("leave-one-bridge-out needs at least two bridges")
    trainer = trainer or train
    out = {}
    for held in sorted(corpus):
        train_set = [e for b in sorted(corpus) if b != held for e in corpus[b]]
        model = trainer(train_set, feature_mode=feature_mode, T=T, seed=seed)
        out[held] = accuracy(model, corpus[held])
    return out


def report_csv(table: Mapping[str, Mapping[str, float]]) -> str:
    """``table[mode][bridge] -> accuracy`` rendered with one row per bridge."""
    modes = [m for m in MODES if m in table]
    bridges = sorted({b for m in modes for b in table[m]})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bridge"] + [MODE_HEADERS[m] for m in modes])
    for b in bridges:
        w.writerow([b] + [f"{100 * table[m][b]:.2f}%" if b in table[m] else "" for m in modes])
    return buf.getvalue()
