"""Pipeline stages shared by the command line and the tests.

Feature extraction reads one transaction from the store, decodes its
calldata and logs with every ABI known for the chain, normalizes the call
and counts call-graph motifs. Identification trains embeddings and a boosted
classifier per leave-one-bridge-out fold; matching parses metadata with the
bridge configs and runs the withdrawal matcher.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import networkx as nx
import numpy as np

from . import classifier as clf
from .abi.codec import DecodeError
from .abi.contract import ERC20_ABI, AbiRegistry, decode_input, decode_log, unknown_call
from .chain.store import FixtureStore
from .chain.types import Transaction
from .features import (
    DEFAULT_TABLE, EmbeddingModel, EmbeddingParams, FeatureVector, NormalizedCall, SynonymTable, build_call_graph,
    functional_feature, motif_census, normalize, structural_feature, train_embeddings,
)
from .matcher import ZERO_HIT, MatcherConfig, MatchResult, match, score
from .semantics import BridgeConfig, CrossChainMetadata, MappingError, UnparseableDeposit, parse_metadata

# Tokens seen fewer than five times get no embedding (the usual word2vec cut-off);
# long-tail function names then look exactly like names from an unseen bridge.
IDENTIFY_EMBEDDING = EmbeddingParams(min_count=5)
BUNDLE_VERSION = 1


# -- decoding and features -----------------------------------------------------------

def registry_for(configs: Mapping[str, BridgeConfig], chain: str, extra: Optional[Mapping] = None) -> AbiRegistry:
    by_addr = dict(extra or {})
    for name in sorted(configs):
        by_addr.update(configs[name].contracts.get(chain, {}))
    return AbiRegistry(by_addr, common=ERC20_ABI)


def relevant_for(configs: Mapping[str, BridgeConfig], chain: str) -> set:
    out: set = set()
    for cfg in configs.values():
        out |= cfg.relevant_addresses(chain)
    return out


def decode_call(tx: Transaction, registry: AbiRegistry):
    if tx.to_addr is None or len(tx.input) < 4:
        return unknown_call()
    try:
        return decode_input(tx.input, registry.for_address(tx.to_addr))
    except DecodeError:
        return unknown_call(bytes(tx.input[:4]))


def decode_events(store: FixtureStore, chain: str, tx_hash: str, registry: AbiRegistry) -> list:
    out = []
    for lg in store.logs(chain, tx_hash):
        try:
            out.append(decode_log(lg, registry))
        except DecodeError:
            continue
    return out


@dataclass(frozen=True)
class TxSample:
    tx_hash: str
    bridge: str
    call: NormalizedCall
    census: np.ndarray
    degraded: bool
    label: Optional[str] = None


def extract(store: FixtureStore, chain: str, tx_hash: str, registry: AbiRegistry, relevant: set,
            bridge: str = "", label: Optional[str] = None, synonyms: SynonymTable = DEFAULT_TABLE) -> TxSample:
    tx = store.transaction(chain, tx_hash)
    traces = store.traces(chain, tx_hash)
    events = decode_events(store, chain, tx_hash, registry)
    graph = build_call_graph(tx, traces, events, relevant)
    degraded = store.is_degraded(chain, tx_hash) or not traces
    return TxSample(tx.hash, bridge, normalize(decode_call(tx, registry), synonyms), motif_census(graph),
                    degraded, label)


def attribute(store: FixtureStore, chain: str, tx: Transaction, configs: Mapping[str, BridgeConfig]) -> str:
    """First bridge (by name) whose contracts the transaction calls or whose contracts emit its logs."""
    touched = {tx.to_addr} | {t.callee for t in store.traces(chain, tx.hash)} | \
              {lg.emitter for lg in store.logs(chain, tx.hash)}
    for name in sorted(configs):
        if touched & configs[name].bridge_contracts(chain):
            return name
    return ""


def feature_vector(sample: TxSample, model: EmbeddingModel) -> FeatureVector:
    return FeatureVector(functional_feature(sample.call, model), structural_feature(sample.census, sample.degraded))


# -- identification ----------------------------------------------------------------------

@dataclass
class ModelBundle:
    embedding: EmbeddingModel
    classifier: clf.BoostedModel

    def predict(self, samples: Sequence[TxSample]) -> list:
        return [clf.predict(self.classifier, feature_vector(s, self.embedding)) for s in samples]

    def to_json(self) -> dict:
        return {"version": BUNDLE_VERSION, "embedding": self.embedding.to_json(),
                "classifier": self.classifier.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> "ModelBundle":
        if d.get("version") != BUNDLE_VERSION:
            raise ValueError(f"unsupported model bundle version {d.get('version')!r}")
        return cls(EmbeddingModel.from_json(d["embedding"]), clf.BoostedModel.from_json(d["classifier"]))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ModelBundle":
        return cls.from_json(json.loads(Path(path).read_text()))


def labeled_examples(samples: Sequence[TxSample], model: EmbeddingModel) -> list:
    return [clf.LabeledExample(s.tx_hash, s.bridge, feature_vector(s, model), s.label) for s in samples]


def train_bundle(samples: Sequence[TxSample], feature_mode: str = "fused", T: int = 100, seed: int = 0,
                 params: EmbeddingParams = IDENTIFY_EMBEDDING) -> ModelBundle:
    emb = train_embeddings([s.call for s in samples], params, seed)
    return ModelBundle(emb, clf.train(labeled_examples(samples, emb), feature_mode, T, seed))


def identify_loo(samples: Sequence[TxSample], modes: Sequence[str] = clf.MODES, T: int = 100, seed: int = 0,
                 params: EmbeddingParams = IDENTIFY_EMBEDDING) -> dict:
    """``table[mode][bridge]``: accuracy on each bridge of a model trained without it.

    Embeddings are retrained inside every fold, so the held-out bridge's names
    never reach the vocabulary.
    """
    bridges = sorted({s.bridge for s in samples})
    if len(bridges) < 2:
        raise ValueError("leave-one-bridge-out needs at least two bridges")
    table: dict = {m: {} for m in modes}
    for held in bridges:
        train_s = [s for s in samples if s.bridge != held]
        test_s = [s for s in samples if s.bridge == held]
        emb = train_embeddings([s.call for s in train_s], params, seed)
        train_x, test_x = labeled_examples(train_s, emb), labeled_examples(test_s, emb)
        for mode in modes:
            model = clf.train(train_x, mode, T, seed)
            table[mode][held] = clf.accuracy(model, test_x)
    return table


def predictions_csv(samples: Sequence[TxSample], preds: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tx_hash", "bridge", "prediction", "margin"])
    for s, (label, margin) in zip(samples, preds):
        w.writerow([s.tx_hash, s.bridge, label, repr(float(margin))])
    return buf.getvalue()


# -- matching ---------------------------------------------------------------------------

@dataclass
class DepositRow:
    tx_hash: str
    bridge: str
    metadata: Optional[CrossChainMetadata]
    error: str = ""


def parse_deposits(store: FixtureStore, chain_s: str, tx_hashes: Iterable[str],
                   configs: Mapping[str, BridgeConfig], registry: Optional[AbiRegistry] = None) -> list:
    """Metadata for each deposit using the first bridge config (by name) with a matching rule."""
    registry = registry or registry_for(configs, chain_s)
    out = []
    for h in tx_hashes:
        tx = store.transaction(chain_s, h)
        events = decode_events(store, chain_s, h, registry)
        row = DepositRow(tx.hash, "", None, "no bridge config has a rule for its logs")
        for name in sorted(configs):
            cfg = configs[name]
            if not any(e.emitter in cfg.bridge_contracts(chain_s) for e in events):
                continue
            try:
                row = DepositRow(tx.hash, name, parse_metadata(tx, events, cfg, chain_s=chain_s))
                break
            except UnparseableDeposit:
                continue
            except MappingError as e:
                row = DepositRow(tx.hash, name, None, str(e))
                break
        out.append(row)
    return out


def match_deposits(rows: Sequence[DepositRow], configs: Mapping[str, BridgeConfig], store: FixtureStore,
                   overrides: Optional[dict] = None, workers: int = 1) -> list:
    """One MatchResult per row; unparseable deposits are zero hits with the reason in the audit."""
    from concurrent.futures import ThreadPoolExecutor

    overrides = dict(overrides or {})

    def one(row: DepositRow) -> MatchResult:
        if row.metadata is None:
            return MatchResult(row.tx_hash, ZERO_HIT, audit=[{"step": 0, "action": "unparseable", "reason": row.error}])
        cfg = configs[row.bridge]
        mc = MatcherConfig(**{"delta_minutes": Fraction(cfg.delta_minutes), **overrides})
        return match(row.metadata, mc, store, cfg)

    if workers <= 1:
        return [one(r) for r in rows]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, rows))


def chain_pair(row: DepositRow) -> str:
    m = row.metadata
    return f"{m.chain_s.name}->{m.chain_d.name}" if m is not None else "unparsed"


def summary_rows(rows: Sequence[DepositRow], results: Sequence[MatchResult], truth: Mapping[str, Optional[str]]) -> list:
    """(bridge, chain pair, Rates) per bridge and pair, plus an "all" pair per bridge."""
    groups: dict = {}
    for row, res in zip(rows, results):
        groups.setdefault((row.bridge, chain_pair(row)), []).append(res)
        groups.setdefault((row.bridge, "all"), []).append(res)
    return [(b, p, score(rs, truth)) for (b, p), rs in sorted(groups.items())]


def paired_metadata(rows: Sequence[DepositRow], results: Sequence[MatchResult]) -> list:
    """Full metadata (both sides) for every matched deposit."""
    out = []
    for row, res in zip(rows, results):
        if row.metadata is not None and res.withdrawal is not None and res.amount_d is not None:
            out.append(row.metadata.with_withdrawal(res.withdrawal, res.amount_d, res.timestamp_d))
    return out


def sweep(rows: Sequence[DepositRow], configs: Mapping[str, BridgeConfig], store: FixtureStore,
          deltas: Sequence, truth: Mapping[str, Optional[str]], tau0=30) -> list:
    """(delta, MR, mean initial search-space size) for each delta; tau0 is capped at delta."""
    out = []
    for d in deltas:
        d = Fraction(str(d))
        res = match_deposits(rows, configs, store, {"delta_minutes": d, "tau0": min(Fraction(tau0), d)})
        spaces = [r.counts.get("space", 0) for r in res]
        out.append((d, score(res, truth).mr, Fraction(sum(spaces), len(spaces)) if spaces else Fraction(0)))
    return out


def inflection(points: Sequence[tuple]) -> Optional[Fraction]:
    """Smallest delta whose matching rate reaches the sweep's maximum."""
    if not points:
        return None
    best = max(mr for _, mr, _ in points)
    return min(d for d, mr, _ in points if mr == best)


def sweep_csv(points: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta_minutes", "MR", "mean_search_space"])
    for d, mr, space in points:
        w.writerow([str(d), f"{float(mr) * 100:.2f}%", f"{float(space):.4f}"])
    return buf.getvalue()


# -- descriptive statistics -------------------------------------------------------------

@dataclass
class StatsReport:
    pair_same: int
    pair_diff: int
    unique_same: int
    unique_diff_senders: int
    unique_diff_receivers: int
    clusters: list  # sorted lists of addresses, largest first
    latencies: list  # seconds, sorted
    fee_ratios: list  # Fractions, sorted

    @property
    def total(self) -> int:
        return self.pair_same + self.pair_diff


def describe(pairs: Sequence[CrossChainMetadata]) -> StatsReport:
    same = [m for m in pairs if m.sender == m.receiver]
    diff = [m for m in pairs if m.sender != m.receiver]
    g = nx.Graph()
    g.add_edges_from((str(m.sender), str(m.receiver)) for m in diff)
    clusters = sorted((sorted(c) for c in nx.connected_components(g)), key=lambda c: (-len(c), c))
    lat = sorted(m.timestamp_d - m.timestamp_s for m in pairs)
    fees = sorted((m.amount_s.value - m.amount_d.value) / m.amount_s.value for m in pairs if m.amount_s.raw)
    return StatsReport(len(same), len(diff), len({m.sender for m in same}), len({m.sender for m in diff}),
                       len({m.receiver for m in diff}), clusters, lat, fees)


def _pct(n: int, total: int) -> str:
    return f"{100 * n / total:.2f}%" if total else ""


def stats_tables(rep: StatsReport) -> dict:
    """File name -> CSV text."""
    acc = io.StringIO()
    w = csv.writer(acc, lineterminator="\n")
    w.writerow(["group", "pairs", "share", "unique_senders", "unique_receivers"])
    w.writerow(["Pair_same", rep.pair_same, _pct(rep.pair_same, rep.total), rep.unique_same, rep.unique_same])
    w.writerow(["Pair_diff", rep.pair_diff, _pct(rep.pair_diff, rep.total), rep.unique_diff_senders,
                rep.unique_diff_receivers])
    cl = io.StringIO()
    w = csv.writer(cl, lineterminator="\n")
    w.writerow(["cluster", "size", "addresses"])
    for i, c in enumerate(rep.clusters):
        w.writerow([i, len(c), " ".join(c)])

    def cdf(values, fmt) -> str:
        buf = io.StringIO()
        cw = csv.writer(buf, lineterminator="\n")
        cw.writerow(["value", "cumulative_fraction"])
        n = len(values)
        for i, v in enumerate(values):
            if i + 1 < n and values[i + 1] == v:
                continue
            cw.writerow([fmt(v), f"{(i + 1) / n:.6f}"])
        return buf.getvalue()

    return {"accounts.csv": acc.getvalue(), "clusters.csv": cl.getvalue(),
            "cdf_latency.csv": cdf(rep.latencies, str), "cdf_fee.csv": cdf(rep.fee_ratios, lambda f: f"{float(f):.8f}")}


def metadata_jsonl(pairs: Iterable[CrossChainMetadata]) -> str:
    return "".join(json.dumps(m.to_json(), sort_keys=True) + "\n" for m in pairs)


def read_metadata_jsonl(path: Union[str, Path]) -> list:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(CrossChainMetadata.from_json(json.loads(line)))
    return out
