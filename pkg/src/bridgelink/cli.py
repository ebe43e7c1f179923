"""Command line: generate worlds, ingest, identify deposits, match withdrawals, report.

Every command writes its outputs plus a ``manifest.json`` (RunManifest) into
``--out``. ``bridgelink replay <manifest>`` re-runs the recorded command into
a fresh directory and compares every output byte for byte.

Inputs can come from flags, from a ``--world`` directory written by ``gen``
(store/, configs/, abis.json, truth.json, spec.json), or from a ``--config``
JSON file with the keys ``world``, ``store``, ``bridges``, ``abis``,
``truth``, ``chain``, ``seed`` and ``matcher``. Flags win over the world
directory, which wins over the config file.

Exit codes: 0 success, 1 validation error, 2 data gap, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import platform
import sys
import tempfile
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import networkx
import numpy as np

from . import __version__
from . import classifier as clf
from .abi.contract import ContractAbi
from .chain.store import DataGapError, FixtureStore, RangeError, StoreError
from .chain.types import Address, ChainId, RecordError
from .matcher import (
    GroundTruthGap, MatcherConfig, baseline_ykm, match_all, results_jsonl, score, summary_csv,
)
from .pipeline import (
    ModelBundle, attribute, describe, extract, identify_loo, inflection, match_deposits, metadata_jsonl,
    paired_metadata, parse_deposits, predictions_csv, read_metadata_jsonl, registry_for, relevant_for,
    stats_tables, summary_rows, sweep, sweep_csv, train_bundle,
)
from .rpc import EndpointConfig, RpcError, fetch_block_range
from .semantics import BridgeConfig, ConfigError, MappingError
from .synth import DEPOSIT, PRESETS, GroundTruth, ScenarioSpec, SpecError, generate, preset

EXIT_OK, EXIT_VALIDATION, EXIT_DATA_GAP, EXIT_INVARIANT = 0, 1, 2, 3
MANIFEST = "manifest.json"
MANIFEST_VERSION = 1
PATH_OPTS = ("--store", "--config", "--out", "--world", "--bridges", "--abis", "--truth", "--spec", "--model",
             "--deposits", "--pairs")
DEFAULT_DELTAS = "15,30,45,60,90,120,150,180"

log = logging.getLogger("bridgelink.cli")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(f"{self.prog}: {message}")


# -- manifest ------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def output_digests(out: Path) -> dict:
    return {p.relative_to(out).as_posix(): _sha256(p) for p in sorted(out.rglob("*"))
            if p.is_file() and p.name != MANIFEST}


@dataclass
class RunManifest:
    command: str
    argv: list
    configs: dict = field(default_factory=dict)  # path -> sha256
    seeds: dict = field(default_factory=dict)
    versions: dict = field(default_factory=dict)
    store_digest: Optional[str] = None
    outputs: dict = field(default_factory=dict)  # relative path -> sha256

    def to_json(self) -> dict:
        return {"version": MANIFEST_VERSION, **asdict(self)}

    @classmethod
    def from_json(cls, d: dict) -> "RunManifest":
        if d.get("version") != MANIFEST_VERSION:
            raise CliError(f"unsupported manifest version {d.get('version')!r}")
        d = {k: v for k, v in d.items() if k != "version"}
        return cls(**d)

    def save(self, out: Path) -> None:
        (out / MANIFEST).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        try:
            return cls.from_json(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError, TypeError) as e:
            raise CliError(f"cannot read manifest {path}: {e}") from None


def versions() -> dict:
    return {"bridgelink": __version__, "numpy": np.__version__, "networkx": networkx.__version__,
            "python": platform.python_version()}


def canonical_argv(argv: Sequence[str]) -> list:
    """``argv`` with every path option made absolute, so a manifest replays from any directory."""
    paths = set(PATH_OPTS) - ({"--pairs"} if argv and argv[0] == "gen" else set())  # gen --pairs is a count
    out, it = [], iter(argv)
    for tok in it:
        opt, eq, val = tok.partition("=")
        if opt in paths:
            if eq:
                out.append(f"{opt}={os.path.abspath(val)}")
                continue
            out.append(tok)
            nxt = next(it, None)
            if nxt is not None:
                out.append(os.path.abspath(nxt))
            continue
        out.append(tok)
    if out and out[0] == "replay" and len(out) > 1 and not out[1].startswith("-"):
        out[1] = os.path.abspath(out[1])
    return out


# -- inputs --------------------------------------------------------------------------

@dataclass
class Inputs:
    store: Optional[Path] = None
    bridges: list = field(default_factory=list)
    abis: Optional[Path] = None
    truth: Optional[Path] = None
    spec: Optional[Path] = None
    chain: Optional[str] = None
    seed: Optional[int] = None
    matcher: dict = field(default_factory=dict)
    config_files: list = field(default_factory=list)


def _world_paths(world: Path) -> dict:
    d = {"store": world / "store", "bridges": world / "configs"}
    for key, name in (("abis", "abis.json"), ("truth", "truth.json"), ("spec", "spec.json")):
        if (world / name).exists():
            d[key] = world / name
    return d


def _bridge_files(p) -> list:
    if isinstance(p, (list, tuple)):
        return [f for x in p for f in _bridge_files(x)]
    p = Path(p)
    if p.is_dir():
        return sorted(p.glob("*.json"))
    return [p]


def resolve_inputs(args) -> Inputs:
    merged: dict = {}
    files = []
    if getattr(args, "config", None):
        cfg_path = Path(args.config)
        try:
            raw = json.loads(cfg_path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"cannot read config {cfg_path}: {e}") from None
        files.append(cfg_path)
        base = cfg_path.parent

        def rel(x):
            return [base / y for y in x] if isinstance(x, list) else base / x

        if "world" in raw:
            merged.update(_world_paths(rel(raw["world"])))
        for key in ("store", "bridges", "abis", "truth", "spec"):
            if key in raw:
                merged[key] = rel(raw[key])
        for key in ("chain", "seed", "matcher"):
            if key in raw:
                merged[key] = raw[key]
    if getattr(args, "world", None):
        merged.update(_world_paths(Path(args.world)))
    for key in ("store", "bridges", "abis", "truth"):
        val = getattr(args, key, None)
        if val:
            merged[key] = Path(val) if key != "bridges" else [Path(v) for v in val]
    if getattr(args, "chain", None):
        merged["chain"] = args.chain
    if getattr(args, "seed", None) is not None:
        merged["seed"] = args.seed
    inp = Inputs(config_files=files)
    for k, v in merged.items():
        setattr(inp, k, v)
    inp.bridges = _bridge_files(inp.bridges) if inp.bridges else []
    return inp


@dataclass
class Loaded:
    store: FixtureStore
    configs: dict
    abis: dict
    truth: Optional[GroundTruth]
    chain: str


def load_inputs(inp: Inputs, need_truth: bool = False) -> Loaded:
    if inp.store is None:
        raise CliError("no store given (use --store, --world or --config)")
    if not Path(inp.store).is_dir():
        raise CliError(f"store directory {inp.store} does not exist")
    if not inp.bridges:
        raise CliError("no bridge configs given (use --bridges, --world or --config)")
    configs = {}
    for p in inp.bridges:
        cfg = BridgeConfig.load(p)
        configs[cfg.bridge] = cfg
    abis: dict = {}
    if inp.abis is not None:
        try:
            raw = json.loads(Path(inp.abis).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"cannot read ABI file {inp.abis}: {e}") from None
        abis = {chain: {Address(e["address"]): ContractAbi.from_json(e["abi"]) for e in entries}
                for chain, entries in raw.items()}
    truth = None
    if inp.truth is not None:
        truth = GroundTruth.from_json(json.loads(Path(inp.truth).read_text()))
    elif need_truth:
        raise CliError("this command needs ground truth (use --truth, --world or --config)")
    chain = inp.chain
    if chain is None and inp.spec is not None:
        chain = ScenarioSpec.load(inp.spec).source_chain
    return Loaded(FixtureStore(inp.store), configs, abis, truth, chain or "ethereum")


def _config_digests(inp: Inputs) -> dict:
    paths = list(inp.config_files) + list(inp.bridges)
    paths += [p for p in (inp.abis, inp.truth, inp.spec) if p is not None]
    return {str(Path(p).resolve()): _sha256(Path(p)) for p in paths}


def _write(out: Path, name: str, text: str) -> None:
    (out / name).write_text(text)


def _dump(out: Path, name: str, obj) -> None:
    _write(out, name, json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _deposit_hashes(args, ld: Loaded) -> list:
    if getattr(args, "deposits", None):
        with open(args.deposits, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if rows and "prediction" not in rows[0]:
            raise CliError(f"{args.deposits} has no prediction column")
        return [r["tx_hash"] for r in rows if r["prediction"] == DEPOSIT]
    if ld.truth is None:
        raise CliError("no deposits: pass --deposits (identify output) or ground truth")
    return [h for h, lab in ld.truth.labeled(ld.chain) if lab.label == DEPOSIT]


def _matcher_overrides(args, inp: Inputs) -> dict:
    o = {}
    for k, v in inp.matcher.items():
        if k == "fee_schedule":
            o[k] = tuple(Fraction(str(x)) for x in v)
        elif k in ("max_iterations", "tie_break"):
            o[k] = v
        elif k in ("delta_minutes", "tau0", "growth", "shrink"):
            o[k] = Fraction(str(v))
        else:
            raise CliError(f"unknown matcher setting {k!r}")
    if getattr(args, "delta", None) is not None:
        o["delta_minutes"] = Fraction(str(args.delta))
    if getattr(args, "tau0", None) is not None:
        o["tau0"] = Fraction(str(args.tau0))
    if getattr(args, "max_iterations", None) is not None:
        o["max_iterations"] = args.max_iterations
    if "delta_minutes" in o and "tau0" not in o:
        o["tau0"] = min(Fraction(30), o["delta_minutes"])
    return o


# -- commands ------------------------------------------------------------------------

def cmd_gen(args, out: Path, man: RunManifest) -> None:
    if args.spec:
        spec = ScenarioSpec.load(args.spec)
        man.configs[str(Path(args.spec).resolve())] = _sha256(Path(args.spec))
    else:
        spec = preset(args.preset, seed=args.seed or 0, pairs=args.pairs, non_deposits=args.non_deposits)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    world = generate(spec, out)
    man.seeds["scenario"] = spec.seed
    man.store_digest = world.store.digest()
    report = {"digest": world.digest(), "store_digest": man.store_digest, "bridges": sorted(world.configs),
              "pairs": len(world.truth.pairs), "deleted": sum(p.deleted for p in world.truth.pairs),
              "labels": len(world.truth.labels)}
    _dump(out, "report.json", report)
    print(f"generated {report['pairs']} pairs over {len(report['bridges'])} bridges; digest {report['digest']}")


def cmd_ingest(args, out: Path, man: RunManifest) -> None:
    if not args.store:
        raise CliError("ingest needs --store")
    trace = None if args.trace_method == "none" else args.trace_method
    ep = EndpointConfig.from_env(ChainId(args.chain or "ethereum", args.chain_id), url=args.url, max_batch=args.max_batch,
                                 retries=args.retries, trace_method=trace, concurrency=args.concurrency)
    store = FixtureStore(args.store)
    rep = fetch_block_range(ep, store, args.from_block, args.to_block)
    man.store_digest = store.digest()  # the store is this command's output; refetching is idempotent
    report = {"chain": args.chain, "from": args.from_block, "to": args.to_block, "counts": rep.counts,
              "trace_mode": rep.trace_mode, "degraded": rep.degraded, "last_block": rep.last_block}
    _dump(out, "ingest.json", report)
    print(json.dumps(rep.counts, sort_keys=True), rep.trace_mode)


def cmd_identify(args, out: Path, man: RunManifest) -> None:
    inp = resolve_inputs(args)
    ld = load_inputs(inp)
    man.configs.update(_config_digests(inp))
    man.store_digest = ld.store.digest()
    seed = inp.seed if inp.seed is not None else 0
    man.seeds["identify"] = seed
    modes = ("structural",) if args.structural_only else tuple(args.modes.split(","))
    for m in modes:
        if m not in clf.MODES:
            raise CliError(f"unknown mode {m!r}; expected some of {clf.MODES}")
    reg = registry_for(ld.configs, ld.chain, ld.abis.get(ld.chain))
    rel = relevant_for(ld.configs, ld.chain)
    if ld.truth is not None:
        pairs = [(h, lab.bridge, lab.label) for h, lab in ld.truth.labeled(ld.chain)]
    else:
        pairs = []
        for tx in ld.store.transactions(ld.chain):
            b = attribute(ld.store, ld.chain, tx, ld.configs)
            if b:
                pairs.append((tx.hash, b, None))
        pairs.sort()
    samples = [extract(ld.store, ld.chain, h, reg, rel, b, lab) for h, b, lab in pairs]
    if not samples:
        raise CliError(f"no bridge transactions found on {ld.chain}", EXIT_DATA_GAP)
    report: dict = {"chain": ld.chain, "samples": len(samples), "degraded": sum(s.degraded for s in samples)}
    if args.model:
        bundle = ModelBundle.load(args.model)
        man.configs[str(Path(args.model).resolve())] = _sha256(Path(args.model))
    elif ld.truth is not None:
        mode = "fused" if "fused" in modes else modes[0]
        bundle = train_bundle(samples, mode, args.rounds, seed)
        bundle.save(out / "model.json")
    else:
        raise CliError("identify needs ground truth to train a model, or --model to load one")
    preds = bundle.predict(samples)
    _write(out, "predictions.csv", predictions_csv(samples, preds))
    report["predicted_deposits"] = sum(1 for label, _ in preds if label == DEPOSIT)
    if ld.truth is not None:
        table = identify_loo(samples, modes, args.rounds, seed)
        _write(out, "accuracy.csv", clf.report_csv(table))
        report["accuracy"] = {m: {b: repr(float(a)) for b, a in sorted(t.items())} for m, t in table.items()}
        print(clf.report_csv(table), end="")
    _dump(out, "report.json", report)
    print(f"{len(samples)} transactions, {report['predicted_deposits']} predicted deposits")


def _parse_rows(args, ld: Loaded):
    hashes = _deposit_hashes(args, ld)
    reg = registry_for(ld.configs, ld.chain, ld.abis.get(ld.chain))
    return parse_deposits(ld.store, ld.chain, hashes, ld.configs, reg)


def _deltas(text: str) -> list:
    try:
        vals = [Fraction(x.strip()) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"bad delta list {text!r}") from None
    if not vals or any(v <= 0 for v in vals) or vals != sorted(set(vals)):
        raise CliError("deltas must be positive and strictly increasing")
    return vals


def cmd_match(args, out: Path, man: RunManifest) -> None:
    inp = resolve_inputs(args)
    ld = load_inputs(inp)
    man.configs.update(_config_digests(inp))
    man.store_digest = ld.store.digest()
    rows = _parse_rows(args, ld)
    overrides = _matcher_overrides(args, inp)
    results = match_deposits(rows, ld.configs, ld.store, overrides, args.workers)
    _write(out, "results.jsonl", results_jsonl(results))
    _write(out, "pairs.jsonl", metadata_jsonl(paired_metadata(rows, results)))
    report: dict = {"deposits": len(rows), "unparseable": sum(r.metadata is None for r in rows),
                    "outcomes": {}}
    for r in results:
        report["outcomes"][r.outcome] = report["outcomes"].get(r.outcome, 0) + 1
    if ld.truth is not None:
        truth = ld.truth.withdrawal_of()
        text = summary_csv(summary_rows(rows, results, truth))
        _write(out, "summary.csv", text)
        report["rates"] = score(results, truth).rendered()
        print(text, end="")
    if args.sweep:
        if ld.truth is None:
            raise CliError("a sweep needs ground truth")
        pts = sweep(rows, ld.configs, ld.store, _deltas(args.sweep), ld.truth.withdrawal_of())
        _write(out, "sweep.csv", sweep_csv(pts))
        report["inflection"] = str(inflection(pts))
    _dump(out, "report.json", report)
    print(json.dumps(report["outcomes"], sort_keys=True))


def cmd_sweep(args, out: Path, man: RunManifest) -> None:
    inp = resolve_inputs(args)
    ld = load_inputs(inp, need_truth=True)
    man.configs.update(_config_digests(inp))
    man.store_digest = ld.store.digest()
    rows = _parse_rows(args, ld)
    pts = sweep(rows, ld.configs, ld.store, _deltas(args.deltas), ld.truth.withdrawal_of())
    text = sweep_csv(pts)
    _write(out, "sweep.csv", text)
    inf = inflection(pts)
    _dump(out, "report.json", {"deposits": len(rows), "inflection": str(inf)})
    print(text, end="")
    print(f"inflection at delta = {inf} minutes")


def cmd_stats(args, out: Path, man: RunManifest) -> None:
    if args.pairs:
        pairs = read_metadata_jsonl(args.pairs)
        man.configs[str(Path(args.pairs).resolve())] = _sha256(Path(args.pairs))
    else:
        inp = resolve_inputs(args)
        if inp.truth is None:
            raise CliError("stats needs --pairs (match output) or ground truth")
        man.configs.update({str(Path(inp.truth).resolve()): _sha256(Path(inp.truth))})
        truth = GroundTruth.from_json(json.loads(Path(inp.truth).read_text()))
        pairs = [p.metadata for p in truth.pairs if p.withdrawal is not None]
    rep = describe(pairs)
    for name, text in stats_tables(rep).items():
        _write(out, name, text)
    summary = {"pairs": rep.total, "pair_same": rep.pair_same, "pair_diff": rep.pair_diff,
               "unique_same": rep.unique_same, "unique_diff_senders": rep.unique_diff_senders,
               "unique_diff_receivers": rep.unique_diff_receivers, "clusters": len(rep.clusters),
               "largest_cluster": len(rep.clusters[0]) if rep.clusters else 0}
    _dump(out, "report.json", summary)
    print(json.dumps(summary, sort_keys=True))


def cmd_baseline(args, out: Path, man: RunManifest) -> None:
    inp = resolve_inputs(args)
    ld = load_inputs(inp, need_truth=True)
    man.configs.update(_config_digests(inp))
    man.store_digest = ld.store.digest()
    rows = _parse_rows(args, ld)
    truth = ld.truth.withdrawal_of()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bridge", "delta_minutes", "baseline_MR", "match_MR", "#All"])
    report = {}
    for name in sorted({r.bridge for r in rows if r.metadata is not None}):
        mine = [r for r in rows if r.bridge == name and r.metadata is not None]
        delta = Fraction(str(args.delta)) if args.delta is not None else Fraction(ld.configs[name].delta_minutes)
        mc = MatcherConfig(delta, tau0=min(Fraction(30), delta))
        ours = match_all([r.metadata for r in mine], mc, ld.store, ld.configs[name], workers=args.workers)
        theirs = baseline_ykm([(ld.store.transaction(ld.chain, r.tx_hash), r.metadata.chain_d.name) for r in mine],
                              mc, ld.store)
        a, b = score(theirs, truth), score(ours, truth)
        w.writerow([name, str(delta), a.rendered()["MR"], b.rendered()["MR"], len(mine)])
        report[name] = {"delta": str(delta), "baseline_mr": str(a.mr), "match_mr": str(b.mr)}
    _write(out, "baseline.csv", buf.getvalue())
    _dump(out, "report.json", report)
    print(buf.getvalue(), end="")


def cmd_replay(args) -> int:
    man = RunManifest.load(Path(args.manifest))
    keep = Path(args.into) if args.into else None
    with tempfile.TemporaryDirectory() as tmp:
        target = keep or Path(tmp) / "replay"
        if target.exists() and any(target.iterdir()):
            raise CliError(f"{target} is not empty")
        argv = list(man.argv)
        if "--out" not in argv:
            raise CliError("manifest argv has no --out")
        argv[argv.index("--out") + 1] = str(target)
        if man.command != "gen" and man.command != "ingest" and man.store_digest is not None:
            store_arg = _store_of(argv)
            if store_arg is not None and FixtureStore(store_arg).digest() != man.store_digest:
                raise CliError("the input store changed since the recorded run")
        code = main(argv)
        if code != EXIT_OK:
            print(f"replay: command exited with {code}", file=sys.stderr)
            return code
        new = RunManifest.load(target / MANIFEST)
        diffs = sorted(k for k in set(man.outputs) | set(new.outputs) if man.outputs.get(k) != new.outputs.get(k))
        for k in diffs:
            print(f"differs: {k}")
        if new.store_digest != man.store_digest:
            diffs.append("store")
            print("differs: store digest")
        if diffs:
            return EXIT_INVARIANT
        print(f"replay identical: {len(new.outputs)} outputs")
        return EXIT_OK


def _store_of(argv: list) -> Optional[Path]:
    ns, _ = _common_parser().parse_known_args(argv[1:])
    try:
        return resolve_inputs(ns).store
    except CliError:
        return None


# -- parser --------------------------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="seed for generation and training")
    p.add_argument("--store", help="fixture store directory")
    p.add_argument("--config", help="top-level experiment config (JSON)")
    p.add_argument("--out", help="output directory (created if missing)")
    p.add_argument("--world", help="directory written by gen (store, configs, ABIs, truth)")
    p.add_argument("--bridges", nargs="+", help="bridge config files or directories")
    p.add_argument("--abis", help="non-bridge contract ABIs (JSON)")
    p.add_argument("--truth", help="ground truth JSON")
    p.add_argument("--chain", help="source chain name")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    top = _Parser(prog="bridgelink", description="Cross-chain deposit identification and withdrawal matching.")
    top.add_argument("--version", action="version", version=f"bridgelink {__version__}")
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common], help="generate a synthetic world")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="scenario spec JSON")
    src.add_argument("--preset", choices=PRESETS)
    g.add_argument("--pairs", type=int, default=500)
    g.add_argument("--non-deposits", type=int, default=500)

    i = sub.add_parser("ingest", parents=[common], help="copy a block range from a JSON-RPC endpoint")
    i.add_argument("--url", help="endpoint URL (default: $BRIDGELINK_RPC_URL)")
    i.add_argument("--chain-id", type=int, required=True)
    i.add_argument("--from", dest="from_block", type=int, required=True)
    i.add_argument("--to", dest="to_block", type=int, required=True)
    i.add_argument("--trace-method", default="debug_traceTransaction", help='trace method name, or "none"')
    i.add_argument("--max-batch", type=int, default=50)
    i.add_argument("--concurrency", type=int, default=8)
    i.add_argument("--retries", type=int, default=3)

    d = sub.add_parser("identify", parents=[common], help="classify deposit transactions")
    d.add_argument("--model", help="load a trained model instead of training")
    d.add_argument("--modes", default=",".join(clf.MODES), help="feature modes for the accuracy table")
    d.add_argument("--structural-only", action="store_true", help="report the structural column only")
    d.add_argument("--rounds", type=int, default=100, help="boosting rounds")

    for name, helptext in (("match", "match deposits to withdrawals"), ("sweep", "sweep the time window"),
                           ("baseline", "compare with the time-and-amount baseline")):
        m = sub.add_parser(name, parents=[common], help=helptext)
        m.add_argument("--deposits", help="predictions.csv from identify (default: ground-truth deposits)")
        m.add_argument("--workers", type=int, default=4)
        if name != "sweep":
            m.add_argument("--delta", type=str, default=None, help="time window in minutes for every bridge")
        if name == "match":
            m.add_argument("--tau0", type=str, default=None)
            m.add_argument("--max-iterations", type=int, default=None)
            m.add_argument("--sweep", default=None, help="comma-separated deltas to sweep as well")
        if name == "sweep":
            m.add_argument("--deltas", default=DEFAULT_DELTAS)

    s = sub.add_parser("stats", parents=[common], help="descriptive statistics of matched pairs")
    s.add_argument("--pairs", help="pairs.jsonl from match (default: ground-truth pairs)")

    r = sub.add_parser("replay", help="re-run a manifest and compare outputs")
    r.add_argument("manifest")
    r.add_argument("--into", help="directory for the replayed outputs (default: temporary)")
    return top


COMMANDS = {"gen": cmd_gen, "ingest": cmd_ingest, "identify": cmd_identify, "match": cmd_match,
            "sweep": cmd_sweep, "stats": cmd_stats, "baseline": cmd_baseline}


def _run(argv: list) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "replay":
        return cmd_replay(args)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.out:
        raise CliError(f"{args.command} needs --out")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest(args.command, canonical_argv(argv), versions=versions())
    if args.seed is not None:
        man.seeds["cli"] = args.seed
    COMMANDS[args.command](args, out, man)
    man.outputs = output_digests(out)
    man.save(out)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return _run(argv)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (StoreError, RecordError, AssertionError) as e:
        print(f"invariant violated: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except (DataGapError, RangeError, RpcError, GroundTruthGap) as e:
        print(f"data gap: {e}", file=sys.stderr)
        return EXIT_DATA_GAP
    except (SpecError, ConfigError, MappingError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
