"""Withdrawal discovery: search space, asset/time/amount rules, relaxation, scoring.

All times are compared in whole seconds against minute thresholds held as
exact fractions, and fee ratios are exact fractions too, so a run's audit
log replays identically everywhere.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .chain.store import DataGapError, FixtureStore, RangeError, transfer_recipient
from .chain.types import NATIVE, Address, TokenAmount, Transaction
from .semantics import BridgeConfig, CrossChainMetadata

MATCHED = "matched"
ZERO_HIT = "zero-hit"
AMBIGUOUS = "ambiguous-unresolved"

DEFAULT_SCHEDULE = (Fraction(3, 100), Fraction(5, 100), Fraction(10, 100), Fraction(25, 100),
                    Fraction(50, 100), Fraction(1))

log = logging.getLogger("bridgelink.diagnostics")


class ConfigError(ValueError):
    pass


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


@dataclass(frozen=True)
class MatcherConfig:
    delta_minutes: Fraction
    tau0: Fraction = Fraction(30)
    growth: Fraction = Fraction(11, 10)
    fee_schedule: tuple = DEFAULT_SCHEDULE
    shrink: Fraction = Fraction(1, 2)
    max_iterations: int = 128
    tie_break: bool = True

    def __post_init__(self):
        for name in ("delta_minutes", "tau0", "growth", "shrink"):
            object.__setattr__(self, name, _frac(getattr(self, name)))
        object.__setattr__(self, "fee_schedule", tuple(_frac(f) for f in self.fee_schedule))
        if self.tau0 <= 0 or self.tau0 > self.delta_minutes:
            raise ConfigError(f"need 0 < tau0 <= delta (tau0={self.tau0}, delta={self.delta_minutes})")
        s = self.fee_schedule
        if not s or s[-1] != 1 or s[0] < 0 or any(b <= a for a, b in zip(s, s[1:])):
            raise ConfigError("fee schedule must be strictly increasing and end at 100%")
        if self.growth <= 1 or not 0 < self.shrink < 1:
            raise ConfigError("growth must exceed 1 and shrink must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ConfigError("iteration cap must be positive")

    @classmethod
    def for_bridge(cls, cfg: BridgeConfig, **kw) -> "MatcherConfig":
        return cls(delta_minutes=Fraction(cfg.delta_minutes), **kw)

    def to_json(self) -> dict:
        return {"delta_minutes": str(self.delta_minutes), "tau0": str(self.tau0), "growth": str(self.growth),
                "fee_schedule": [str(f) for f in self.fee_schedule], "shrink": str(self.shrink),
                "max_iterations": self.max_iterations, "tie_break": self.tie_break}

    @classmethod
    def from_json(cls, d: dict) -> "MatcherConfig":
        kw = dict(d)
        if "fee_schedule" in kw:
            kw["fee_schedule"] = tuple(kw["fee_schedule"])
        return cls(**kw)


@dataclass(frozen=True)
class Candidate:
    tx_hash: str
    block_number: int
    index: int
    timestamp: int
    asset: Address
    amount: TokenAmount


@dataclass
class MatchResult:
    deposit: str
    outcome: str
    withdrawal: Optional[str] = None
    counts: dict = field(default_factory=dict)
    tau: Optional[Fraction] = None
    fee_bound: Optional[Fraction] = None
    delta: Optional[Fraction] = None
    relaxations: int = 0
    ambiguous_resolved: bool = False
    iterations: int = 0
    audit: list = field(default_factory=list)
    amount_d: Optional[TokenAmount] = None
    timestamp_d: Optional[int] = None

    def to_json(self) -> dict:
        def s(x):
            return None if x is None else str(x)

        amt = None if self.amount_d is None else {"raw": str(self.amount_d.raw), "decimals": self.amount_d.decimals}
        return {"deposit": self.deposit, "outcome": self.outcome, "withdrawal": self.withdrawal,
                "counts": self.counts, "tau": s(self.tau), "fee_bound": s(self.fee_bound), "delta": s(self.delta),
                "relaxations": self.relaxations, "ambiguous_resolved": self.ambiguous_resolved,
                "iterations": self.iterations, "audit": self.audit, "amount_d": amt,
                "timestamp_d": self.timestamp_d}

    @classmethod
    def from_json(cls, d: dict) -> "MatchResult":
        def f(x):
            return None if x is None else Fraction(x)

        amt = d.get("amount_d")
        return cls(d["deposit"], d["outcome"], d.get("withdrawal"), d.get("counts", {}), f(d.get("tau")),
                   f(d.get("fee_bound")), f(d.get("delta")), d.get("relaxations", 0),
                   d.get("ambiguous_resolved", False), d.get("iterations", 0), d.get("audit", []),
                   None if amt is None else TokenAmount(int(amt["raw"]), int(amt["decimals"])), d.get("timestamp_d"))


# -- search space ------------------------------------------------------------------

def block_window(store: FixtureStore, chain: str, t_start: int, t_end: int) -> tuple:
    try:
        return store.block_at_or_after(chain, t_start), store.block_at_or_after(chain, t_end)
    except RangeError as e:
        raise DataGapError(f"{chain}: headers do not cover [{t_start}, {t_end}]: {e}",
                           (chain, t_start, t_end)) from None
    except DataGapError as e:
        raise DataGapError(f"{chain}: no data for [{t_start}, {t_end}]: {e}", (chain, t_start, t_end)) from None


def credits_to(store: FixtureStore, chain: str, tx: Transaction, receiver: Address) -> dict:
    """Asset -> raw amount credited to ``receiver`` by ``tx`` (token transfers and native value)."""
    out: dict = {}
    for lg in store.logs(chain, tx.hash):
        if transfer_recipient(lg) == receiver:
            out[lg.emitter] = out.get(lg.emitter, 0) + int.from_bytes(lg.data, "big")
    traces = store.traces(chain, tx.hash)
    if traces:
        native = sum(t.value for t in traces if t.callee == receiver)
    else:
        native = tx.value if tx.to_addr == receiver else 0
    if native:
        out[NATIVE] = out.get(NATIVE, 0) + native
    return out


def build_search_space(m: CrossChainMetadata, delta_minutes, store: FixtureStore,
                       cfg: Optional[BridgeConfig] = None) -> list:
    chain = m.chain_d.name
    lo, hi = block_window(store, chain, m.timestamp_s, m.timestamp_s + int(_frac(delta_minutes) * 60))
    out = []
    for tx in store.txs_touching(chain, m.receiver, (lo, hi)):
        if not tx.status:
            continue
        for asset, raw in sorted(credits_to(store, chain, tx, m.receiver).items()):
            info = cfg.token_info(chain, asset) if cfg is not None else None
            decimals = info.decimals if info is not None else (18 if asset == NATIVE else 0)
            out.append(Candidate(tx.hash, tx.block_number, tx.index, tx.timestamp, asset, TokenAmount(raw, decimals)))
    return out


# -- rules -------------------------------------------------------------------------

def target_asset(m: CrossChainMetadata, cfg: Optional[BridgeConfig]) -> tuple:
    """(kind, value): an exact destination address, or a registry symbol to share."""
    if m.asset_d is not None:
        return "address", m.asset_d
    if cfg is not None:
        mapped = cfg.token_map.get((m.asset_s, m.chain_d.name))
        if mapped is not None:
            return "address", mapped
        info = cfg.token_info(m.chain_s.name, m.asset_s)
        if info is not None and info.symbol:
            return "symbol", info.symbol
    return "none", None


def apply_rule1_asset(cands: Sequence[Candidate], m: CrossChainMetadata, cfg: Optional[BridgeConfig]) -> list:
    kind, value = target_asset(m, cfg)
    if kind == "address":
        return [c for c in cands if c.asset == value]
    if kind == "symbol":
        out = []
        for c in cands:
            info = cfg.token_info(m.chain_d.name, c.asset)
            if info is not None and info.symbol == value:
                out.append(c)
        return out
    return []


def apply_rule2_time(cands: Sequence[Candidate], m: CrossChainMetadata, tau_minutes) -> list:
    tau = _frac(tau_minutes)
    if tau <= 0:
        raise ValueError("tau must be positive")
    limit = tau * 60
    out = []
    for c in cands:
        dt = c.timestamp - m.timestamp_s
        if dt < 0:
            log.debug("negative interval", extra={"structured": {"deposit": m.txhash_s, "candidate": c.tx_hash}})
        elif dt <= limit:
            out.append(c)
    return out


def fee_ratio(m: CrossChainMetadata, c: Candidate) -> Fraction:
    s = m.amount_s.value
    return (s - c.amount.value) / s


def apply_rule3_amount(cands: Sequence[Candidate], m: CrossChainMetadata, upper) -> list:
    if m.amount_s.value <= 0:
        raise ValueError("amount_s must be positive")
    bound = _frac(upper)
    return [c for c in cands if 0 <= fee_ratio(m, c) <= bound]


def _tie_key(m: CrossChainMetadata):
    return lambda c: (fee_ratio(m, c), c.timestamp, c.tx_hash)


# -- matching ----------------------------------------------------------------------

def match(m: CrossChainMetadata, cfg: MatcherConfig, store: FixtureStore,
          bridge: Optional[BridgeConfig] = None) -> MatchResult:
    if m.amount_s.value <= 0:
        raise ValueError(f"{m.txhash_s}: amount_s must be positive")
    res = MatchResult(m.txhash_s, ZERO_HIT)
    it = 0
    deltas = (cfg.delta_minutes, cfg.delta_minutes * 2)

    def step(action, **kw):
        res.audit.append({"step": len(res.audit), "action": action,
                          **{k: (str(v) if isinstance(v, Fraction) else v) for k, v in kw.items()}})

    def run(cands, tau, bound):
        nonlocal it
        it += 1
        c2 = apply_rule2_time(cands, m, tau)
        c3 = apply_rule3_amount(c2, m, bound)
        return c2, c3

    def finish(outcome, chosen=None, **extra):
        res.outcome = outcome
        res.withdrawal = chosen.tx_hash if chosen is not None else None
        if chosen is not None:
            res.amount_d, res.timestamp_d = chosen.amount, chosen.timestamp
        res.iterations = it
        step("finish", outcome=outcome, withdrawal=res.withdrawal, **extra)
        return res

    for di, delta in enumerate(deltas):
        if di:
            res.relaxations += 1
            step("widen_delta", delta=delta)
        space = build_search_space(m, delta, store, bridge)
        r1 = apply_rule1_asset(space, m, bridge)
        tau = cfg.tau0 if di == 0 else res.tau
        fee_i = 0 if di == 0 else len(cfg.fee_schedule) - 1
        res.delta = delta
        if di == 0:
            res.counts = {"space": len(space), "rule1": len(r1)}
        else:
            res.counts.update(space_2x=len(space), rule1_2x=len(r1))
        step("search", delta=delta, space=len(space), rule1=len(r1))
        while it < cfg.max_iterations:
            bound = cfg.fee_schedule[fee_i]
            c2, c3 = run(r1, tau, bound)
            res.tau, res.fee_bound = tau, bound
            res.counts.update(rule2=len(c2), rule3=len(c3))
            step("filter", tau=tau, fee_bound=bound, rule2=len(c2), rule3=len(c3))
            if len(c3) == 1:
                return finish(MATCHED, c3[0])
            if len(c3) > 1:
                return _disambiguate(m, cfg, res, r1, c3, tau, bound, run, step, finish, lambda: it)
            if tau < delta:
                tau = min(tau * cfg.growth, delta)
                res.relaxations += 1
                step("relax_tau", tau=tau)
            elif fee_i < len(cfg.fee_schedule) - 1:
                fee_i += 1
                res.relaxations += 1
                step("relax_fee", fee_bound=cfg.fee_schedule[fee_i])
            else:
                break
        if it >= cfg.max_iterations:
            return finish(ZERO_HIT, reason="iteration cap")
    return finish(ZERO_HIT)


def _disambiguate(m, cfg, res, r1, current, tau, bound, run, step, finish, iterations):
    while iterations() < cfg.max_iterations:
        tau = tau * cfg.shrink
        _, c3 = run(r1, tau, bound)
        res.tau = tau
        step("shrink_tau", tau=tau, rule3=len(c3))
        if len(c3) == 1:
            return finish(MATCHED, c3[0])
        if not c3:
            break
        current = c3
    if not cfg.tie_break:
        res.counts["final"] = len(current)
        return finish(AMBIGUOUS, candidates=sorted(c.tx_hash for c in current))
    chosen = min(current, key=_tie_key(m))
    res.ambiguous_resolved = True
    step("tie_break", among=sorted(c.tx_hash for c in current), chosen=chosen.tx_hash)
    return finish(MATCHED, chosen, ambiguous_resolved=True)


def match_all(deposits: Sequence[CrossChainMetadata], cfg: MatcherConfig, store: FixtureStore,
              bridge: Optional[BridgeConfig] = None, workers: int = 1) -> list:
    if workers <= 1:
        return [match(m, cfg, store, bridge) for m in deposits]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda m: match(m, cfg, store, bridge), deposits))


# -- baseline ----------------------------------------------------------------------

def baseline_ykm(deposits: Sequence[tuple], cfg: MatcherConfig, store: FixtureStore) -> list:
    """Time window plus native-amount similarity, without receiver or log knowledge.

    ``deposits`` holds (deposit Transaction, destination chain name) pairs.
    One candidate is a match; several are a wrong hit; none is a zero hit.
    """
    bound = cfg.fee_schedule[0]
    window = int(cfg.delta_minutes * 60)
    out = []
    for tx, chain_d in deposits:
        res = MatchResult(tx.hash, ZERO_HIT, delta=cfg.delta_minutes, fee_bound=bound)
        if tx.value > 0:
            lo, hi = block_window(store, chain_d, tx.timestamp, tx.timestamp + window)
            cands = []
            for b in range(lo, hi + 1):
                for c in store.transactions_in_block(chain_d, b):
                    if not c.status or c.value <= 0 or not 0 <= c.timestamp - tx.timestamp <= window:
                        continue
                    ratio = Fraction(tx.value - c.value, tx.value)
                    if 0 <= ratio <= bound:
                        cands.append(c)
            res.counts = {"space": len(cands)}
            if len(cands) == 1:
                res.outcome, res.withdrawal = MATCHED, cands[0].hash
            elif cands:
                res.outcome = AMBIGUOUS
        out.append(res)
    return out


# -- scoring -----------------------------------------------------------------------

@dataclass(frozen=True)
class Rates:
    mr: Fraction
    zhr: Fraction
    whr: Fraction
    total: int

    def rendered(self) -> dict:
        return {"MR": f"{float(self.mr) * 100:.2f}%", "ZHR": f"{float(self.zhr) * 100:.2f}%",
                "WHR": f"{float(self.whr) * 100:.2f}%", "#All": self.total}


class GroundTruthGap(ValueError):
    def __init__(self, missing: Sequence[str]):
        super().__init__(f"ground truth has no entry for {len(missing)} deposits: {', '.join(missing[:10])}")
        self.missing = list(missing)


def outcome_class(r: MatchResult, truth: Optional[str]) -> str:
    if r.outcome == ZERO_HIT:
        return "zero"
    if r.outcome == MATCHED and truth is not None and r.withdrawal == truth:
        return "match"
    return "wrong"


def score(results: Sequence[MatchResult], ground_truth: Mapping[str, Optional[str]]) -> Rates:
    missing = [r.deposit for r in results if r.deposit not in ground_truth]
    if missing:
        raise GroundTruthGap(missing)
    n = len(results)
    if n == 0:
        return Rates(Fraction(0), Fraction(0), Fraction(0), 0)
    classes = [outcome_class(r, ground_truth[r.deposit]) for r in results]
    return Rates(Fraction(classes.count("match"), n), Fraction(classes.count("zero"), n),
                 Fraction(classes.count("wrong"), n), n)


def results_jsonl(results: Iterable[MatchResult]) -> str:
    return "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in results)


def summary_csv(rows: Sequence[tuple]) -> str:
    """Rows of (bridge, chain pair, Rates)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bridge", "chain_pair", "MR", "ZHR", "WHR", "#All"])
    for bridge, pair, rates in rows:
        r = rates.rendered()
        w.writerow([bridge, pair, r["MR"], r["ZHR"], r["WHR"], r["#All"]])
    return buf.getvalue()
