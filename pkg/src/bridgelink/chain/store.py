"""Append-only JSON-Lines fixture store with an in-memory index.

Layout: ``<root>/<chain>/{tx,trace,log,header,degraded}.jsonl``. Every line is
one record serialized with sorted keys, so two stores holding the same
records appended in the same order are byte-identical. Indexes are rebuilt
from the files on open. ``root=None`` gives a purely in-memory store.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import threading
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .types import (
    RECORD_TYPES, Address, BlockHeader, ChainId, ChainRecord, LogEntry, RecordError, TraceCall,
    Transaction, hash32,
)

KINDS = ("tx", "trace", "log", "header")
# keccak256("Transfer(address,address,uint256)"); kept literal to avoid importing the codec here
TRANSFER_TOPIC = bytes.fromhex("ddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef")


class StoreError(ValueError):
    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message if index is None else f"record {index}: {message}")
        self.index = index


class RangeError(LookupError):
    """A query falls outside the stored header range."""


class DataGapError(LookupError):
    """Destination-chain data needed for a query is not in the store."""

    def __init__(self, message: str, missing: tuple = ()):
        super().__init__(message)
        self.missing = missing


def _dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def transfer_recipient(log: LogEntry) -> Optional[Address]:
    """Recipient of an ERC-20 ``Transfer`` log, or None if the log is not one."""
    if len(log.topics) == 3 and log.topics[0] == TRANSFER_TOPIC and len(log.data) == 32:
        word = log.topics[2]
        if not any(word[:12]):
            return Address(word[12:])
    return None


class _ChainIndex:
    def __init__(self):
        self.txs: dict[str, Transaction] = {}
        self.traces: dict[str, list[TraceCall]] = defaultdict(list)
        self.trace_keys: set = set()
        self.logs: dict[str, list[LogEntry]] = defaultdict(list)
        self.log_keys: set = set()
        self.headers: dict[int, BlockHeader] = {}
        self.header_numbers: list[int] = []
        self.header_times: list[int] = []
        self.block_txs: dict[int, list[str]] = defaultdict(list)
        self.touching: dict[Address, set] = defaultdict(set)
        self.degraded: set = set()
        self.block_time: dict[int, int] = {}  # block -> timestamp from any source
        self.time_blocks: list[int] = []


class FixtureStore:
    """Single-writer, multi-reader ledger fixture store."""

    def __init__(self, root: Union[str, Path, None] = None):
        self.root = Path(root) if root is not None else None
        self._chains: dict[str, _ChainIndex] = {}
        self._lock = threading.Lock()
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            self._load()

    # -- persistence -------------------------------------------------------

    def _load(self) -> None:
        for chain_dir in sorted(p for p in self.root.iterdir() if p.is_dir()):
            idx = self._index(chain_dir.name)
            for kind in ("header",) + tuple(k for k in KINDS if k != "header"):
                path = chain_dir / f"{kind}.jsonl"
                if not path.exists():
                    continue
                with path.open() as fh:
                    for line in fh:
                        if line.strip():
                            self._insert(idx, RECORD_TYPES[kind].from_json(json.loads(line)))
            deg = chain_dir / "degraded.jsonl"
            if deg.exists():
                for line in deg.read_text().splitlines():
                    if line.strip():
                        idx.degraded.add(json.loads(line)["tx_hash"])

    def _index(self, chain: str) -> _ChainIndex:
        if chain not in self._chains:
            self._chains[chain] = _ChainIndex()
        return self._chains[chain]

    @staticmethod
    def _chain_name(chain: Union[str, ChainId]) -> str:
        return chain.name if isinstance(chain, ChainId) else chain

    def chains(self) -> list[str]:
        return sorted(self._chains)

    # -- writing -----------------------------------------------------------

    def append(self, chain: Union[str, ChainId], records: Sequence[ChainRecord]) -> int:
        """Validate and persist ``records``; returns how many were new.

        The batch is validated as a whole before anything is written, so a
        malformed record rejects the batch and names its index.
        """
        name = self._chain_name(chain)
        with self._lock:
            idx = self._index(name)
            fresh: list[ChainRecord] = []
            seen: dict = {}
            pending_time: dict[int, int] = {}
            pending_blocks: list[int] = []
            for i, rec in enumerate(records):
                try:
                    rec.validate()
                except (RecordError, ValueError, AttributeError) as e:
                    raise StoreError(str(e), i) from None
                existing = self._existing(idx, rec)
                if existing is not None:
                    if existing != rec:
                        raise StoreError(f"conflicting duplicate of {rec.kind} {rec.key}", i)
                    continue
                key = (rec.kind, rec.key)
                if key in seen:
                    if seen[key] != rec:
                        raise StoreError(f"conflicting duplicate of {rec.kind} {rec.key} in batch", i)
                    continue
                seen[key] = rec
                self._check_time(idx, rec, pending_time, pending_blocks, i)
                self._check_trace(idx, rec, i)
                fresh.append(rec)
            if self.root is not None and fresh:
                chain_dir = self.root / name
                chain_dir.mkdir(parents=True, exist_ok=True)
                by_kind: dict[str, list[str]] = defaultdict(list)
                for rec in fresh:
                    by_kind[rec.kind].append(_dumps(rec.to_json()))
                for kind, lines in by_kind.items():
                    with (chain_dir / f"{kind}.jsonl").open("a") as fh:
                        fh.write("\n".join(lines) + "\n")
            for rec in fresh:
                self._insert(idx, rec)
            return len(fresh)

    def mark_degraded(self, chain: Union[str, ChainId], tx_hashes: Iterable[str]) -> None:
        """Record that these transactions were ingested without call traces."""
        name = self._chain_name(chain)
        with self._lock:
            idx = self._index(name)
            new = [h for h in dict.fromkeys(hash32(h) for h in tx_hashes) if h not in idx.degraded]
            if self.root is not None and new:
                d = self.root / name
                d.mkdir(parents=True, exist_ok=True)
                with (d / "degraded.jsonl").open("a") as fh:
                    fh.write("".join(_dumps({"tx_hash": h}) + "\n" for h in new))
            idx.degraded.update(new)

    @staticmethod
    def _existing(idx: _ChainIndex, rec: ChainRecord):
        if isinstance(rec, Transaction):
            return idx.txs.get(rec.hash)
        if isinstance(rec, BlockHeader):
            return idx.headers.get(rec.number)
        if isinstance(rec, TraceCall):
            if rec.key in idx.trace_keys:
                return next(t for t in idx.traces[rec.tx_hash] if t.index == rec.index)
            return None
        if rec.key in idx.log_keys:
            return next(g for g in idx.logs[rec.tx_hash] if g.log_index == rec.log_index)
        return None

    @staticmethod
    def _check_time(idx: _ChainIndex, rec: ChainRecord, pending: dict, pend_blocks: list, i: int) -> None:
        if isinstance(rec, Transaction):
            block, ts = rec.block_number, rec.timestamp
        elif isinstance(rec, BlockHeader):
            block, ts = rec.number, rec.timestamp
        else:
            return
        known = pending.get(block, idx.block_time.get(block))
        if known is not None:
            if known != ts:
                raise StoreError(f"block {block} already has timestamp {known}, got {ts}", i)
            return
        for blocks, times in ((idx.time_blocks, idx.block_time), (pend_blocks, pending)):
            pos = bisect.bisect_left(blocks, block)
            if pos > 0 and times[blocks[pos - 1]] > ts or pos < len(blocks) and times[blocks[pos]] < ts:
                raise StoreError(f"timestamp {ts} of block {block} breaks monotonicity", i)
        if not pend_blocks or block > pend_blocks[-1]:
            pend_blocks.append(block)
        else:
            bisect.insort(pend_blocks, block)
        pending[block] = ts

    @staticmethod
    def _check_trace(idx: _ChainIndex, rec: ChainRecord, i: int) -> None:
        if isinstance(rec, TraceCall) and rec.depth == 0:
            if any(t.depth == 0 for t in idx.traces.get(rec.tx_hash, ())):
                raise StoreError(f"second external frame for {rec.tx_hash}", i)

    def _insert(self, idx: _ChainIndex, rec: ChainRecord) -> None:
        if isinstance(rec, Transaction):
            idx.txs[rec.hash] = rec
            bl = idx.block_txs[rec.block_number]
            bisect.insort(bl, rec.hash, key=lambda h: idx.txs[h].index)
            self._note_time(idx, rec.block_number, rec.timestamp)
            idx.touching[rec.from_addr].add(rec.hash)
            if rec.to_addr is not None:
                idx.touching[rec.to_addr].add(rec.hash)
        elif isinstance(rec, TraceCall):
            lst = idx.traces[rec.tx_hash]
            bisect.insort(lst, rec, key=lambda t: t.index)
            idx.trace_keys.add(rec.key)
            idx.touching[rec.caller].add(rec.tx_hash)
            idx.touching[rec.callee].add(rec.tx_hash)
        elif isinstance(rec, LogEntry):
            lst = idx.logs[rec.tx_hash]
            bisect.insort(lst, rec, key=lambda g: g.log_index)
            idx.log_keys.add(rec.key)
            to = transfer_recipient(rec)
            if to is not None:
                idx.touching[to].add(rec.tx_hash)
        else:
            idx.headers[rec.number] = rec
            if not idx.header_numbers or rec.number > idx.header_numbers[-1]:
                idx.header_numbers.append(rec.number)
                idx.header_times.append(rec.timestamp)
            else:
                pos = bisect.bisect_left(idx.header_numbers, rec.number)
                idx.header_numbers.insert(pos, rec.number)
                idx.header_times.insert(pos, rec.timestamp)
            self._note_time(idx, rec.number, rec.timestamp)

    @staticmethod
    def _note_time(idx: _ChainIndex, block: int, ts: int) -> None:
        if block not in idx.block_time:
            idx.block_time[block] = ts
            if not idx.time_blocks or block > idx.time_blocks[-1]:
                idx.time_blocks.append(block)
            else:
                bisect.insort(idx.time_blocks, block)

    # -- reading -----------------------------------------------------------

    def _get(self, chain) -> _ChainIndex:
        name = self._chain_name(chain)
        if name not in self._chains:
            raise DataGapError(f"chain {name!r} is not in the store", (name,))
        return self._chains[name]

    def has_chain(self, chain) -> bool:
        return self._chain_name(chain) in self._chains

    def transaction(self, chain, tx_hash: str) -> Transaction:
        return self._get(chain).txs[hash32(tx_hash)]

    def transactions(self, chain) -> list[Transaction]:
        idx = self._get(chain)
        return sorted(idx.txs.values(), key=lambda t: (t.block_number, t.index))

    def transactions_in_block(self, chain, block: int) -> list[Transaction]:
        idx = self._get(chain)
        return [idx.txs[h] for h in idx.block_txs.get(block, ())]

    def traces(self, chain, tx_hash: str) -> list[TraceCall]:
        return list(self._get(chain).traces.get(hash32(tx_hash), ()))

    def logs(self, chain, tx_hash: str) -> list[LogEntry]:
        return list(self._get(chain).logs.get(hash32(tx_hash), ()))

    def headers(self, chain) -> list[BlockHeader]:
        idx = self._get(chain)
        return [idx.headers[n] for n in idx.header_numbers]

    def is_degraded(self, chain, tx_hash: str) -> bool:
        return hash32(tx_hash) in self._get(chain).degraded

    def header_range(self, chain) -> tuple:
        idx = self._get(chain)
        if not idx.header_numbers:
            raise RangeError(f"no headers stored for {self._chain_name(chain)}")
        return idx.header_numbers[0], idx.header_numbers[-1]

    def block_at_or_after(self, chain, t: int) -> int:
        """Smallest stored block number whose timestamp is >= ``t``."""
        idx = self._get(chain)
        if not idx.header_numbers:
            raise RangeError(f"no headers stored for {self._chain_name(chain)}")
        lo_n, hi_n = idx.header_numbers[0], idx.header_numbers[-1]
        lo_t, hi_t = idx.header_times[0], idx.header_times[-1]
        if not lo_t <= t <= hi_t:
            raise RangeError(f"t={t} is outside the stored headers: blocks {lo_n}-{hi_n} cover "
                             f"timestamps {lo_t}-{hi_t}")
        pos = bisect.bisect_left(idx.header_times, t)
        return idx.header_numbers[pos]

    def txs_touching(self, chain, addr: str, block_range: tuple) -> list[Transaction]:
        """Transactions in ``[lo, hi]`` where ``addr`` is sender, recipient, a trace
        caller/callee or an ERC-20 transfer recipient; ordered by (block, index)."""
        idx = self._get(chain)
        lo, hi = block_range
        hashes = idx.touching.get(Address(addr), ())
        out = [idx.txs[h] for h in hashes if h in idx.txs and lo <= idx.txs[h].block_number <= hi]
        out.sort(key=lambda t: (t.block_number, t.index))
        return out

    def digest(self) -> str:
        """SHA-256 over every JSONL file (path + content), in sorted order."""
        h = hashlib.sha256()
        if self.root is None:
            for name in self.chains():
                idx = self._chains[name]
                recs = self.headers(name) + self.transactions(name)
                for tx in recs[len(idx.header_numbers):]:
                    recs += idx.traces.get(tx.hash, []) + idx.logs.get(tx.hash, [])
                h.update(name.encode())
                for rec in recs:
                    h.update(_dumps(rec.to_json()).encode())
            return h.hexdigest()
        for path in sorted(self.root.rglob("*.jsonl")):
            h.update(str(path.relative_to(self.root)).encode())
            h.update(path.read_bytes())
        return h.hexdigest()
