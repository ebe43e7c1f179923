"""Function/event ABIs and calldata/log decoding against them."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

from ..chain.types import Address, LogEntry, to_hex
from .codec import (
    AbiType, DecodeError, EncodeError, UnsupportedType, decode_sequence, encode_sequence, encode_value,
    parse_type, type_from_json,
)
from .keccak import keccak256

UNKNOWN_FUNCTION = "unknown_fn"


@dataclass(frozen=True)
class AbiParam:
    name: str
    type: AbiType
    indexed: bool = False


def _signature(name: str, params: Sequence[AbiParam]) -> str:
    return f"{name}({','.join(p.type.canonical() for p in params)})"


@lru_cache(maxsize=8192)
def _signature_hash(signature: str) -> bytes:
    return keccak256(signature.encode())


@dataclass(frozen=True)
class AbiFunction:
    name: str
    params: tuple

    @property
    def signature(self) -> str:
        return _signature(self.name, self.params)

    @property
    def selector(self) -> bytes:
        return _signature_hash(self.signature)[:4]

    @property
    def types(self) -> list:
        return [p.type for p in self.params]

    @classmethod
    def parse(cls, text: str) -> "AbiFunction":
        """Parse a human-readable declaration such as
        ``"lock(address fromAsset, uint64 toChainId, bytes toAddress)"``."""
        name, params = _parse_decl(text)
        return cls(name, tuple(AbiParam(n, t) for n, t, _ in params))


@dataclass(frozen=True)
class AbiEvent:
    name: str
    params: tuple

    def __post_init__(self):
        if sum(p.indexed for p in self.params) > 3:
            raise UnsupportedType(f"event {self.name} has more than 3 indexed params")

    @property
    def signature(self) -> str:
        return _signature(self.name, self.params)

    @property
    def topic0(self) -> bytes:
        return _signature_hash(self.signature)

    @classmethod
    def parse(cls, text: str) -> "AbiEvent":
        name, params = _parse_decl(text)
        return cls(name, tuple(AbiParam(n, t, ix) for n, t, ix in params))


def _parse_decl(text: str):
    text = text.strip().removeprefix("function ").removeprefix("event ").rstrip(";").strip()
    name, _, rest = text.partition("(")
    body = rest[: rest.rindex(")")]
    params = []
    depth, start, parts = 0, 0, []
    for i, ch in enumerate(body):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(body[start:i])
            start = i + 1
    if body.strip():
        parts.append(body[start:])
    for part in parts:
        words = part.split()
        ty = words[0]
        indexed = "indexed" in words[1:]
        rest_words = [w for w in words[1:] if w not in ("indexed", "memory", "calldata", "storage", "payable")]
        params.append((rest_words[-1] if rest_words else "", parse_type(ty), indexed))
    return name.strip(), params


@dataclass(frozen=True)
class DecodedCall:
    name: str
    params: tuple  # ((param_name, value), ...)
    selector: bytes = b""

    @property
    def known(self) -> bool:
        return self.name != UNKNOWN_FUNCTION

    @property
    def param_names(self) -> list:
        return [p for p, _ in self.params]

    def value(self, name: str) -> Any:
        for p, v in self.params:
            if p == name:
                return v
        raise KeyError(name)

    @classmethod
    def of(cls, fn: AbiFunction, values: Sequence[Any]) -> "DecodedCall":
        if len(values) != len(fn.params):
            raise EncodeError(f"{fn.name}: expected {len(fn.params)} values, got {len(values)}")
        return cls(fn.name, tuple((p.name, v) for p, v in zip(fn.params, values)), fn.selector)


def unknown_call(selector: bytes = b"") -> DecodedCall:
    return DecodedCall(UNKNOWN_FUNCTION, (), selector)


@dataclass(frozen=True)
class DecodedEvent:
    name: str
    emitter: Address
    params: tuple  # ((param_name, value), ...)
    known: bool = True

    def value(self, name: str) -> Any:
        for p, v in self.params:
            if p == name:
                return v
        raise KeyError(name)

    def as_dict(self) -> dict:
        return dict(self.params)


class ContractAbi:
    """The functions and events of one contract, indexed by selector / topic0."""

    def __init__(self, functions: Iterable[AbiFunction] = (), events: Iterable[AbiEvent] = ()):
        self.functions: dict[bytes, AbiFunction] = {}
        self.events: dict[bytes, AbiEvent] = {}
        for f in functions:
            self.functions[f.selector] = f
        for e in events:
            self.events[e.topic0] = e

    @classmethod
    def from_json(cls, entries: Union[list, str, Path]) -> "ContractAbi":
        """Load a Solidity-toolchain JSON ABI (list of entries, JSON text or a file path)."""
        if isinstance(entries, Path):
            entries = json.loads(entries.read_text())
        elif isinstance(entries, str):
            entries = json.loads(entries)
        fns, evs = [], []
        for e in entries:
            kind = e.get("type", "function")
            if kind == "function":
                fns.append(AbiFunction(e["name"], tuple(
                    AbiParam(p.get("name", ""), type_from_json(p)) for p in e.get("inputs", []))))
            elif kind == "event":
                if e.get("anonymous"):
                    raise UnsupportedType(f"anonymous event {e['name']} is not supported")
                evs.append(AbiEvent(e["name"], tuple(
                    AbiParam(p.get("name", ""), type_from_json(p), bool(p.get("indexed")))
                    for p in e.get("inputs", []))))
        return cls(fns, evs)

    @classmethod
    def from_signatures(cls, *decls: str) -> "ContractAbi":
        fns, evs = [], []
        for d in decls:
            if d.strip().startswith("event "):
                evs.append(AbiEvent.parse(d))
            else:
                fns.append(AbiFunction.parse(d))
        return cls(fns, evs)

    def to_json(self) -> list:
        def param(p: AbiParam, with_indexed: bool) -> dict:
            d = {"name": p.name, "type": _json_type(p.type)}
            if p.type.kind == "tuple" or (p.type.kind == "array" and p.type.item.kind == "tuple"):
                base = p.type if p.type.kind == "tuple" else p.type.item
                d["components"] = [{"name": "", "type": c.canonical()} for c in base.components]
            if with_indexed:
                d["indexed"] = p.indexed
            return d
        out = [{"type": "function", "name": f.name, "inputs": [param(p, False) for p in f.params]}
               for f in self.functions.values()]
        out += [{"type": "event", "name": e.name, "anonymous": False,
                 "inputs": [param(p, True) for p in e.params]} for e in self.events.values()]
        return out

    def merged(self, other: "ContractAbi") -> "ContractAbi":
        res = ContractAbi()
        res.functions = {**other.functions, **self.functions}
        res.events = {**other.events, **self.events}
        return res

    def function(self, name: str) -> AbiFunction:
        for f in self.functions.values():
            if f.name == name:
                return f
        raise KeyError(name)

    def event(self, name: str) -> AbiEvent:
        for e in self.events.values():
            if e.name == name:
                return e
        raise KeyError(name)


def _json_type(t: AbiType) -> str:
    if t.kind == "tuple":
        return "tuple"
    if t.kind == "array" and t.item.kind == "tuple":
        return "tuple" + t.canonical()[len(t.item.canonical()):]
    return t.canonical()


class AbiRegistry:
    """Per-address ABIs plus a set of common ABIs (e.g. ERC-20) tried for any emitter."""

    def __init__(self, by_address: Optional[Mapping[str, ContractAbi]] = None,
                 common: Optional[ContractAbi] = None):
        self.by_address: dict[Address, ContractAbi] = {Address(a): abi for a, abi in (by_address or {}).items()}
        self.common = common or ContractAbi()

    def add(self, address: str, abi: ContractAbi) -> None:
        addr = Address(address)
        prev = self.by_address.get(addr)
        self.by_address[addr] = abi if prev is None else prev.merged(abi)

    def for_address(self, address: Optional[str]) -> ContractAbi:
        if address is None:
            return self.common
        abi = self.by_address.get(Address(address))
        return abi.merged(self.common) if abi is not None else self.common

    def __contains__(self, address: str) -> bool:
        return Address(address) in self.by_address


def decode_input(data: bytes, abi: ContractAbi) -> DecodedCall:
    """Decode calldata. Unknown selectors yield an ``unknown_fn`` call rather than an error."""
    if len(data) < 4:
        raise DecodeError(f"calldata of {len(data)} bytes has no selector")
    sel = bytes(data[:4])
    fn = abi.functions.get(sel)
    if fn is None:
        return unknown_call(sel)
    values = decode_sequence(fn.types, bytes(data[4:]))
    return DecodedCall(fn.name, tuple((p.name, v) for p, v in zip(fn.params, values)), sel)


def encode_input(call: DecodedCall, abi: ContractAbi) -> bytes:
    fn = abi.functions.get(call.selector) if call.selector else None
    if fn is None:
        matches = [f for f in abi.functions.values() if f.name == call.name and len(f.params) == len(call.params)]
        if not matches:
            raise EncodeError(f"no function {call.name} with {len(call.params)} params in ABI")
        fn = matches[0]
    if len(call.params) != len(fn.params):
        raise EncodeError(f"{fn.name}: expected {len(fn.params)} params, got {len(call.params)}")
    names = [p.name or f"{fn.name}[{i}]" for i, p in enumerate(fn.params)]
    return fn.selector + encode_sequence(fn.types, [v for _, v in call.params], fn.name, names)


def _topic_value(t: AbiType, word: bytes) -> Any:
    # indexed dynamic values are stored as their keccak hash
    if t.dynamic or t.kind in ("array", "tuple"):
        return bytes(word)
    return decode_sequence([t], word)[0]


def decode_log(log: LogEntry, abis: Union[ContractAbi, AbiRegistry]) -> DecodedEvent:
    """Decode a log; events missing from the emitter's ABI come back opaque (name = topic0 hex)."""
    if not log.topics:
        raise DecodeError(f"log {log.log_index} has no topic0")
    abi = abis.for_address(log.emitter) if isinstance(abis, AbiRegistry) else abis
    ev = abi.events.get(bytes(log.topics[0]))
    if ev is None:
        return DecodedEvent(to_hex(log.topics[0]), log.emitter, (), known=False)
    indexed = [p for p in ev.params if p.indexed]
    if len(log.topics) != len(indexed) + 1:
        raise DecodeError(f"log {log.log_index}: {ev.name} expects {len(indexed)} indexed topics, "
                          f"got {len(log.topics) - 1}")
    plain = [p for p in ev.params if not p.indexed]
    try:
        data_vals = iter(decode_sequence([p.type for p in plain], bytes(log.data)))
    except DecodeError as e:
        raise DecodeError(f"log {log.log_index}: {ev.name} data inconsistent with ABI: {e}") from None
    topic_vals = iter(log.topics[1:])
    out = []
    for p in ev.params:
        out.append((p.name, _topic_value(p.type, next(topic_vals)) if p.indexed else next(data_vals)))
    return DecodedEvent(ev.name, log.emitter, tuple(out))


def encode_log(ev: AbiEvent, values: Sequence[Any], *, tx_hash: str, log_index: int,
               emitter: str) -> LogEntry:
    if len(values) != len(ev.params):
        raise EncodeError(f"{ev.name}: expected {len(ev.params)} values, got {len(values)}")
    topics = [ev.topic0]
    plain_t, plain_v = [], []
    for p, v in zip(ev.params, values):
        if p.indexed:
            if p.type.kind == "string":
                topics.append(keccak256(v.encode("utf-8")))
            elif p.type.kind == "bytes":
                topics.append(keccak256(bytes(v)))
            elif p.type.dynamic or p.type.kind in ("array", "tuple"):
                # hashed over the standard encoding; not the packed in-place form
                topics.append(keccak256(encode_value(p.type, v, p.name)))
            else:
                topics.append(encode_sequence([p.type], [v], p.name))
        else:
            plain_t.append(p.type)
            plain_v.append(v)
    data = encode_sequence(plain_t, plain_v, ev.name, [p.name for p in ev.params if not p.indexed])
    return LogEntry(tx_hash=tx_hash, log_index=log_index, emitter=Address(emitter),
                    topics=tuple(topics), data=data)


ERC20_ABI = ContractAbi.from_signatures(
    "function transfer(address to, uint256 amount)",
    "function transferFrom(address from, address to, uint256 amount)",
    "function approve(address spender, uint256 amount)",
    "event Transfer(address indexed from, address indexed to, uint256 value)",
    "event Approval(address indexed owner, address indexed spender, uint256 value)",
)
TRANSFER_TOPIC = ERC20_ABI.event("Transfer").topic0
