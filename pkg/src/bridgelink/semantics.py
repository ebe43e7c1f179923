"""Deposit log semantics: map decoded events to cross-chain metadata via bridge configs.

A :class:`BridgeConfig` is a versioned JSON document. Minimal shape::

    {
      "version": 1,
      "bridge": "poly",
      "delta_minutes": 80,
      "chains": [{"name": "ethereum", "numeric_id": 2, "label": "Ethereum"},
                 {"name": "bsc", "numeric_id": 6, "label": "Binance Smart Chain"}],
      "contracts": {"ethereum": [{"address": "0x...", "abi": [...standard JSON ABI...]}]},
      "rules": [{"event": "LockEvent",
                 "bindings": {"fromAddress": {"field": "sender"},
                              "toAddress": {"field": "receiver"},
                              "fromAssetHash": {"field": "asset_s"},
                              "toAssetHash": {"field": "asset_d"},
                              "amount": {"field": "amount_s", "transform": "decimal"},
                              "toChainId": {"field": "chain_d", "transform": "id2chain"}}}],
      "tokens": {"ethereum": {"0x...": {"decimals": 18, "symbol": "METIS"}}},
      "token_map": [{"asset_s": "0x...", "chain_d": "bsc", "asset_d": "0x..."}]
    }
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

from .abi.contract import AbiRegistry, ContractAbi, DecodedEvent, ERC20_ABI
from .chain.types import NATIVE, NATIVE_DECIMALS, Address, ChainId, RecordError, TokenAmount, Transaction

CONFIG_VERSION = 1
FIELDS = ("sender", "receiver", "asset_s", "amount_s", "chain_d", "asset_d")
REQUIRED_FIELDS = {"sender", "receiver", "asset_s", "amount_s", "chain_d"}
TRANSFORMS = ("identity", "decimal", "id2chain")

diagnostics = logging.getLogger("bridgelink.diagnostics")


class ConfigError(ValueError):
    pass


class MappingError(ValueError):
    pass


class UnparseableDeposit(ValueError):
    pass


@dataclass(frozen=True)
class CrossChainMetadata:
    txhash_s: str
    chain_s: ChainId
    sender: Address
    asset_s: Address
    amount_s: TokenAmount
    timestamp_s: int
    chain_d: ChainId
    receiver: Address
    asset_d: Optional[Address] = None
    txhash_d: Optional[str] = None
    amount_d: Optional[TokenAmount] = None
    timestamp_d: Optional[int] = None

    def __post_init__(self):
        if self.chain_s.name == self.chain_d.name:
            raise MappingError(f"source and destination chain are both {self.chain_s.name}")

    def with_withdrawal(self, txhash_d: str, amount_d: TokenAmount, timestamp_d: int) -> "CrossChainMetadata":
        return replace(self, txhash_d=txhash_d, amount_d=amount_d, timestamp_d=timestamp_d)

    def to_json(self) -> dict:
        def amt(a: Optional[TokenAmount]):
            return None if a is None else {"raw": str(a.raw), "decimals": a.decimals}

        def chain(c: ChainId):
            return {"name": c.name, "numeric_id": c.numeric_id, "label": c.label}

        return {
            "txhash_s": self.txhash_s, "chain_s": chain(self.chain_s), "sender": str(self.sender),
            "asset_s": str(self.asset_s), "amount_s": amt(self.amount_s), "timestamp_s": self.timestamp_s,
            "chain_d": chain(self.chain_d), "receiver": str(self.receiver),
            "asset_d": None if self.asset_d is None else str(self.asset_d),
            "txhash_d": self.txhash_d, "amount_d": amt(self.amount_d), "timestamp_d": self.timestamp_d,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CrossChainMetadata":
        def amt(x):
            return None if x is None else TokenAmount(int(x["raw"]), int(x["decimals"]))

        def chain(x):
            return ChainId(x["name"], int(x["numeric_id"]), x.get("label", ""))

        return cls(
            txhash_s=d["txhash_s"], chain_s=chain(d["chain_s"]), sender=Address(d["sender"]),
            asset_s=Address(d["asset_s"]), amount_s=amt(d["amount_s"]), timestamp_s=int(d["timestamp_s"]),
            chain_d=chain(d["chain_d"]), receiver=Address(d["receiver"]),
            asset_d=Address(d["asset_d"]) if d.get("asset_d") else None, txhash_d=d.get("txhash_d"),
            amount_d=amt(d.get("amount_d")),
            timestamp_d=None if d.get("timestamp_d") is None else int(d["timestamp_d"]),
        )


@dataclass(frozen=True)
class Binding:
    field: str
    transform: str = "identity"


@dataclass(frozen=True)
class MappingRule:
    event: str
    bindings: tuple  # ((event_param, Binding), ...)

    def __post_init__(self):
        fields = [b.field for _, b in self.bindings]
        missing = REQUIRED_FIELDS - set(fields)
        if missing:
            raise ConfigError(f"rule for {self.event} does not bind {sorted(missing)}")
        for p, b in self.bindings:
            if b.field not in FIELDS:
                raise ConfigError(f"rule for {self.event}: unknown metadata field {b.field!r}")
            if b.transform not in TRANSFORMS:
                raise ConfigError(f"rule for {self.event}: unknown transform {b.transform!r} on {p}")
        if len(set(fields)) != len(fields):
            raise ConfigError(f"rule for {self.event} binds a metadata field twice")

    def to_json(self) -> dict:
        return {"event": self.event,
                "bindings": {p: ({"field": b.field} if b.transform == "identity"
                                 else {"field": b.field, "transform": b.transform}) for p, b in self.bindings}}


@dataclass(frozen=True)
class TokenInfo:
    decimals: int
    symbol: str = ""


@dataclass
class BridgeConfig:
    bridge: str
    chains: tuple  # ChainId, ...
    contracts: dict  # chain name -> {Address: ContractAbi}
    rules: tuple
    tokens: dict = field(default_factory=dict)  # chain name -> {Address: TokenInfo}
    token_map: dict = field(default_factory=dict)  # (asset_s, chain_d name) -> asset_d
    delta_minutes: int = 60
    source_path: Optional[str] = None

    def __post_init__(self):
        ids = [c.numeric_id for c in self.chains]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"{self.bridge}: chain numeric ids are not unique")
        names = [c.name for c in self.chains]
        if len(set(names)) != len(names):
            raise ConfigError(f"{self.bridge}: chain names are not unique")
        for chain in self.contracts:
            if chain not in names:
                raise ConfigError(f"{self.bridge}: contracts listed for undeclared chain {chain!r}")
        known_events = {e.name for by_addr in self.contracts.values() for abi in by_addr.values()
                        for e in abi.events.values()}
        for r in self.rules:
            if r.event not in known_events:
                raise ConfigError(f"{self.bridge}: rule event {r.event!r} is not in any contract ABI")
        if self.delta_minutes <= 0:
            raise ConfigError(f"{self.bridge}: delta_minutes must be positive")

    # -- lookups -------------------------------------------------------------

    def chain(self, name: str) -> ChainId:
        for c in self.chains:
            if c.name == name:
                return c
        raise MappingError(f"{self.bridge}: chain {name!r} is not configured")

    def bridge_contracts(self, chain: str) -> set:
        return set(self.contracts.get(chain, {}))

    def registry(self, chain: str) -> AbiRegistry:
        return AbiRegistry(self.contracts.get(chain, {}), common=ERC20_ABI)

    def token_info(self, chain: str, token: Address) -> Optional[TokenInfo]:
        token = Address(token)
        if token == NATIVE:
            return self.tokens.get(chain, {}).get(token, TokenInfo(NATIVE_DECIMALS, "NATIVE"))
        return self.tokens.get(chain, {}).get(token)

    def relevant_addresses(self, chain: str) -> set:
        return self.bridge_contracts(chain) | set(self.tokens.get(chain, {}))

    # -- serialization ---------------------------------------------------------

    @classmethod
    def from_json(cls, d: dict, source_path: Optional[str] = None) -> "BridgeConfig":
        if d.get("version") != CONFIG_VERSION:
            raise ConfigError(f"unsupported bridge config version {d.get('version')!r}")
        try:
            chains = tuple(ChainId(c["name"], int(c["numeric_id"]), c.get("label", "")) for c in d["chains"])
            contracts: dict = {}
            for chain, entries in d.get("contracts", {}).items():
                by_addr = contracts.setdefault(chain, {})
                for e in entries:
                    addr = Address(e["address"])
                    if not e.get("abi"):
                        raise ConfigError(f"missing ABI for configured contract {addr} on {chain}")
                    by_addr[addr] = ContractAbi.from_json(e["abi"])
            rules = tuple(
                MappingRule(r["event"], tuple((p, Binding(b["field"], b.get("transform", "identity")))
                                              for p, b in r["bindings"].items()))
                for r in d["rules"])
            tokens = {chain: {Address(a): TokenInfo(int(t["decimals"]), t.get("symbol", ""))
                              for a, t in toks.items()} for chain, toks in d.get("tokens", {}).items()}
            token_map = {(Address(t["asset_s"]), t["chain_d"]): Address(t["asset_d"]) for t in d.get("token_map", [])}
            return cls(d["bridge"], chains, contracts, rules, tokens, token_map,
                       int(d.get("delta_minutes", 60)), source_path)
        except (KeyError, TypeError, RecordError) as e:
            raise ConfigError(f"malformed bridge config: {e!r}") from None

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BridgeConfig":
        p = Path(path)
        try:
            d = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{p}: not valid JSON: {e}") from None
        return cls.from_json(d, str(p))

    def to_json(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "bridge": self.bridge,
            "delta_minutes": self.delta_minutes,
            "chains": [{"name": c.name, "numeric_id": c.numeric_id, "label": c.label} for c in self.chains],
            "contracts": {chain: [{"address": str(a), "abi": abi.to_json()} for a, abi in sorted(by.items())]
                          for chain, by in sorted(self.contracts.items())},
            "rules": [r.to_json() for r in self.rules],
            "tokens": {chain: {str(a): {"decimals": t.decimals, "symbol": t.symbol} for a, t in sorted(toks.items())}
                       for chain, toks in sorted(self.tokens.items())},
            "token_map": [{"asset_s": str(s), "chain_d": c, "asset_d": str(d)}
                          for (s, c), d in sorted(self.token_map.items())],
        }

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True))


def lint(cfg: BridgeConfig) -> list:
    """Non-fatal problems: overlapping rules and bindings to params the event lacks."""
    warnings = []
    events = {}
    for by_addr in cfg.contracts.values():
        for abi in by_addr.values():
            for e in abi.events.values():
                events.setdefault(e.name, set()).add(tuple(p.name for p in e.params))
    seen = {}
    for i, r in enumerate(cfg.rules):
        if r.event in seen:
            warnings.append(f"rule {i} ({r.event}) overlaps rule {seen[r.event]}; only the first can fire")
        seen.setdefault(r.event, i)
        for p, _ in r.bindings:
            if not any(p in names for names in events.get(r.event, ())):
                warnings.append(f"rule {i} ({r.event}) binds {p!r}, which the event does not declare")
    return warnings


# -- transforms ------------------------------------------------------------------

def decimal_normalize(raw: int, token: Address, cfg: BridgeConfig, chain: str) -> TokenAmount:
    info = cfg.token_info(chain, token)
    if info is None:
        src = cfg.source_path or "the bridge config"
        raise MappingError(f"token {Address(token)} on {chain} has no decimals; add it under "
                           f"tokens.{chain} in {src} or ingest its registry entry")
    return TokenAmount(raw, info.decimals)


def id_to_chain(numeric_id: int, cfg: BridgeConfig) -> ChainId:
    for c in cfg.chains:
        if c.numeric_id == numeric_id:
            return c
    raise MappingError(f"{cfg.bridge}: unknown chain id {numeric_id}")


def _as_address(value: Any, what: str) -> Address:
    if isinstance(value, (bytes, bytearray)):
        if len(value) != 20:
            raise MappingError(f"{what} is {len(value)} bytes; only 20-byte addresses are supported")
        return Address(bytes(value))
    try:
        return Address(value)
    except RecordError as e:
        raise MappingError(f"{what}: {e}") from None


def parse_metadata(tx: Transaction, events: Sequence[DecodedEvent], cfg: BridgeConfig, *,
                   chain_s: Union[str, ChainId]) -> CrossChainMetadata:
    """Apply the first rule (config order) whose event a bridge contract emitted in ``tx``."""
    src = cfg.chain(chain_s.name if isinstance(chain_s, ChainId) else chain_s)
    bridge_addrs = cfg.bridge_contracts(src.name)
    for rule in cfg.rules:
        ev = next((e for e in events if e.known and e.name == rule.event and e.emitter in bridge_addrs), None)
        if ev is None:
            continue
        values = ev.as_dict()
        raw: dict = {}
        for param, b in rule.bindings:
            if param not in values:
                raise MappingError(f"{rule.event} has no param {param!r}")
            raw[b.field] = (values[param], b.transform)
        fields: dict = {}
        for name in ("sender", "receiver", "asset_s", "asset_d"):
            if name in raw:
                fields[name] = _as_address(raw[name][0], f"{rule.event}.{name}")
        amount, tf = raw["amount_s"]
        if not isinstance(amount, int):
            raise MappingError(f"{rule.event}: amount is not an integer")
        if tf == "decimal":
            fields["amount_s"] = decimal_normalize(amount, fields["asset_s"], cfg, src.name)
        else:
            fields["amount_s"] = TokenAmount(amount, 0)
        cid, tf = raw["chain_d"]
        if tf == "id2chain":
            fields["chain_d"] = id_to_chain(int(cid), cfg)
        else:
            fields["chain_d"] = cfg.chain(str(cid))
        mapped = cfg.token_map.get((fields["asset_s"], fields["chain_d"].name))
        if "asset_d" in fields:
            if mapped is not None and mapped != fields["asset_d"]:
                diagnostics.warning("asset_d mismatch", extra={"structured": {
                    "tx": tx.hash, "event_asset_d": str(fields["asset_d"]), "token_map_asset_d": str(mapped)}})
        else:
            fields["asset_d"] = mapped
        return CrossChainMetadata(txhash_s=tx.hash, chain_s=src, timestamp_s=tx.timestamp, **fields)
    raise UnparseableDeposit(f"{tx.hash}: no mapping rule of {cfg.bridge} matches its logs")
