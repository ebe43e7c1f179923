"""Deterministic synthetic multi-chain worlds with exact ground truth.

A :class:`ScenarioSpec` describes bridges, their vocabularies and the noise
applied to the destination side. :func:`generate` turns it into a fixture
store, one :class:`BridgeConfig` per bridge, ABIs for the non-bridge
contracts (tokens, DEX, wrapped native) and a :class:`GroundTruth`. All
randomness comes from one seeded generator consumed in a fixed order, so a
spec reproduces its output byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .abi.contract import ERC20_ABI, AbiEvent, AbiFunction, AbiParam, ContractAbi, DecodedCall, encode_input, encode_log
from .abi.codec import parse_type
from .chain.store import FixtureStore
from .chain.types import NATIVE, NATIVE_DECIMALS, Address, BlockHeader, ChainId, TokenAmount, TraceCall, Transaction
from .features.normalize import DEFAULT_SYNONYMS, canonical_name
from .semantics import Binding, BridgeConfig, CrossChainMetadata, MappingRule, TokenInfo

SPEC_VERSION = 1


class SpecError(ValueError):
    pass


# -- chains and tokens -------------------------------------------------------------

@dataclass(frozen=True)
class ChainSpec:
    name: str
    block_time: int
    label: str = ""
    evm_id: int = 0
    alt_id: int = 0


DEFAULT_CHAINS = (
    ChainSpec("ethereum", 12, "Ethereum", 1, 2),
    ChainSpec("bsc", 3, "Binance Smart Chain", 56, 6),
    ChainSpec("polygon", 2, "Polygon", 137, 17),
)

# symbol -> decimals per chain (missing chains default to 18)
SHARED_TOKENS = {
    "USDT": {"ethereum": 6, "bsc": 18, "polygon": 6},
    "USDC": {"ethereum": 6, "bsc": 18, "polygon": 6},
    "WETH": {},
    "DAI": {},
    "LINK": {},
}
NOISE_TOKENS = ("NZA", "NZB")

DEX_ABI = ContractAbi.from_signatures(
    "function swapExactTokensForTokens(uint256 amountIn, uint256 amountOutMin, address[] path, address to, uint256 deadline)",
    "function addLiquidity(address tokenA, address tokenB, uint256 amountADesired, uint256 amountBDesired, "
    "uint256 amountAMin, uint256 amountBMin, address to, uint256 deadline)",
)
WRAPPED_ABI = ERC20_ABI.merged(ContractAbi.from_signatures("function deposit()", "function withdraw(uint256 wad)"))
VAULT_ABI = ContractAbi.from_signatures(
    "function lockFunds(address token, uint256 amount)",
    "function release(address token, address to, uint256 amount)",
    "function onLocked(bytes32 ref)",
)

# -- distributions -----------------------------------------------------------------


@dataclass(frozen=True)
class LatencyDist:
    """Piecewise-uniform withdrawal latency in seconds."""

    fast_share: float = 0.80
    mid_share: float = 0.15
    min_s: int = 30
    fast_max_s: int = 300
    mid_max_s: int = 1800
    tail_max_s: int = 6900

    def validate(self) -> None:
        if not (0 <= self.fast_share and 0 <= self.mid_share and self.fast_share + self.mid_share <= 1):
            raise SpecError("latency shares must be non-negative and sum to at most 1")
        if not 0 < self.min_s <= self.fast_max_s <= self.mid_max_s <= self.tail_max_s:
            raise SpecError("latency bounds must satisfy 0 < min <= fast <= mid <= tail")

    def sample(self, rng: np.random.Generator) -> int:
        u, v = rng.random(), rng.random()
        if u < self.fast_share:
            lo, hi = self.min_s, self.fast_max_s
        elif u < self.fast_share + self.mid_share:
            lo, hi = self.fast_max_s, self.mid_max_s
        else:
            lo, hi = self.mid_max_s, self.tail_max_s
        return int(lo + v * (hi - lo))


@dataclass(frozen=True)
class FeeDist:
    """Fee ratio in parts per million: a low band and a heavy tail."""

    low_share: float = 0.90
    low_max_ppm: int = 10_000
    tail_max_ppm: int = 50_000

    def validate(self) -> None:
        if not 0 <= self.low_share <= 1:
            raise SpecError("fee low_share must lie in [0, 1]")
        if not 0 <= self.low_max_ppm <= self.tail_max_ppm:
            raise SpecError("fee bounds must satisfy 0 <= low <= tail")
        if self.tail_max_ppm >= 1_000_000:
            raise SpecError(f"fee of {self.tail_max_ppm / 1e4}% leaves nothing to withdraw")

    def sample(self, rng: np.random.Generator) -> int:
        u, v = rng.random(), rng.random()
        if u < self.low_share:
            return int(v * self.low_max_ppm)
        return int(self.low_max_ppm + v * (self.tail_max_ppm - self.low_max_ppm))


NATIVE_SHAPES = ("direct", "refund", "wrap")
TOKEN_SHAPES = ("pull", "vault", "callback")
DEFAULT_SHAPES = {"direct": 0.40, "refund": 0.30, "wrap": 0.30, "pull": 0.35, "vault": 0.35, "callback": 0.30}
NON_DEPOSIT_KINDS = ("transfer", "approve", "native_send", "swap", "lp_add", "admin", "claim")
DEFAULT_NON_DEPOSIT_MIX = {"transfer": 0.25, "approve": 0.15, "native_send": 0.10, "swap": 0.15,
                           "lp_add": 0.05, "admin": 0.20, "claim": 0.10}


@dataclass(frozen=True)
class BridgeSpec:
    name: str
    style: str = "shared"
    destinations: tuple = ("bsc", "polygon")
    pairs: int = 500
    non_deposits: int = 500
    delta_minutes: int = 60
    native_share: float = 0.3
    native_payout: str = "router"  # or "direct": the relayer pays the receiver in the outer call
    latency: LatencyDist = LatencyDist()
    fee: FeeDist = FeeDist()
    shapes: dict = field(default_factory=lambda: dict(DEFAULT_SHAPES))
    non_deposit_mix: dict = field(default_factory=lambda: dict(DEFAULT_NON_DEPOSIT_MIX))
    rare_share: float = 0.15
    rare_admin_share: float = 0.5
    pair_spacing_s: float = 20.0
    id_scheme: str = "evm"  # or "alt": bridge-specific chain numbering

    def validate(self, chains: Sequence[str], source: str) -> None:
        if not re.fullmatch(r"[a-z][a-z0-9_-]*", self.name):
            raise SpecError(f"bridge name {self.name!r} must be lowercase [a-z0-9_-]")
        if self.style not in ("shared", "disjoint"):
            raise SpecError(f"{self.name}: style must be shared or disjoint")
        if not self.destinations or source in self.destinations:
            raise SpecError(f"{self.name}: destinations must be non-empty and exclude the source chain")
        for d in self.destinations:
            if d not in chains:
                raise SpecError(f"{self.name}: unknown destination chain {d!r}")
        if self.pairs < 0 or self.non_deposits < 0:
            raise SpecError(f"{self.name}: counts must be non-negative")
        if self.delta_minutes <= 0:
            raise SpecError(f"{self.name}: delta_minutes must be positive")
        for nm in ("native_share", "rare_share", "rare_admin_share"):
            if not 0 <= getattr(self, nm) <= 1:
                raise SpecError(f"{self.name}: {nm} must lie in [0, 1]")
        if self.native_payout not in ("router", "direct"):
            raise SpecError(f"{self.name}: native_payout must be router or direct")
        if self.id_scheme not in ("evm", "alt"):
            raise SpecError(f"{self.name}: id_scheme must be evm or alt")
        if self.pair_spacing_s <= 0:
            raise SpecError(f"{self.name}: pair spacing must be positive")
        self.latency.validate()
        self.fee.validate()
        for table, keys in ((self.shapes, NATIVE_SHAPES + TOKEN_SHAPES), (self.non_deposit_mix, NON_DEPOSIT_KINDS)):
            if set(table) - set(keys) or any(w < 0 for w in table.values()):
                raise SpecError(f"{self.name}: bad weight table {table}")
        if self.native_share > 0 and not sum(self.shapes.get(s, 0) for s in NATIVE_SHAPES):
            raise SpecError(f"{self.name}: native deposits need a native shape weight")
        if self.native_share < 1 and not sum(self.shapes.get(s, 0) for s in TOKEN_SHAPES):
            raise SpecError(f"{self.name}: token deposits need a token shape weight")
        if self.non_deposits and not sum(self.non_deposit_mix.values()):
            raise SpecError(f"{self.name}: non-deposit mix is all zero")


@dataclass(frozen=True)
class NoiseSpec:
    deletion_rate: float = 0.0
    decoy_rate: float = 0.0
    same_address_prob: float = 0.97
    background_per_user: float = 3.0
    background_horizon_s: int = 8 * 3600

    def validate(self) -> None:
        for nm in ("deletion_rate", "decoy_rate", "same_address_prob"):
            if not 0 <= getattr(self, nm) <= 1:
                raise SpecError(f"noise {nm} must lie in [0, 1]")
        if self.deletion_rate + self.decoy_rate > 1:
            raise SpecError("deleted and decoyed pairs are disjoint, so their rates cannot exceed 1 together")
        if self.background_per_user < 0 or self.background_horizon_s <= 0:
            raise SpecError("background rate must be >= 0 and its horizon positive")


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    bridges: tuple
    noise: NoiseSpec = NoiseSpec()
    chains: tuple = DEFAULT_CHAINS
    source_chain: str = "ethereum"
    start_time: int = 1_680_000_000
    header_margin_minutes: int = 600

    def validate(self) -> None:
        names = [c.name for c in self.chains]
        if len(set(names)) != len(names):
            raise SpecError("chain names must be unique")
        if any(c.block_time <= 0 for c in self.chains):
            raise SpecError("block times must be positive")
        if self.source_chain not in names:
            raise SpecError(f"source chain {self.source_chain!r} is not declared")
        if not self.bridges:
            raise SpecError("a scenario needs at least one bridge")
        bnames = [b.name for b in self.bridges]
        if len(set(bnames)) != len(bnames):
            raise SpecError("bridge names must be unique")
        for b in self.bridges:
            b.validate(names, self.source_chain)
            if 2 * b.delta_minutes > self.header_margin_minutes:
                raise SpecError(f"{b.name}: header margin must cover twice delta")
        self.noise.validate()
        if self.start_time < 0 or self.header_margin_minutes <= 0:
            raise SpecError("start time must be >= 0 and header margin positive")

    def to_json(self) -> dict:
        d = asdict(self)
        d["version"] = SPEC_VERSION
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ScenarioSpec":
        if d.get("version", SPEC_VERSION) != SPEC_VERSION:
            raise SpecError(f"unsupported scenario version {d.get('version')!r}")
        try:
            bridges = []
            for b in d["bridges"]:
                b = dict(b)
                b["latency"] = LatencyDist(**b.get("latency", {}))
                b["fee"] = FeeDist(**b.get("fee", {}))
                b["destinations"] = tuple(b.get("destinations", ("bsc", "polygon")))
                bridges.append(BridgeSpec(**b))
            chains = tuple(ChainSpec(**c) for c in d.get("chains", [asdict(c) for c in DEFAULT_CHAINS]))
            spec = cls(seed=int(d["seed"]), bridges=tuple(bridges), noise=NoiseSpec(**d.get("noise", {})),
                       chains=chains, source_chain=d.get("source_chain", "ethereum"),
                       start_time=int(d.get("start_time", 1_680_000_000)),
                       header_margin_minutes=int(d.get("header_margin_minutes", 600)))
        except (KeyError, TypeError) as e:
            raise SpecError(f"malformed scenario spec: {e}") from None
        spec.validate()
        return spec

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScenarioSpec":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise SpecError(f"{path}: not valid JSON: {e}") from None
        return cls.from_json(d)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True))

    def chain(self, name: str) -> ChainSpec:
        return next(c for c in self.chains if c.name == name)


CLEAN_LATENCY = LatencyDist(fast_share=0.85, mid_share=0.15, mid_max_s=1790, tail_max_s=1790)
CLEAN_FEE = FeeDist(low_share=1.0, low_max_ppm=29_000, tail_max_ppm=29_000)
TAIL_LATENCY = LatencyDist(fast_share=0.5, mid_share=0.2, tail_max_s=300 * 60)
PRESETS = ("default", "clean", "noisy", "latency_tail", "erc20", "native", "disjoint")
BRIDGE_NAMES = ("atlas", "beacon", "corsair")


def preset(name: str, seed: int = 0, pairs: int = 500, non_deposits: int = 500) -> ScenarioSpec:
    """Ready-made scenarios for the test suite and the command line."""
    if name not in PRESETS:
        raise SpecError(f"unknown preset {name!r}; expected one of {PRESETS}")
    def mk(n, **kw):
        return BridgeSpec(n, pairs=pairs, non_deposits=non_deposits, **kw)

    noise = NoiseSpec()
    margin = 600
    if name == "default":
        bridges = [mk(n, id_scheme=s) for n, s in zip(BRIDGE_NAMES, ("alt", "evm", "evm"))]
    elif name == "clean":
        bridges = [mk(n, latency=CLEAN_LATENCY, fee=CLEAN_FEE) for n in BRIDGE_NAMES]
    elif name == "noisy":
        bridges = [mk(n) for n in BRIDGE_NAMES]
        noise = NoiseSpec(deletion_rate=0.05, decoy_rate=0.10)
    elif name == "latency_tail":
        bridges = [mk("atlas", latency=TAIL_LATENCY, delta_minutes=120)]
    elif name == "erc20":
        bridges = [mk(n, native_share=0.05) for n in BRIDGE_NAMES]
    elif name == "native":
        bridges = [mk("atlas", native_share=1.0, native_payout="direct", fee=FeeDist(1.0, 10_000, 10_000),
                      latency=CLEAN_LATENCY, pair_spacing_s=600.0, destinations=("bsc",))]
    else:
        bridges = [mk("atlas"), mk("beacon"), mk("umbra", style="disjoint")]
    spec = ScenarioSpec(seed=seed, bridges=tuple(bridges), noise=noise, header_margin_minutes=margin)
    spec.validate()
    return spec


# -- vocabularies ------------------------------------------------------------------

@dataclass(frozen=True)
class EventTemplate:
    event: AbiEvent
    roles: tuple


@dataclass(frozen=True)
class CallTemplate:
    fn: AbiFunction
    roles: tuple
    event: Optional[EventTemplate] = None
    kinds: frozenset = frozenset({"native", "token"})
    payable: bool = False


@dataclass(frozen=True)
class BridgeVocab:
    style: str
    seed: int
    deposits: tuple
    weights: tuple
    admin: tuple
    claim: CallTemplate
    withdraw: CallTemplate

    @property
    def function_names(self) -> set:
        return {t.fn.name for t in self.deposits + self.admin + (self.claim, self.withdraw)}

    @property
    def param_names(self) -> set:
        return {p.name for t in self.deposits + self.admin + (self.claim, self.withdraw) for p in t.fn.params}

    @property
    def events(self) -> list:
        return list({t.event.event.name: t.event for t in self.deposits}.values())


_ROLE = re.compile(r":(\w+)")


def _decl(text: str) -> tuple:
    """``"f(address a:receiver, ...)"`` -> (declaration without roles, roles)."""
    return _ROLE.sub("", text), tuple(_ROLE.findall(text))


def _fn(text: str, event: Optional[EventTemplate] = None, kinds: str = "native token",
        payable: bool = False) -> CallTemplate:
    decl, roles = _decl(text)
    return CallTemplate(AbiFunction.parse(decl), roles, event, frozenset(kinds.split()), payable)


def _ev(text: str) -> EventTemplate:
    decl, roles = _decl(text)
    return EventTemplate(AbiEvent.parse(decl), roles)


SHARED_EVENTS = {
    "LockEvent": _ev("event LockEvent(address fromAssetHash:asset_s, address fromAddress:sender, uint64 toChainId:chain_d, "
                     "address toAssetHash:asset_d, address toAddress:receiver, uint256 amount:amount)"),
    "Send": _ev("event Send(bytes32 transferId:ref, address sender:sender, address receiver:receiver, address token:asset_s, "
                "uint256 amount:amount, uint64 dstChainId:chain_d, uint64 nonce:nonce, uint32 maxSlippage:small)"),
    "Deposited": _ev("event Deposited(address indexed depositor:sender, address indexed recipient:receiver, address token:asset_s, "
                     "uint256 amount:amount, uint256 dstChainId:chain_d, uint256 nonce:nonce)"),
    "LogAnySwapOut": _ev("event LogAnySwapOut(address indexed token:asset_s, address indexed from:sender, address indexed to:receiver, "
                         "uint256 amount:amount, uint256 fromChainID:chain_s, uint256 toChainID:chain_d)"),
}
SHARED_DEPOSITS = (
    _fn("lock(address fromAssetHash:asset_s, uint64 toChainId:chain_d, address toAddress:receiver, uint256 amount:amount, "
        "uint256 fee:small, uint256 id:nonce)", SHARED_EVENTS["LockEvent"], payable=True),
    _fn("send(address receiver:receiver, address token:asset_s, uint256 amount:amount, uint64 dstChainId:chain_d, "
        "uint64 nonce:nonce, uint32 maxSlippage:small)", SHARED_EVENTS["Send"], "token"),
    _fn("sendNative(address receiver:receiver, uint256 amount:amount, uint64 dstChainId:chain_d, uint64 nonce:nonce, "
        "uint32 maxSlippage:small)", SHARED_EVENTS["Send"], "native", payable=True),
    _fn("deposit(address token:asset_s, uint256 amount:amount, address recipient:receiver, uint256 dstChainId:chain_d)",
        SHARED_EVENTS["Deposited"], payable=True),
    _fn("anySwapOut(address token:asset_s, address to:receiver, uint256 amount:amount, uint256 toChainID:chain_d)",
        SHARED_EVENTS["LogAnySwapOut"], "token"),
    _fn("anySwapOutNative(address token:asset_s, address to:receiver, uint256 toChainID:chain_d)",
        SHARED_EVENTS["LogAnySwapOut"], "native", payable=True),
)
SHARED_ADMIN = (
    _fn("setFee(address token:token, uint256 feeRate:small)"),
    _fn("emergencyWithdraw(address token:token, address to:account, uint256 amount:big)"),
    _fn("updateRelayer(address account:account, bool enabled:flag)"),
    _fn("withdrawFee(address token:token, address to:account, uint256 amount:big)"),
    _fn("pause(address token:token)"),
)
SHARED_CLAIM = _fn("claimRefund(bytes32 transferId:ref, address receiver:receiver)")
SHARED_WITHDRAW = (
    _fn("unlock(address toAssetHash:asset_d, address toAddress:receiver, uint256 amount:amount, bytes32 srcTxHash:ref)"),
    _fn("relay(address receiver:receiver, address token:asset_d, uint256 amount:amount, bytes32 srcTransferId:ref)"),
    _fn("anySwapIn(bytes32 txs:ref, address token:asset_d, address to:receiver, uint256 amount:amount, uint256 fromChainID:chain_s)"),
)
SHARED_FUNCTION_NAMES = frozenset(t.fn.name for t in SHARED_DEPOSITS + SHARED_ADMIN + (SHARED_CLAIM,) + SHARED_WITHDRAW)
SHARED_PARAM_NAMES = frozenset(p.name for t in SHARED_DEPOSITS + SHARED_ADMIN + (SHARED_CLAIM,) + SHARED_WITHDRAW
                               for p in t.fn.params)

_SYLLABLES = ("zor", "qua", "vex", "mib", "tal", "pry", "gno", "hux", "kel", "wib", "dra", "fyn", "lom", "sek",
              "bru", "nix", "cav", "tep", "yol", "rud", "jas", "ost", "pim", "gav", "zel", "hob", "uxi", "mar")
_RESERVED = ({canonical_name(n) for n in SHARED_FUNCTION_NAMES | SHARED_PARAM_NAMES}
             | {canonical_name(n) for names in DEFAULT_SYNONYMS.values() for n in names}
             | {canonical_name(n) for n in DEFAULT_SYNONYMS})


class _Names:
    """Fresh camelCase identifiers outside the shared families and synonym lists."""

    def __init__(self, rng: np.random.Generator, used: Optional[set] = None):
        self.rng = rng
        self.used = used if used is not None else set()

    def __call__(self, parts: int = 3, local: Optional[set] = None) -> str:
        """A fresh name; with ``local`` it only has to be new within that set (parameters)."""
        used = self.used if local is None else local
        while True:
            syl = [_SYLLABLES[int(i)] for i in self.rng.integers(0, len(_SYLLABLES), parts)]
            name = syl[0] + "".join(s.capitalize() for s in syl[1:])
            c = canonical_name(name)
            if c not in _RESERVED and c not in used:
                used.add(c)
                return name


_TYPE_OF = {"asset_s": "address", "asset_d": "address", "receiver": "address", "sender": "address",
            "token": "address", "account": "address", "amount": "uint256", "big": "uint256", "chain_d": "uint256",
            "chain_s": "uint256", "nonce": "uint64", "small": "uint32", "ref": "bytes32", "flag": "bool"}


def _fresh_call(names: _Names, roles: Sequence[str], event: Optional[EventTemplate] = None,
                kinds: str = "native token", payable: bool = False) -> CallTemplate:
    local: set = set()
    params = tuple(AbiParam(names(2, local), parse_type(_TYPE_OF[r])) for r in roles)
    return CallTemplate(AbiFunction(names(), params), tuple(roles), event, frozenset(kinds.split()), payable)


def _fresh_event(names: _Names, roles: Sequence[str]) -> EventTemplate:
    local: set = set()
    params = tuple(AbiParam(names(2, local), parse_type(_TYPE_OF[r]), i < 2) for i, r in enumerate(roles))
    return EventTemplate(AbiEvent(names().capitalize(), params), tuple(roles))


def make_bridge_vocab(style: str, seed: int) -> BridgeVocab:
    """Function/event vocabulary of one bridge.

    ``shared`` takes every deposit family with seeded mixture weights;
    ``disjoint`` invents names that share nothing with those families.
    """
    rng = np.random.default_rng([seed, 0x70CAB])
    if style == "shared":
        weights = tuple(float(w) for w in rng.dirichlet(np.full(len(SHARED_DEPOSITS), 4.0)))
        withdraw = SHARED_WITHDRAW[int(rng.integers(len(SHARED_WITHDRAW)))]
        return BridgeVocab(style, seed, SHARED_DEPOSITS, weights, SHARED_ADMIN, SHARED_CLAIM, withdraw)
    if style != "disjoint":
        raise SpecError(f"unknown vocabulary style {style!r}")
    names = _Names(rng)
    event = _fresh_event(names, ("sender", "receiver", "asset_s", "amount", "chain_d", "nonce"))
    deposits = (
        _fresh_call(names, ("asset_s", "receiver", "amount", "chain_d", "nonce", "ref"), event, payable=True),
        _fresh_call(names, ("receiver", "amount", "chain_d", "nonce", "ref", "small"), event, "native", payable=True),
    )
    admin = tuple(_fresh_call(names, roles) for roles in (
        ("token", "account", "big", "small", "ref", "flag"),
        ("account", "token", "small", "big", "nonce", "ref"),
        ("token", "small", "flag", "account", "ref", "big"),
    ))
    claim = _fresh_call(names, ("ref", "receiver", "token", "big", "nonce", "small"))
    withdraw = _fresh_call(names, ("ref", "asset_d", "receiver", "amount", "chain_s", "nonce"))
    return BridgeVocab(style, seed, deposits, (0.5, 0.5), admin, claim, withdraw)


# -- ground truth ------------------------------------------------------------------

DEPOSIT = "deposit"
NON_DEPOSIT = "non-deposit"


@dataclass(frozen=True)
class TruthPair:
    bridge: str
    deposit: str
    withdrawal: Optional[str]
    metadata: CrossChainMetadata
    deleted: bool = False
    decoyed: bool = False
    same_address: bool = True

    def to_json(self) -> dict:
        return {"bridge": self.bridge, "deposit": self.deposit, "withdrawal": self.withdrawal,
                "metadata": self.metadata.to_json(), "deleted": self.deleted, "decoyed": self.decoyed,
                "same_address": self.same_address}

    @classmethod
    def from_json(cls, d: dict) -> "TruthPair":
        return cls(d["bridge"], d["deposit"], d["withdrawal"], CrossChainMetadata.from_json(d["metadata"]),
                   d["deleted"], d["decoyed"], d["same_address"])


@dataclass(frozen=True)
class TruthLabel:
    chain: str
    bridge: str
    label: str
    category: str


@dataclass
class GroundTruth:
    pairs: list = field(default_factory=list)
    labels: dict = field(default_factory=dict)  # tx hash -> TruthLabel

    def withdrawal_of(self) -> dict:
        return {p.deposit: p.withdrawal for p in self.pairs}

    def pairs_of(self, bridge: str) -> list:
        return [p for p in self.pairs if p.bridge == bridge]

    def labeled(self, chain: str, bridge: Optional[str] = None) -> list:
        """(tx hash, TruthLabel) on ``chain`` in hash order."""
        return [(h, lab) for h, lab in sorted(self.labels.items())
                if lab.chain == chain and lab.label in (DEPOSIT, NON_DEPOSIT) and (bridge is None or lab.bridge == bridge)]

    def to_json(self) -> dict:
        return {"pairs": [p.to_json() for p in self.pairs],
                "labels": [{"tx": h, **asdict(lab)} for h, lab in sorted(self.labels.items())]}

    @classmethod
    def from_json(cls, d: dict) -> "GroundTruth":
        return cls([TruthPair.from_json(p) for p in d["pairs"]],
                   {x["tx"]: TruthLabel(x["chain"], x["bridge"], x["label"], x["category"]) for x in d["labels"]})


# -- ledger assembly ---------------------------------------------------------------

@dataclass
class _PendingTx:
    seq: int
    hash: str
    block: int
    ts: int
    from_addr: Address
    to_addr: Optional[Address]
    value: int
    input: bytes
    frames: list  # (depth, kind, caller, callee, value, input)
    logs: list  # (emitter, AbiEvent, values)


class _ChainBuilder:
    def __init__(self, spec: ChainSpec, start: int, seed: int):
        self.spec = spec
        self.start = start
        self.seed = seed
        self.pending: list[_PendingTx] = []
        self.last_t = start

    def block_of(self, t: int) -> tuple:
        bt = self.spec.block_time
        block = -(-(t - self.start) // bt) + 1
        return block, self.start + (block - 1) * bt

    def add(self, t: int, from_addr, to_addr, value: int, data: bytes, frames=(), logs=()) -> _PendingTx:
        """``frames`` are the internal calls as (depth, caller, callee, value, input); the
        external frame is derived from the transaction itself."""
        seq = len(self.pending)
        h = "0x" + hashlib.sha256(f"{self.seed}|{self.spec.name}|{seq}".encode()).hexdigest()
        block, ts = self.block_of(t)
        ext = (0, "external", from_addr, to_addr, value, data)
        inner = [(d, "call", a, b, v, inp) for d, a, b, v, inp in frames]
        p = _PendingTx(seq, h, block, ts, from_addr, to_addr, value, data, [ext] + inner, list(logs))
        self.pending.append(p)
        self.last_t = max(self.last_t, ts)
        return p

    def records(self, until: int) -> list:
        txs, traces, logs = [], [], []
        index: dict[int, int] = {}
        for p in sorted(self.pending, key=lambda p: (p.block, p.seq)):
            i = index.get(p.block, 0)
            index[p.block] = i + 1
            txs.append(Transaction(p.hash, p.block, i, p.ts, p.from_addr, p.to_addr, p.value, p.input))
            for k, (depth, kind, a, b, v, inp) in enumerate(p.frames):
                traces.append(TraceCall(p.hash, k, depth, kind, a, b, v, inp))
            for k, (emitter, ev, values) in enumerate(p.logs):
                logs.append(encode_log(ev, values, tx_hash=p.hash, log_index=k, emitter=emitter))
        last_block, _ = self.block_of(max(until, self.last_t))
        bt = self.spec.block_time
        headers = [BlockHeader(n, self.start + (n - 1) * bt) for n in range(1, last_block + 1)]
        return headers + txs + traces + logs


TRANSFER = ERC20_ABI.event("Transfer")
APPROVAL = ERC20_ABI.event("Approval")


@dataclass
class World:
    spec: ScenarioSpec
    store: FixtureStore
    configs: dict  # bridge name -> BridgeConfig
    abis: dict  # chain -> {Address: ContractAbi} for non-bridge contracts
    truth: GroundTruth
    root: Optional[Path] = None

    def registry_abis(self, chain: str) -> dict:
        """Every known ABI on ``chain``: world contracts plus all bridge contracts."""
        out = dict(self.abis.get(chain, {}))
        for cfg in self.configs.values():
            out.update(cfg.contracts.get(chain, {}))
        return out

    def abis_json(self) -> dict:
        return {chain: [{"address": str(a), "abi": abi.to_json()} for a, abi in sorted(by.items())]
                for chain, by in sorted(self.abis.items())}

    def save(self, root: Union[str, Path]) -> None:
        root = Path(root)
        (root / "configs").mkdir(parents=True, exist_ok=True)
        for name, cfg in sorted(self.configs.items()):
            cfg.save(root / "configs" / f"{name}.json")
        (root / "abis.json").write_text(json.dumps(self.abis_json(), indent=1, sort_keys=True))
        (root / "truth.json").write_text(json.dumps(self.truth.to_json(), indent=1, sort_keys=True))
        self.spec.save(root / "spec.json")

    def digest(self) -> str:
        h = hashlib.sha256(self.store.digest().encode())
        for name, cfg in sorted(self.configs.items()):
            h.update(json.dumps(cfg.to_json(), sort_keys=True).encode())
        h.update(json.dumps(self.abis_json(), sort_keys=True).encode())
        h.update(json.dumps(self.truth.to_json(), sort_keys=True).encode())
        return h.hexdigest()


def load_world(root: Union[str, Path]) -> World:
    root = Path(root)
    spec = ScenarioSpec.load(root / "spec.json")
    configs = {p.stem: BridgeConfig.load(p) for p in sorted((root / "configs").glob("*.json"))}
    abis = {chain: {Address(e["address"]): ContractAbi.from_json(e["abi"]) for e in entries}
            for chain, entries in json.loads((root / "abis.json").read_text()).items()}
    truth = GroundTruth.from_json(json.loads((root / "truth.json").read_text()))
    return World(spec, FixtureStore(root / "store"), configs, abis, truth, root)


class _Generator:
    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        self.src = spec.source_chain
        self.chains = {c.name: _ChainBuilder(c, spec.start_time, spec.seed) for c in spec.chains}
        self.truth = GroundTruth()
        self.names = _Names(self.rng)
        # world contracts
        self.tokens = {chain: {sym: self.addr(f"token|{sym}|{chain}") for sym in SHARED_TOKENS} for chain in self.chains}
        self.noise_tokens = {chain: [self.addr(f"noise|{s}|{chain}") for s in NOISE_TOKENS] for chain in self.chains}
        self.dex = {chain: self.addr(f"dex|{chain}") for chain in self.chains}
        self.abis = {}
        for chain in self.chains:
            by = {a: ERC20_ABI for a in self.tokens[chain].values()}
            by[self.tokens[chain]["WETH"]] = WRAPPED_ABI
            by.update({a: ERC20_ABI for a in self.noise_tokens[chain]})
            by[self.dex[chain]] = DEX_ABI
            self.abis[chain] = by

    def addr(self, label: str) -> Address:
        return Address(hashlib.sha256(f"{self.spec.seed}|{label}".encode()).digest()[:20])

    @staticmethod
    def decimals(sym: str, chain: str) -> int:
        return SHARED_TOKENS[sym].get(chain, 18)

    def label(self, p: _PendingTx, chain: str, bridge: str, label: str, category: str) -> None:
        self.truth.labels[p.hash] = TruthLabel(chain, bridge, label, category)

    # -- per bridge ----------------------------------------------------------------

    def bridge_setup(self, b: BridgeSpec, bi: int) -> dict:
        vocab = make_bridge_vocab(b.style, self.spec.seed * 1000 + bi)
        s = {"vocab": vocab, "router": self.addr(f"{b.name}|router"), "vault": self.addr(f"{b.name}|vault"),
             "relayer": self.addr(f"{b.name}|relayer"), "admins": [self.addr(f"{b.name}|admin|{i}") for i in range(3)],
             "dest_router": {d: self.addr(f"{b.name}|router|{d}") for d in b.destinations},
             "rare_deposits": [], "rare_admin": []}
        chains = []
        for c in self.spec.chains:
            if c.name == self.src or c.name in b.destinations:
                cid = c.evm_id if b.id_scheme == "evm" else c.alt_id
                chains.append(ChainId(c.name, cid, c.label))
        s["chains"] = {c.name: c for c in chains}
        return s

    def bridge_config(self, b: BridgeSpec, s: dict) -> BridgeConfig:
        vocab: BridgeVocab = s["vocab"]
        calls = list(vocab.deposits) + s["rare_deposits"] + list(vocab.admin) + s["rare_admin"] + [vocab.claim]
        events = {t.event.event.name: t.event.event for t in vocab.deposits}
        router_abi = ContractAbi([t.fn for t in calls], events.values())
        contracts = {self.src: {s["router"]: router_abi, s["vault"]: VAULT_ABI}}
        for d in b.destinations:
            contracts[d] = {s["dest_router"][d]: ContractAbi([vocab.withdraw.fn])}
        rules = []
        field_of = {"sender": ("sender", "identity"), "receiver": ("receiver", "identity"),
                    "asset_s": ("asset_s", "identity"), "asset_d": ("asset_d", "identity"),
                    "amount": ("amount_s", "decimal"), "chain_d": ("chain_d", "id2chain")}
        for name, et in sorted(events.items()):
            et_roles = next(t.event.roles for t in vocab.deposits if t.event.event.name == name)
            bindings = tuple((p.name, Binding(*field_of[r])) for p, r in zip(et.params, et_roles) if r in field_of)
            rules.append(MappingRule(name, bindings))
        chain_names = [self.src] + list(b.destinations)
        tokens = {c: {a: TokenInfo(self.decimals(sym, c), sym) for sym, a in self.tokens[c].items()} for c in chain_names}
        token_map = {}
        for d in b.destinations:
            token_map[(NATIVE, d)] = NATIVE
            for sym, a in self.tokens[self.src].items():
                token_map[(a, d)] = self.tokens[d][sym]
        return BridgeConfig(b.name, tuple(s["chains"].values()), contracts, tuple(rules), tokens, token_map,
                            b.delta_minutes)

    def deposits(self, b: BridgeSpec, s: dict) -> list:
        rng = self.rng
        vocab: BridgeVocab = s["vocab"]
        src = self.chains[self.src]
        R, V, weth = s["router"], s["vault"], self.tokens[self.src]["WETH"]
        t = float(self.spec.start_time + 60)
        out = []
        prior_diff_senders: list = []
        for i in range(b.pairs):
            t += 1.0 + rng.exponential(b.pair_spacing_s)
            dest = b.destinations[int(rng.integers(len(b.destinations)))]
            native = bool(rng.random() < b.native_share)
            kind = "native" if native else "token"
            rare = bool(rng.random() < b.rare_share)
            if rare:
                n_extra = int(rng.integers(0, 3))
                roles = ["asset_s", "receiver", "amount", "chain_d"] + ["nonce", "ref"][:n_extra]
                rng.shuffle(roles)
                tmpl = _fresh_call(self.names, roles, vocab.deposits[0].event, payable=True)
                s["rare_deposits"].append(tmpl)
            else:
                cands = [k for k, tp in enumerate(vocab.deposits) if kind in tp.kinds]
                w = np.array([vocab.weights[k] for k in cands])
                tmpl = vocab.deposits[cands[int(rng.choice(len(cands), p=w / w.sum()))]]
            sym = None if native else list(SHARED_TOKENS)[int(rng.integers(len(SHARED_TOKENS)))]
            dec_s = NATIVE_DECIMALS if native else self.decimals(sym, self.src)
            dec_d = NATIVE_DECIMALS if native else self.decimals(sym, dest)
            micro = int(10 ** rng.uniform(0, 4) * 1e6)
            raw_s = micro * 10 ** (dec_s - 6)
            sender = self.addr(f"{b.name}|user|{i}")
            same = bool(rng.random() < self.spec.noise.same_address_prob)
            reuse = rng.random() < 0.5
            if same:
                receiver = sender
            else:
                if reuse and prior_diff_senders:
                    receiver = prior_diff_senders[int(rng.integers(len(prior_diff_senders)))]
                else:
                    receiver = self.addr(f"{b.name}|recv|{i}")
                prior_diff_senders.append(sender)
            shapes = NATIVE_SHAPES if native else TOKEN_SHAPES
            sw = np.array([b.shapes.get(x, 0.0) for x in shapes])
            shape = shapes[int(rng.choice(len(shapes), p=sw / sw.sum()))]
            excess = int(rng.integers(1, 10**6)) * 10**9
            fee_ppm = b.fee.sample(rng)
            latency = b.latency.sample(rng)
            asset_s = NATIVE if native else self.tokens[self.src][sym]
            asset_d = NATIVE if native else self.tokens[dest][sym]
            role_vals = {"asset_s": asset_s, "asset_d": asset_d, "receiver": receiver, "sender": sender,
                         "amount": raw_s, "chain_d": s["chains"][dest].numeric_id,
                         "chain_s": s["chains"][self.src].numeric_id, "nonce": i,
                         "ref": hashlib.sha256(f"{b.name}|ref|{i}".encode()).digest(), "small": int(rng.integers(1, 5000))}
            values = [role_vals[r] for r in tmpl.roles]
            data = encode_input(DecodedCall.of(tmpl.fn, values), ContractAbi([tmpl.fn]))
            ev = tmpl.event
            deposit_log = (R, ev.event, [role_vals[r] for r in ev.roles])
            frames, logs, value = [], [], 0
            if shape == "direct":
                value = raw_s
            elif shape == "refund":
                value = raw_s + excess
                frames = [(1, R, sender, excess, b"")]
            elif shape == "wrap":
                value = raw_s + excess
                frames = [(1, R, weth, raw_s, WRAPPED_ABI.function("deposit").selector),
                          (2, weth, R, 0, b""), (1, R, sender, excess, b"")]
            else:
                token = asset_s
                pull = ERC20_ABI.function("transferFrom")
                if shape == "pull":
                    frames = [(1, R, token, 0, encode_input(DecodedCall.of(pull, [sender, R, raw_s]), ERC20_ABI))]
                    logs = [(token, TRANSFER, [sender, R, raw_s])]
                elif shape == "vault":
                    frames = [(1, R, token, 0, encode_input(DecodedCall.of(pull, [sender, V, raw_s]), ERC20_ABI))]
                    logs = [(token, TRANSFER, [sender, V, raw_s])]
                else:
                    lock = VAULT_ABI.function("lockFunds")
                    frames = [(1, R, token, 0, encode_input(DecodedCall.of(pull, [sender, V, raw_s]), ERC20_ABI)),
                              (1, R, V, 0, encode_input(DecodedCall.of(lock, [token, raw_s]), VAULT_ABI)),
                              (2, V, R, 0, b"")]
                    logs = [(token, TRANSFER, [sender, V, raw_s])]
            logs = logs + [deposit_log]
            p = src.add(int(t), sender, R, value, data, frames, logs)
            self.label(p, self.src, b.name, DEPOSIT, "rare" if rare else shape)
            meta = CrossChainMetadata(p.hash, s["chains"][self.src], sender, asset_s, TokenAmount(raw_s, dec_s), p.ts,
                                      s["chains"][dest], receiver, asset_d)
            out.append({"p": p, "meta": meta, "dest": dest, "native": native, "fee_ppm": fee_ppm, "latency": latency,
                        "dec_d": dec_d, "raw_s": raw_s, "dec_s": dec_s, "same": same})
        return out

    def withdrawals(self, b: BridgeSpec, s: dict, deps: list) -> None:
        rng = self.rng
        n = len(deps)
        noise = self.spec.noise
        n_del = int(round(noise.deletion_rate * n))
        n_dec = min(int(round(noise.decoy_rate * n)), n - n_del)
        order = rng.permutation(n)
        deleted = set(order[:n_del].tolist())
        decoyed = set(order[n_del:n_del + n_dec].tolist())
        vocab: BridgeVocab = s["vocab"]
        for k, d in enumerate(deps):
            m: CrossChainMetadata = d["meta"]
            chain = self.chains[d["dest"]]
            ts_s = m.timestamp_s
            raw_d = d["raw_s"] * (10**6 - d["fee_ppm"]) * 10 ** d["dec_d"] // (10**6 * 10 ** d["dec_s"])
            txw = None
            if k not in deleted:
                Rd = s["dest_router"][d["dest"]]
                role_vals = {"asset_d": m.asset_d, "receiver": m.receiver, "amount": raw_d,
                             "ref": bytes.fromhex(m.txhash_s[2:]), "chain_s": m.chain_s.numeric_id, "nonce": k}
                data = encode_input(DecodedCall.of(vocab.withdraw.fn, [role_vals[r] for r in vocab.withdraw.roles]),
                                    ContractAbi([vocab.withdraw.fn]))
                t_w = ts_s + d["latency"]
                if d["native"] and b.native_payout == "direct":
                    p = chain.add(t_w, s["relayer"], m.receiver, raw_d, b"")
                elif d["native"]:
                    p = chain.add(t_w, s["relayer"], Rd, 0, data, [(1, Rd, m.receiver, raw_d, b"")])
                else:
                    xfer = encode_input(DecodedCall.of(ERC20_ABI.function("transfer"), [m.receiver, raw_d]), ERC20_ABI)
                    p = chain.add(t_w, s["relayer"], Rd, 0, data, [(1, Rd, m.asset_d, 0, xfer)],
                                  [(m.asset_d, TRANSFER, [Rd, m.receiver, raw_d])])
                self.label(p, d["dest"], b.name, "withdrawal", "withdrawal")
                txw = p
                m_full = m.with_withdrawal(p.hash, TokenAmount(raw_d, d["dec_d"]), p.ts)
            else:
                m_full = m
            if k in decoyed:
                t_dec = ts_s + int(rng.integers(0, b.delta_minutes * 60))
                raw_x = max(1, int(raw_d * rng.uniform(0.5, 1.5)))
                self.credit(chain, d["dest"], m.receiver, m.asset_d, raw_x, t_dec, f"{b.name}|decoy|{k}", b.name, "decoy")
            for j in range(int(rng.poisson(noise.background_per_user))):
                tok = self.noise_tokens[d["dest"]][int(rng.integers(len(NOISE_TOKENS)))]
                t_bg = ts_s + 1 + int(rng.integers(0, noise.background_horizon_s))
                self.credit(chain, d["dest"], m.receiver, tok, int(rng.integers(1, 10**9)) * 10**9, t_bg,
                            f"{b.name}|bg|{k}|{j}", "", "background")
            self.truth.pairs.append(TruthPair(b.name, m.txhash_s, txw.hash if txw else None, m_full,
                                              k in deleted, k in decoyed, d["same"]))

    def credit(self, chain: _ChainBuilder, cname: str, to: Address, asset: Address, raw: int, t: int,
               label: str, bridge: str, category: str) -> None:
        sender = self.addr(label)
        if asset == NATIVE:
            p = chain.add(t, sender, to, raw, b"")
        else:
            data = encode_input(DecodedCall.of(ERC20_ABI.function("transfer"), [to, raw]), ERC20_ABI)
            p = chain.add(t, sender, asset, 0, data, logs=[(asset, TRANSFER, [sender, to, raw])])
        self.label(p, cname, bridge, category, category)

    def non_deposits(self, b: BridgeSpec, s: dict, t_lo: int, t_hi: int) -> None:
        rng = self.rng
        vocab: BridgeVocab = s["vocab"]
        src = self.chains[self.src]
        R, V = s["router"], s["vault"]
        kinds = [k for k in NON_DEPOSIT_KINDS if b.non_deposit_mix.get(k, 0) > 0]
        w = np.array([b.non_deposit_mix[k] for k in kinds])
        syms = list(SHARED_TOKENS)
        toks = self.tokens[self.src]
        for i in range(b.non_deposits):
            kind = kinds[int(rng.choice(len(kinds), p=w / w.sum()))]
            t = int(rng.integers(t_lo, t_hi + 1))
            user = self.addr(f"{b.name}|nduser|{i}")
            other = self.addr(f"{b.name}|ndpeer|{i}")
            t1, t2 = (toks[syms[int(j)]] for j in rng.choice(len(syms), 2, replace=False))
            amt = int(rng.integers(1, 10**6)) * 10**12
            category = kind
            if kind == "transfer":
                data = encode_input(DecodedCall.of(ERC20_ABI.function("transfer"), [other, amt]), ERC20_ABI)
                p = src.add(t, user, t1, 0, data, logs=[(t1, TRANSFER, [user, other, amt])])
            elif kind == "approve":
                data = encode_input(DecodedCall.of(ERC20_ABI.function("approve"), [R, amt]), ERC20_ABI)
                p = src.add(t, user, t1, 0, data, logs=[(t1, APPROVAL, [user, R, amt])])
            elif kind == "native_send":
                p = src.add(t, user, other, amt, b"")
            elif kind == "swap":
                P = self.dex[self.src]
                fn = DEX_ABI.function("swapExactTokensForTokens")
                data = encode_input(DecodedCall.of(fn, [amt, 0, [t1, t2], user, t + 600]), DEX_ABI)
                pull = encode_input(DecodedCall.of(ERC20_ABI.function("transferFrom"), [user, P, amt]), ERC20_ABI)
                push = encode_input(DecodedCall.of(ERC20_ABI.function("transfer"), [user, amt // 2]), ERC20_ABI)
                p = src.add(t, user, P, 0, data, [(1, P, t1, 0, pull), (1, P, t2, 0, push)],
                            [(t1, TRANSFER, [user, P, amt]), (t2, TRANSFER, [P, user, amt // 2])])
            elif kind == "lp_add":
                P = self.dex[self.src]
                fn = DEX_ABI.function("addLiquidity")
                data = encode_input(DecodedCall.of(fn, [t1, t2, amt, amt, 0, 0, user, t + 600]), DEX_ABI)
                pull = encode_input(DecodedCall.of(ERC20_ABI.function("transferFrom"), [user, P, amt]), ERC20_ABI)
                p = src.add(t, user, P, 0, data, [(1, P, t1, 0, pull)], [(t1, TRANSFER, [user, P, amt])])
            elif kind == "admin":
                admin = s["admins"][int(rng.integers(len(s["admins"])))]
                if rng.random() < b.rare_admin_share:
                    roles = ["token", "account", "big", "small", "ref", "flag"][:int(rng.integers(4, 7))]
                    rng.shuffle(roles)
                    tmpl = _fresh_call(self.names, roles)
                    s["rare_admin"].append(tmpl)
                    category = "rare_admin"
                else:
                    tmpl = vocab.admin[int(rng.integers(len(vocab.admin)))]
                data = self._call_data(tmpl, {"token": t1, "account": other, "big": amt, "small": 30, "flag": True,
                                              "ref": hashlib.sha256(f"{b.name}|adm|{i}".encode()).digest(),
                                              "nonce": i})
                release = encode_input(DecodedCall.of(VAULT_ABI.function("release"), [t1, admin, 0]), VAULT_ABI)
                p = src.add(t, admin, R, 0, data, [(1, R, V, 0, release), (1, R, t1, 0, b"")])
            else:  # claim: router -> vault -> user refund cycle
                tmpl = vocab.claim
                if rng.random() < b.rare_admin_share:
                    roles = ["ref", "receiver", "token", "big", "nonce", "small"][:int(rng.integers(4, 7))]
                    rng.shuffle(roles)
                    tmpl = _fresh_call(self.names, roles)
                    s["rare_admin"].append(tmpl)
                    category = "rare_claim"
                data = self._call_data(tmpl, {"ref": hashlib.sha256(f"{b.name}|claim|{i}".encode()).digest(),
                                              "receiver": user, "token": t1, "big": amt, "nonce": i, "small": 1})
                release = encode_input(DecodedCall.of(VAULT_ABI.function("release"), [t1, user, amt]), VAULT_ABI)
                p = src.add(t, user, R, 0, data, [(1, R, V, 0, release)], [(t1, TRANSFER, [V, user, amt])])
            self.label(p, self.src, b.name, NON_DEPOSIT, category)

    @staticmethod
    def _call_data(tmpl: CallTemplate, vals: dict) -> bytes:
        return encode_input(DecodedCall.of(tmpl.fn, [vals[r] for r in tmpl.roles]), ContractAbi([tmpl.fn]))

    def run(self, root: Optional[Path]) -> World:
        spec = self.spec
        configs = {}
        last_deposit = spec.start_time
        for bi, b in enumerate(spec.bridges):
            s = self.bridge_setup(b, bi)
            deps = self.deposits(b, s)
            t_hi = max([d["meta"].timestamp_s for d in deps], default=spec.start_time + 3600)
            last_deposit = max(last_deposit, t_hi)
            self.non_deposits(b, s, spec.start_time + 60, t_hi)
            self.withdrawals(b, s, deps)
            configs[b.name] = self.bridge_config(b, s)
        until = last_deposit + spec.header_margin_minutes * 60
        store = FixtureStore(root / "store" if root is not None else None)
        used = {self.src} | {d for b in spec.bridges for d in b.destinations}
        for name in sorted(used):
            store.append(name, self.chains[name].records(until))
        abis = {c: self.abis[c] for c in sorted(used)}
        world = World(spec, store, configs, abis, self.truth, root)
        if root is not None:
            world.save(root)
        return world


def generate(spec: ScenarioSpec, root: Union[str, Path, None] = None) -> World:
    """Build the world for ``spec``; with ``root`` the store and configs are written there."""
    spec.validate()
    if root is not None:
        root = Path(root)
        if (root / "store").exists() and any((root / "store").iterdir()):
            raise SpecError(f"{root / 'store'} is not empty; generate into a fresh directory")
    return _Generator(spec).run(root)
