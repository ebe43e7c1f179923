"""Ledger record types shared by every stage of the pipeline.

All records are immutable. Hex-valued fields are rendered lowercase with a
``0x`` prefix; amounts are plain integers (raw units) so that 256-bit token
values never pass through floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

UINT256_MAX = (1 << 256) - 1
NATIVE_DECIMALS = 18


class RecordError(ValueError):
    """A record violates its type invariants."""


class Address(str):
    """20-byte account address, normalized to lowercase ``0x`` hex."""

    __slots__ = ()

    def __new__(cls, value: Union[str, bytes, "Address"]) -> "Address":
        if isinstance(value, Address):
            return value
        if isinstance(value, (bytes, bytearray)):
            if len(value) != 20:
                raise RecordError(f"address must be 20 bytes, got {len(value)}")
            return str.__new__(cls, "0x" + bytes(value).hex())
        if not isinstance(value, str):
            raise RecordError(f"cannot build an address from {type(value).__name__}")
        s = value.lower()
        if not s.startswith("0x"):
            s = "0x" + s
        if len(s) != 42:
            raise RecordError(f"address must be 20 bytes: {value!r}")
        try:
            bytes.fromhex(s[2:])
        except ValueError:
            raise RecordError(f"address is not hex: {value!r}") from None
        return str.__new__(cls, s)

    @property
    def raw(self) -> bytes:
        return bytes.fromhex(self[2:])

    def short(self) -> str:
        return self[:6]


ZERO_ADDRESS = Address("0x" + "00" * 20)
# Native coin of a chain is modelled as the zero address in asset fields.
NATIVE = ZERO_ADDRESS


def hash32(value: Union[str, bytes]) -> str:
    """Normalize a 32-byte identifier (tx hash, topic) to lowercase hex."""
    if isinstance(value, (bytes, bytearray)):
        if len(value) != 32:
            raise RecordError(f"hash must be 32 bytes, got {len(value)}")
        return "0x" + bytes(value).hex()
    s = value.lower()
    if not s.startswith("0x") or len(s) != 66:
        raise RecordError(f"hash must be 32 bytes of 0x hex: {value!r}")
    bytes.fromhex(s[2:])
    return s


def hex_bytes(value: Union[str, bytes]) -> bytes:
    if isinstance(value, (bytes, bytearray)):
        return bytes(value)
    s = value[2:] if value.startswith(("0x", "0X")) else value
    return bytes.fromhex(s)


def to_hex(data: bytes) -> str:
    return "0x" + data.hex()


@dataclass(frozen=True)
class ChainId:
    """A chain as known to one bridge: short name plus the bridge's numeric code."""

    name: str
    numeric_id: int
    label: str = ""

    def __post_init__(self):
        if not self.name:
            raise RecordError("chain name must be non-empty")
        if self.numeric_id < 0:
            raise RecordError("numeric chain id must be unsigned")

    @property
    def display(self) -> str:
        return self.label or self.name


@dataclass(frozen=True)
class TokenAmount:
    raw: int
    decimals: int

    def __post_init__(self):
        if not 0 <= self.raw <= UINT256_MAX:
            raise RecordError(f"amount out of uint256 range: {self.raw}")
        if not 0 <= self.decimals <= 77:
            raise RecordError(f"decimals out of range: {self.decimals}")

    @property
    def value(self) -> Fraction:
        return Fraction(self.raw, 10 ** self.decimals)

    def __str__(self) -> str:
        if self.decimals == 0:
            return str(self.raw)
        whole, frac = divmod(self.raw, 10 ** self.decimals)
        frac_s = f"{frac:0{self.decimals}d}".rstrip("0")
        return f"{whole}.{frac_s}" if frac_s else str(whole)

    @classmethod
    def parse(cls, text: str, decimals: int) -> "TokenAmount":
        """Parse an exact decimal string such as ``"112.8559"``."""
        whole, _, frac = text.partition(".")
        if len(frac) > decimals:
            raise RecordError(f"{text!r} has more than {decimals} decimals")
        return cls(int(whole or "0") * 10 ** decimals + int(frac.ljust(decimals, "0") or "0"), decimals)


@dataclass(frozen=True)
class Transaction:
    hash: str
    block_number: int
    index: int
    timestamp: int
    from_addr: Address
    to_addr: Optional[Address]
    value: int
    input: bytes
    status: bool = True

    kind = "tx"

    @property
    def key(self) -> str:
        return self.hash

    @property
    def native_value(self) -> TokenAmount:
        return TokenAmount(self.value, NATIVE_DECIMALS)

    def to_json(self) -> dict:
        return {
            "hash": self.hash,
            "block_number": self.block_number,
            "index": self.index,
            "timestamp": self.timestamp,
            "from": str(self.from_addr),
            "to": str(self.to_addr) if self.to_addr is not None else None,
            "value": str(self.value),
            "input": to_hex(self.input),
            "status": "success" if self.status else "failure",
        }

    @classmethod
    def from_json(cls, d: dict) -> "Transaction":
        if d["status"] not in ("success", "failure"):
            raise RecordError(f"bad status {d['status']!r}")
        return cls(
            hash=hash32(d["hash"]),
            block_number=int(d["block_number"]),
            index=int(d["index"]),
            timestamp=int(d["timestamp"]),
            from_addr=Address(d["from"]),
            to_addr=Address(d["to"]) if d.get("to") else None,
            value=int(d["value"]),
            input=hex_bytes(d["input"]),
            status=d["status"] == "success",
        )

    def validate(self) -> None:
        hash32(self.hash)
        if self.block_number < 0 or self.index < 0 or self.timestamp < 0:
            raise RecordError("negative block number, index or timestamp")
        if not 0 <= self.value <= UINT256_MAX:
            raise RecordError("value out of uint256 range")
        if not isinstance(self.from_addr, Address):
            raise RecordError("from must be an Address")
        if self.to_addr is not None and not isinstance(self.to_addr, Address):
            raise RecordError("to must be an Address or None")


CALL_KINDS = ("external", "call", "delegate", "static")


@dataclass(frozen=True)
class TraceCall:
    """One frame of a call tree; ``index`` is the preorder position."""

    tx_hash: str
    index: int
    depth: int
    call_kind: str
    caller: Address
    callee: Address
    value: int
    input: bytes = b""

    kind = "trace"

    @property
    def key(self) -> tuple:
        return (self.tx_hash, self.index)

    def to_json(self) -> dict:
        return {
            "tx_hash": self.tx_hash,
            "index": self.index,
            "depth": self.depth,
            "call_kind": self.call_kind,
            "caller": str(self.caller),
            "callee": str(self.callee),
            "value": str(self.value),
            "input": to_hex(self.input),
        }

    @classmethod
    def from_json(cls, d: dict) -> "TraceCall":
        return cls(
            tx_hash=hash32(d["tx_hash"]),
            index=int(d["index"]),
            depth=int(d["depth"]),
            call_kind=d["call_kind"],
            caller=Address(d["caller"]),
            callee=Address(d["callee"]),
            value=int(d["value"]),
            input=hex_bytes(d["input"]),
        )

    def validate(self) -> None:
        hash32(self.tx_hash)
        if self.call_kind not in CALL_KINDS:
            raise RecordError(f"unknown call kind {self.call_kind!r}")
        if (self.depth == 0) != (self.call_kind == "external"):
            raise RecordError("exactly the depth-0 frame must be the external call")
        if (self.index == 0) != (self.depth == 0):
            raise RecordError("the external frame must have index 0")
        if self.depth < 0 or not 0 <= self.value <= UINT256_MAX:
            raise RecordError("bad depth or value")


@dataclass(frozen=True)
class LogEntry:
    tx_hash: str
    log_index: int
    emitter: Address
    topics: tuple
    data: bytes

    kind = "log"

    @property
    def key(self) -> tuple:
        return (self.tx_hash, self.log_index)

    def to_json(self) -> dict:
        return {
            "tx_hash": self.tx_hash,
            "log_index": self.log_index,
            "emitter": str(self.emitter),
            "topics": [to_hex(t) for t in self.topics],
            "data": to_hex(self.data),
        }

    @classmethod
    def from_json(cls, d: dict) -> "LogEntry":
        return cls(
            tx_hash=hash32(d["tx_hash"]),
            log_index=int(d["log_index"]),
            emitter=Address(d["emitter"]),
            topics=tuple(hex_bytes(t) for t in d["topics"]),
            data=hex_bytes(d["data"]),
        )

    def validate(self) -> None:
        hash32(self.tx_hash)
        if not 1 <= len(self.topics) <= 4:
            raise RecordError(f"log {self.log_index}: expected 1-4 topics, got {len(self.topics)}")
        for t in self.topics:
            if len(t) != 32:
                raise RecordError(f"log {self.log_index}: topic word of {len(t)} bytes")


@dataclass(frozen=True)
class BlockHeader:
    number: int
    timestamp: int

    kind = "header"

    @property
    def key(self) -> int:
        return self.number

    def to_json(self) -> dict:
        return {"number": self.number, "timestamp": self.timestamp}

    @classmethod
    def from_json(cls, d: dict) -> "BlockHeader":
        return cls(number=int(d["number"]), timestamp=int(d["timestamp"]))

    def validate(self) -> None:
        if self.number < 0 or self.timestamp < 0:
            raise RecordError("negative block number or timestamp")


ChainRecord = Union[Transaction, TraceCall, LogEntry, BlockHeader]

RECORD_TYPES = {cls.kind: cls for cls in (Transaction, TraceCall, LogEntry, BlockHeader)}
