"""Standard contract ABI encoding of typed values (head/tail layout).

Values use plain Python types: ``int`` for (u)intN, :class:`Address`,
``bool``, ``bytes`` for bytesN/bytes, ``str``, ``list`` for arrays and
``tuple`` for tuples. Decoding is strict: anything that would not be
produced by :func:`encode` is rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Optional, Sequence

from ..chain.types import Address, RecordError


class AbiError(ValueError):
    pass


class UnsupportedType(AbiError):
    pass


class EncodeError(AbiError):
    pass


class DecodeError(AbiError):
    pass


@dataclass(frozen=True)
class AbiType:
    kind: str  # uint int address bool fixedbytes bytes string array tuple
    size: Optional[int] = None  # bits for (u)int, width for bytesN, length for fixed arrays
    item: Optional["AbiType"] = None
    components: tuple = ()

    @property
    def dynamic(self) -> bool:
        if self.kind in ("bytes", "string"):
            return True
        if self.kind == "array":
            return self.size is None or self.item.dynamic
        if self.kind == "tuple":
            return any(c.dynamic for c in self.components)
        return False

    @property
    def head_size(self) -> int:
        if self.dynamic:
            return 32
        if self.kind == "array":
            return self.size * self.item.head_size
        if self.kind == "tuple":
            return sum(c.head_size for c in self.components)
        return 32

    def canonical(self) -> str:
        if self.kind in ("uint", "int"):
            return f"{self.kind}{self.size}"
        if self.kind == "fixedbytes":
            return f"bytes{self.size}"
        if self.kind == "array":
            return f"{self.item.canonical()}[{'' if self.size is None else self.size}]"
        if self.kind == "tuple":
            return "(" + ",".join(c.canonical() for c in self.components) + ")"
        return self.kind

    def tuple_depth(self) -> int:
        if self.kind == "tuple":
            return 1 + max((c.tuple_depth() for c in self.components), default=0)
        if self.kind == "array":
            return self.item.tuple_depth()
        return 0

    def __str__(self) -> str:
        return self.canonical()


_ELEMENTARY = re.compile(r"^(uint|int|bytes)(\d*)$")
MAX_TUPLE_DEPTH = 1


def _split_top(s: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(s):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(s[start:i])
            start = i + 1
    parts.append(s[start:])
    return parts


def _parse(s: str) -> AbiType:
    s = s.strip()
    if s.endswith("]"):
        lb = s.rindex("[")
        inner, dim = s[:lb], s[lb + 1:-1]
        if dim and not dim.isdigit():
            raise UnsupportedType(f"bad array dimension in {s!r}")
        if dim and int(dim) == 0:
            raise UnsupportedType(f"zero-length fixed array {s!r}")
        return AbiType("array", int(dim) if dim else None, item=_parse(inner))
    if s.startswith("("):
        if not s.endswith(")"):
            raise UnsupportedType(f"bad tuple {s!r}")
        body = s[1:-1]
        comps = tuple(_parse(p) for p in _split_top(body)) if body else ()
        return AbiType("tuple", components=comps)
    if s in ("address", "bool", "string"):
        return AbiType(s)
    m = _ELEMENTARY.match(s)
    if not m:
        raise UnsupportedType(f"unsupported ABI type {s!r}")
    base, bits = m.group(1), m.group(2)
    if base == "bytes":
        if not bits:
            return AbiType("bytes")
        if not 1 <= int(bits) <= 32:
            raise UnsupportedType(f"bad fixed bytes width {s!r}")
        return AbiType("fixedbytes", int(bits))
    n = int(bits) if bits else 256
    if n % 8 or not 8 <= n <= 256:
        raise UnsupportedType(f"bad integer width {s!r}")
    return AbiType(base, n)


def parse_type(s: str) -> AbiType:
    t = _parse(s)
    if t.tuple_depth() > MAX_TUPLE_DEPTH:
        raise UnsupportedType(f"tuple nesting deeper than {MAX_TUPLE_DEPTH}: {s!r}")
    return t


def type_from_json(param: dict) -> AbiType:
    """Build a type from one JSON ABI ``inputs`` entry (handles ``components``)."""
    ty = param["type"]
    if ty.startswith("tuple"):
        inner = ",".join(type_from_json(c).canonical() for c in param.get("components", []))
        ty = "(" + inner + ")" + ty[len("tuple"):]
    return parse_type(ty)


# -- encoding ---------------------------------------------------------------

def _word(n: int) -> bytes:
    return n.to_bytes(32, "big")


def _pad_right(b: bytes) -> bytes:
    return b + b"\x00" * (-len(b) % 32)


def _encode_static(t: AbiType, v: Any, where: str) -> bytes:
    k = t.kind
    if k == "uint":
        if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < 1 << t.size:
            raise EncodeError(f"{where}: {v!r} is not a valid {t}")
        return _word(v)
    if k == "int":
        lim = 1 << (t.size - 1)
        if isinstance(v, bool) or not isinstance(v, int) or not -lim <= v < lim:
            raise EncodeError(f"{where}: {v!r} is not a valid {t}")
        return _word(v % (1 << 256))
    if k == "address":
        try:
            a = Address(v)
        except RecordError as e:
            raise EncodeError(f"{where}: {e}") from None
        return b"\x00" * 12 + a.raw
    if k == "bool":
        if not isinstance(v, bool):
            raise EncodeError(f"{where}: {v!r} is not a bool")
        return _word(int(v))
    if k == "fixedbytes":
        if not isinstance(v, (bytes, bytearray)) or len(v) != t.size:
            raise EncodeError(f"{where}: expected {t.size} bytes for {t}")
        return _pad_right(bytes(v))
    raise EncodeError(f"{where}: {t} is not static")


def encode_value(t: AbiType, v: Any, where: str = "value") -> bytes:
    """Encode one value as it appears in its own slot region (tail for dynamic types)."""
    k = t.kind
    if k == "bytes":
        if not isinstance(v, (bytes, bytearray)):
            raise EncodeError(f"{where}: expected bytes")
        return _word(len(v)) + _pad_right(bytes(v))
    if k == "string":
        if not isinstance(v, str):
            raise EncodeError(f"{where}: expected str")
        raw = v.encode("utf-8")
        return _word(len(raw)) + _pad_right(raw)
    if k == "array":
        if not isinstance(v, (list, tuple)):
            raise EncodeError(f"{where}: expected a list for {t}")
        if t.size is not None and len(v) != t.size:
            raise EncodeError(f"{where}: expected {t.size} items, got {len(v)}")
        body = encode_sequence([t.item] * len(v), v, where)
        return body if t.size is not None else _word(len(v)) + body
    if k == "tuple":
        if not isinstance(v, (list, tuple)) or len(v) != len(t.components):
            raise EncodeError(f"{where}: expected {len(t.components)} tuple fields")
        return encode_sequence(t.components, v, where)
    return _encode_static(t, v, where)


def encode_sequence(types: Sequence[AbiType], values: Sequence[Any], where: str = "value",
                    names: Optional[Sequence[str]] = None) -> bytes:
    if len(types) != len(values):
        raise EncodeError(f"{where}: expected {len(types)} values, got {len(values)}")
    heads, tails = [], []
    head_len = sum(t.head_size for t in types)
    offset = head_len
    for i, (t, v) in enumerate(zip(types, values)):
        label = names[i] if names and names[i] else f"{where}[{i}]"
        enc = encode_value(t, v, label)
        if t.dynamic:
            heads.append(_word(offset))
            tails.append(enc)
            offset += len(enc)
        else:
            heads.append(enc)
    return b"".join(heads) + b"".join(tails)


# -- decoding ---------------------------------------------------------------

def _read_word(data: bytes, pos: int) -> bytes:
    if pos < 0 or pos + 32 > len(data):
        raise DecodeError(f"payload too short: need word at byte {pos}, have {len(data)}")
    return data[pos:pos + 32]


def _read_uint(data: bytes, pos: int) -> int:
    return int.from_bytes(_read_word(data, pos), "big")


def _decode_static(t: AbiType, word: bytes) -> Any:
    k = t.kind
    n = int.from_bytes(word, "big")
    if k == "uint":
        if n >> t.size:
            raise DecodeError(f"value overflows {t}")
        return n
    if k == "int":
        if n >> 255:
            n -= 1 << 256
        lim = 1 << (t.size - 1)
        if not -lim <= n < lim:
            raise DecodeError(f"value overflows {t}")
        return n
    if k == "address":
        if any(word[:12]):
            raise DecodeError("dirty high bytes in address word")
        return Address(word[12:])
    if k == "bool":
        if n > 1:
            raise DecodeError("bool word is neither 0 nor 1")
        return bool(n)
    if k == "fixedbytes":
        if any(word[t.size:]):
            raise DecodeError(f"dirty padding in {t}")
        return bytes(word[:t.size])
    raise DecodeError(f"{t} is not static")


def _decode_at(t: AbiType, data: bytes, pos: int) -> Any:
    """Decode the value whose own region starts at ``pos``."""
    k = t.kind
    if k in ("bytes", "string"):
        length = _read_uint(data, pos)
        start = pos + 32
        if length > len(data) - start:
            raise DecodeError(f"{t} length {length} runs past end of payload")
        raw = data[start:start + length]
        pad = data[start + length:start + length + (-length % 32)]
        if len(pad) != -length % 32 or any(pad):
            raise DecodeError(f"bad padding after {t}")
        if k == "string":
            try:
                return raw.decode("utf-8")
            except UnicodeDecodeError:
                raise DecodeError("string is not valid utf-8") from None
        return bytes(raw)
    if k == "array":
        if t.size is None:
            n = _read_uint(data, pos)
            if n * 32 > len(data) - pos - 32:
                raise DecodeError(f"array length {n} runs past end of payload")
            return list(_decode_sequence([t.item] * n, data, pos + 32))
        return list(_decode_sequence([t.item] * t.size, data, pos))
    if k == "tuple":
        return tuple(_decode_sequence(t.components, data, pos))
    return _decode_static(t, _read_word(data, pos))


def _decode_sequence(types: Sequence[AbiType], data: bytes, base: int) -> list:
    out = []
    pos = base
    for t in types:
        if t.dynamic:
            off = _read_uint(data, pos)
            if off > len(data) - base:
                raise DecodeError(f"offset {off} points past end of payload")
            out.append(_decode_at(t, data, base + off))
            pos += 32
        else:
            out.append(_decode_at(t, data, pos))
            pos += t.head_size
    return out


def decode_sequence(types: Sequence[AbiType], data: bytes) -> list:
    """Decode a full payload; trailing or non-canonical bytes raise :class:`DecodeError`."""
    values = _decode_sequence(types, data, 0)
    if encode_sequence(types, values) != bytes(data):
        raise DecodeError("payload is not the canonical encoding of its values (trailing or overlapping data)")
    return values


def decode_value(t: AbiType, word_region: bytes) -> Any:
    return decode_sequence([t], word_region)[0]
