"""Calldata normalization: keep the function name, rename parameters.

A parameter whose canonical name (lowercase, underscores removed) is a
known synonym of a cross-chain metadata element becomes that element's
name; anything else becomes ``var_0``, ``var_1``, ... in order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Union

from ..abi.contract import UNKNOWN_FUNCTION, DecodedCall

DEFAULT_SYNONYMS: dict[str, tuple] = {
    "sender": ("from", "fromaddress", "sender", "depositor", "account"),
    "receiver": ("to", "toaddress", "receiver", "dstaddress", "recipient", "mintaccount"),
    "asset_s": ("token", "fromasset", "fromassethash", "asset"),
    "amount_s": ("amount", "value", "amt"),
    "chain_d": ("tochainid", "dstchainid", "tochain", "mintchainid", "dstchain"),
}


def canonical_name(name: str) -> str:
    return name.lower().replace("_", "")


class SynonymTable:
    def __init__(self, table: Mapping[str, tuple] = DEFAULT_SYNONYMS):
        self.elements = tuple(table)
        self._lookup: dict[str, str] = {}
        for element, names in table.items():
            for n in names:
                c = canonical_name(n)
                if self._lookup.setdefault(c, element) != element:
                    raise ValueError(f"synonym {n!r} maps to both {self._lookup[c]} and {element}")

    def element(self, param_name: str) -> str | None:
        if param_name in self.elements:
            return param_name
        return self._lookup.get(canonical_name(param_name))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SynonymTable":
        return cls({k: tuple(v) for k, v in json.loads(Path(path).read_text()).items()})

    def to_json(self) -> dict:
        table: dict[str, list] = {e: [] for e in self.elements}
        for name, e in self._lookup.items():
            table[e].append(name)
        return table


DEFAULT_TABLE = SynonymTable()


@dataclass(frozen=True)
class NormalizedCall:
    tokens: tuple

    @property
    def function(self) -> str:
        return self.tokens[0]

    @property
    def params(self) -> tuple:
        return self.tokens[1:]


def normalize(call: DecodedCall, synonyms: SynonymTable = DEFAULT_TABLE) -> NormalizedCall:
    if not call.known:
        return NormalizedCall((UNKNOWN_FUNCTION,))
    tokens = [call.name.lower()]
    k = 0
    for name, _ in call.params:
        element = synonyms.element(name)
        if element is None:
            element = f"var_{k}"
            k += 1
        tokens.append(element)
    return NormalizedCall(tuple(tokens))
