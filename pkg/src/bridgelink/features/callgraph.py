"""Token-aware call graph of one transaction and its motif census."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ..abi.contract import DecodedEvent
from ..chain.types import NATIVE, Address, TraceCall, Transaction

N_MOTIFS = 16

# Column order of the three-node classes (M3..M15), as triad-census codes.
TRIAD_ORDER = ("021D", "021U", "021C", "111D", "111U", "030T", "030C",
               "201", "120D", "120U", "120C", "210", "300")


@dataclass(frozen=True)
class Edge:
    src: Address
    dst: Address
    kind: str  # a trace call kind or "transfer"
    token: Address = NATIVE
    amount: int = 0


@dataclass
class TokenAwareCallGraph:
    edges: list = field(default_factory=list)

    @property
    def nodes(self) -> list:
        seen = dict.fromkeys(a for e in self.edges for a in (e.src, e.dst))
        return list(seen)

    def simple_edges(self) -> set:
        """Distinct directed (src, dst) pairs without self-loops."""
        return {(e.src, e.dst) for e in self.edges if e.src != e.dst}

    def adjacency(self) -> tuple:
        nodes = self.nodes
        pos = {a: i for i, a in enumerate(nodes)}
        adj = np.zeros((len(nodes), len(nodes)), dtype=np.int64)
        for s, d in self.simple_edges():
            adj[pos[s], pos[d]] = 1
        return nodes, adj


def build_call_graph(tx: Transaction, traces: Sequence[TraceCall], events: Iterable[DecodedEvent],
                     relevant: Optional[set] = None) -> TokenAwareCallGraph:
    """Edges: the external call, value-carrying or relevant internal calls, and ERC-20 transfers.

    ``relevant`` holds bridge/token contract addresses whose zero-value calls
    still count. Without traces only the external call and transfers remain.
    """
    relevant = relevant or set()
    g = TokenAwareCallGraph()
    ext = [t for t in traces if t.depth == 0]
    if ext:
        t = ext[0]
        g.edges.append(Edge(t.caller, t.callee, "external", NATIVE, t.value))
    elif tx.to_addr is not None:
        g.edges.append(Edge(tx.from_addr, tx.to_addr, "external", NATIVE, tx.value))
    for t in traces:
        if t.depth == 0:
            continue
        if t.value > 0 or t.callee in relevant:
            g.edges.append(Edge(t.caller, t.callee, t.call_kind, NATIVE, t.value))
    for ev in events:
        if ev.known and ev.name == "Transfer" and len(ev.params) == 3:
            (_, frm), (_, to), (_, amount) = ev.params
            if isinstance(frm, Address) and isinstance(to, Address) and isinstance(amount, int):
                g.edges.append(Edge(frm, to, "transfer", ev.emitter, amount))
    return g


def _census_from_adjacency(adj: np.ndarray) -> np.ndarray:
    a = (adj != 0).astype(np.int64)
    np.fill_diagonal(a, 0)
    n = a.shape[0]
    out = np.zeros(N_MOTIFS, dtype=np.int64)
    if n < 2:
        return out
    m = a * a.T                      # reciprocal pairs
    s = a - m                        # single-direction arcs
    u = np.maximum(a, a.T)
    nul = 1 - u - np.eye(n, dtype=np.int64)  # unconnected distinct pairs
    out[0] = s.sum()
    out[1] = m.sum() // 2
    ss = s @ s
    sts = s.T @ s
    sst = s @ s.T
    mm = m @ m
    triads = {
        "021D": (sts * nul).sum() // 2,
        "021U": (sst * nul).sum() // 2,
        "021C": (ss * nul).sum(),
        "111D": ((m @ s.T) * nul).sum(),
        "111U": ((m @ s) * nul).sum(),
        "030T": (ss * s).sum(),
        "030C": np.trace(ss @ s) // 3,
        "201": (mm * nul).sum() // 2,
        "120D": (sts * m).sum() // 2,
        "120U": (sst * m).sum() // 2,
        "120C": (ss * m).sum(),
        "210": (s * mm).sum(),
        "300": np.trace(mm @ m) // 6,
    }
    for i, code in enumerate(TRIAD_ORDER):
        out[2 + i] = triads[code]
    # bi-fan: pairs of sources sharing at least two common targets
    common = a @ a.T
    iu = np.triu_indices(n, k=1)
    c = common[iu]
    out[15] = (c * (c - 1) // 2).sum()
    return out


def motif_census(g) -> np.ndarray:
    """16 motif counts of a graph (a TokenAwareCallGraph or a square 0/1 matrix)."""
    if isinstance(g, TokenAwareCallGraph):
        _, adj = g.adjacency()
    else:
        adj = np.asarray(g)
    return _census_from_adjacency(adj)
