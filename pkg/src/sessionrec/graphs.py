"""Session graphs.

Two views of click data feed the encoders: a directed multigraph over one
session's transitions (normalized in/out adjacency matrices), and an undirected
graph over a session plus its retrieved neighbors (adjacency lists with self
loops). Node slots are assigned in first-occurrence order, scanning the session
itself before any neighbor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .corpus import Session
from .errors import GraphError


@dataclass
class IntraGraph:
    """One session as a directed graph over its distinct items.

    a_out[i][j] is the multiplicity of the i -> j transition divided by the
    total out-multiplicity of node i; a_in is defined the same way over
    incoming edges. alias maps each click position to its node slot.
    """

    node_items: list[int]
    alias: list[int]
    last_slot: int
    a_out: np.ndarray
    a_in: np.ndarray


@dataclass
class InterGraph:
    """A session and its neighbor sessions as one undirected item graph.

    adjacency[i] lists the slots adjacent to slot i (sorted, always including
    i itself); session_slots maps the session's click positions to slots.
    """

    node_items: list[int]
    adjacency: list[list[int]]
    session_slots: list[int]
    last_slot: int

    def mask(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix (self loops included)."""
        n = len(self.node_items)
        m = np.zeros((n, n))
        for i, nbrs in enumerate(self.adjacency):
            m[i, nbrs] = 1.0
        return m


def build_intra_graph(prefix: Sequence[int]) -> IntraGraph:
    """Build the directed transition graph of a single click sequence.

    Consecutive clicks (a, b) contribute one unit of multiplicity to edge
    a -> b (including self edges from repeated clicks). Each row of a_out / a_in
    sums to 1 when the node has any outgoing / incoming edge, else 0.
    """
    if not prefix:
        raise GraphError("cannot build a graph from an empty session")
    slot: dict[int, int] = {}
    alias: list[int] = []
    for item in prefix:
        if item not in slot:
            slot[item] = len(slot)
        alias.append(slot[item])
    n = len(slot)
    mult = np.zeros((n, n))
    for a, b in zip(alias, alias[1:]):
        mult[a, b] += 1.0
    out_deg = mult.sum(axis=1, keepdims=True)
    in_deg = mult.sum(axis=0, keepdims=True)
    a_out = np.divide(mult, out_deg, out=np.zeros_like(mult), where=out_deg > 0)
    a_in = np.divide(mult, in_deg, out=np.zeros_like(mult), where=in_deg > 0).T
    return IntraGraph(
        node_items=list(slot),
        alias=alias,
        last_slot=alias[-1],
        a_out=a_out,
        a_in=a_in,
    )


def _as_items(session: Union[Session, Sequence[int]]) -> Sequence[int]:
    return session.items if isinstance(session, Session) else session


def build_inter_graph(
    prefix: Sequence[int],
    neighbor_sessions: Sequence[Union[Session, Sequence[int]]] = (),
) -> InterGraph:
    """Build the undirected graph over a prefix and its neighbor sessions.

    Every consecutive click pair in the prefix or in any neighbor session adds
    one undirected edge (deduplicated), and every node carries a self loop.
    """
    if not prefix:
        raise GraphError("cannot build a graph from an empty session")
    sequences = [list(prefix)] + [list(_as_items(s)) for s in neighbor_sessions]
    slot: dict[int, int] = {}
    for seq in sequences:
        if not seq:
            raise GraphError("neighbor sessions must be non-empty")
        for item in seq:
            if item not in slot:
                slot[item] = len(slot)
    n = len(slot)
    adjacency: list[set[int]] = [{i} for i in range(n)]
    for seq in sequences:
        for a, b in zip(seq, seq[1:]):
            sa, sb = slot[a], slot[b]
            adjacency[sa].add(sb)
            adjacency[sb].add(sa)
    session_slots = [slot[item] for item in prefix]
    return InterGraph(
        node_items=list(slot),
        adjacency=[sorted(nbrs) for nbrs in adjacency],
        session_slots=session_slots,
        last_slot=session_slots[-1],
    )
