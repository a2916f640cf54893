#!/usr/bin/env python3
"""Build the two graphs a session is encoded with."""

import numpy as np

from sessionrec import build_inter_graph, build_intra_graph

np.set_printoptions(precision=3, suppress=True)

# Within one session, clicks become directed edges between distinct items.
# The classic worked example: 1 -> 3 -> 2 -> 3 -> 4 -> 1.
g = build_intra_graph([1, 3, 2, 3, 4, 1])
print("nodes (first-appearance order):", g.node_items)
print("alias (click position -> node slot):", g.alias)
print("outgoing, row-normalized by out-degree:")
print(g.a_out)
print("incoming, row-normalized by in-degree:")
print(g.a_in)
# Item 3 clicks out to both 2 and 4, so its outgoing row splits 1/2 and 1/2.

# Across sessions, the current prefix is merged with retrieved neighbor
# sessions into one undirected graph. Consecutive clicks in any member
# session become edges; every node is adjacent to itself.
prefix = [1, 3, 2]
neighbor_sessions = [[2, 5, 4], [4, 1]]
ig = build_inter_graph(prefix, neighbor_sessions)
print("\nmerged nodes:", ig.node_items)
for slot, adjacent in enumerate(ig.adjacency):
    print(f"  node {ig.node_items[slot]} touches {[ig.node_items[a] for a in adjacent]}")
print("prefix occupies slots:", ig.session_slots)
print("dense mask:")
print(ig.mask())
