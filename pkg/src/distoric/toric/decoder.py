"""Union-Find decoding on space-time syndrome graphs.

Graph vertices are ``(layer, site)`` pairs of one stabilizer type. Space
edges join the two sites sharing a data qubit within a layer, time edges
join a site to itself in the next layer. All edges have unit weight and grow
in half-edge steps.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .._accel import njit
from .lattice import ToricLattice


@dataclass(frozen=True)
class DecodeGraph:
    n_nodes: int
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_qubit: np.ndarray  # data qubit of a space edge, -1 for time edges
    adj_ptr: np.ndarray
    adj_edge: np.ndarray


def _csr(n_nodes: int, eu: np.ndarray, ev: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ends = np.concatenate([eu, ev])
    ids = np.concatenate([np.arange(len(eu)), np.arange(len(ev))])
    order = np.argsort(ends, kind="stable")
    ptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(ptr, ends + 1, 1)
    return np.cumsum(ptr), ids[order].astype(np.int64)


@lru_cache(maxsize=32)
def syndrome_graph(L: int, n_layers: int, stype: str) -> DecodeGraph:
    """Space-time graph over ``n_layers`` layers of the ``stype`` stabilizers."""
    lat = ToricLattice(L)
    pairs = lat.edge_sites(stype)
    ns = lat.n_sites
    eu, ev, eq = [], [], []
    for t in range(n_layers):
        eu.append(pairs[:, 0] + t * ns)
        ev.append(pairs[:, 1] + t * ns)
        eq.append(np.arange(lat.n_edges))
    for t in range(n_layers - 1):
        eu.append(np.arange(ns) + t * ns)
        ev.append(np.arange(ns) + (t + 1) * ns)
        eq.append(np.full(ns, -1))
    eu, ev, eq = (np.concatenate(a).astype(np.int64) for a in (eu, ev, eq))
    n = n_layers * ns
    ptr, adj = _csr(n, eu, ev)
    return DecodeGraph(n, eu, ev, eq, ptr, adj)


@njit
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit
def union_find_kernel(n_nodes, edge_u, edge_v, adj_ptr, adj_edge, defects):
    """Correction (one bit per graph edge) whose boundary equals ``defects``.

    Odd clusters of minimal size grow by half an edge per round; clusters
    merge when an edge is fully grown. Each even cluster is then peeled on a
    spanning tree of its grown edges.
    """
    n_edges = edge_u.shape[0]
    parent = np.arange(n_nodes)
    size = np.ones(n_nodes, dtype=np.int64)
    parity = np.zeros(n_nodes, dtype=np.int64)
    nxt = np.full(n_nodes, -1, dtype=np.int64)
    tail = np.arange(n_nodes)
    support = np.zeros(n_edges, dtype=np.int64)
    for i in range(n_nodes):
        if defects[i]:
            parity[i] = 1
    odd = np.empty(n_nodes, dtype=np.int64)
    fused = np.empty(2 * n_edges, dtype=np.int64)
    n_odd = 0
    for i in range(n_nodes):
        if parity[i]:
            odd[n_odd] = i
            n_odd += 1
    while n_odd > 0:
        smallest = size[odd[0]]
        for k in range(n_odd):
            if size[odd[k]] < smallest:
                smallest = size[odd[k]]
        n_fused = 0
        for k in range(n_odd):
            r = odd[k]
            if size[r] != smallest:
                continue
            x = r
            while x != -1:
                for a in range(adj_ptr[x], adj_ptr[x + 1]):
                    e = adj_edge[a]
                    if support[e] < 2:
                        support[e] += 1
                        if support[e] == 2:
                            fused[n_fused] = e
                            n_fused += 1
                x = nxt[x]
        for k in range(n_fused):
            e = fused[k]
            ru = _find(parent, edge_u[e])
            rv = _find(parent, edge_v[e])
            if ru == rv:
                continue
            if size[ru] < size[rv]:
                ru, rv = rv, ru
            parent[rv] = ru
            size[ru] += size[rv]
            parity[ru] ^= parity[rv]
            nxt[tail[ru]] = rv
            tail[ru] = tail[rv]
        n_odd = 0
        for k in range(n_nodes):
            if parent[k] == k and parity[k]:
                odd[n_odd] = k
                n_odd += 1
    # peeling on spanning trees of the fully grown edges
    corr = np.zeros(n_edges, dtype=np.uint8)
    left = np.zeros(n_nodes, dtype=np.uint8)
    for i in range(n_nodes):
        left[i] = 1 if defects[i] else 0
    seen = np.zeros(n_nodes, dtype=np.uint8)
    order = np.empty(n_nodes, dtype=np.int64)
    via = np.full(n_nodes, -1, dtype=np.int64)
    for start in range(n_nodes):
        if seen[start] or not defects[start]:
            continue
        seen[start] = 1
        order[0] = start
        head, n_order = 0, 1
        while head < n_order:
            x = order[head]
            head += 1
            for a in range(adj_ptr[x], adj_ptr[x + 1]):
                e = adj_edge[a]
                if support[e] != 2:
                    continue
                y = edge_v[e] if edge_u[e] == x else edge_u[e]
                if not seen[y]:
                    seen[y] = 1
                    via[y] = e
                    order[n_order] = y
                    n_order += 1
        for k in range(n_order - 1, 0, -1):
            x = order[k]
            if left[x]:
                e = via[x]
                corr[e] ^= 1
                left[x] = 0
                y = edge_v[e] if edge_u[e] == x else edge_u[e]
                left[y] ^= 1
    return corr


def decode_union_find(graph: DecodeGraph, defects: np.ndarray) -> np.ndarray:
    """Graph-edge correction for a defect vector over ``graph.n_nodes`` vertices."""
    defects = np.ascontiguousarray(defects, dtype=np.uint8)
    if defects.shape != (graph.n_nodes,):
        raise ValueError("defect vector does not match the graph")
    if int(defects.sum()) % 2:
        raise ValueError("odd number of defects: the syndrome cannot come from a torus")
    return union_find_kernel(graph.n_nodes, graph.edge_u, graph.edge_v, graph.adj_ptr, graph.adj_edge, defects)


def data_correction(graph: DecodeGraph, correction: np.ndarray, n_qubits: int) -> np.ndarray:
    """Fold a graph-edge correction onto data qubits (time edges drop out)."""
    space = (correction != 0) & (graph.edge_qubit >= 0)
    out = np.zeros(n_qubits, dtype=np.uint8)
    np.bitwise_xor.at(out, graph.edge_qubit[space], 1)
    return out


def edge_boundary(graph: DecodeGraph, correction: np.ndarray) -> np.ndarray:
    """Defects produced by a set of graph edges."""
    out = np.zeros(graph.n_nodes, dtype=np.uint8)
    sel = correction != 0
    np.bitwise_xor.at(out, graph.edge_u[sel], 1)
    np.bitwise_xor.at(out, graph.edge_v[sel], 1)
    return out
