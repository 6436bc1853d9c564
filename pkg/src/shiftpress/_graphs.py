"""Shared block-graph machinery.

A potential of depth k is edge-local on the graph whose vertices are the
admissible (k-1)-blocks and whose edges append one symbol; pressure,
feasible domains, and mean-cycle analysis all run on this graph.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .sft import enumerate_word_array, word_code

TIGHT_SLACK = 1e-10


@dataclass(frozen=True)
class BlockGraph:
    spec: object
    depth: int                # words read on edges have this length (>= 2)
    states: np.ndarray        # (B, depth-1) admissible blocks, lex order
    edges_u: np.ndarray       # (E,) tail state per edge
    edges_v: np.ndarray       # (E,) head state per edge
    edge_codes: np.ndarray    # (E,) base-m code of the depth-word on each edge

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_edges(self):
        return len(self.edges_u)

    def edge_values(self, potential):
        """Potential values read along each edge (potential depth <= graph depth)."""
        lifted = potential.lift(self.depth)
        return lifted.table[self.edge_codes]

    def dense(self, edge_weights, fill=0.0):
        mat = np.full((self.n_states, self.n_states), fill)
        mat[self.edges_u, self.edges_v] = edge_weights
        return mat


def build_graph(spec, depth, _cache={}):
    """Block graph whose edges read admissible words of length max(depth, 2)."""
    depth = max(int(depth), 2)
    key = (spec, depth)
    if key in _cache:
        return _cache[key]
    m = spec.alphabet_size
    states = enumerate_word_array(spec, depth - 1)
    index = {word_code(row, m): i for i, row in enumerate(states)}
    us, vs, codes = [], [], []
    for u, row in enumerate(states):
        for s in np.flatnonzero(spec.transfer[row[-1]]):
            nxt = np.append(row[1:], s)
            us.append(u)
            vs.append(index[word_code(nxt, m)])
            codes.append(word_code(np.append(row, s), m))
    graph = BlockGraph(
        spec,
        depth,
        states,
        np.array(us, dtype=np.int64),
        np.array(vs, dtype=np.int64),
        np.array(codes, dtype=np.int64),
    )
    _cache[key] = graph
    return graph


def karp_mean_value(graph, edge_weights, maximize=False):
    """Extremal mean cycle weight via Karp's dynamic program (multi-source)."""
    w = np.asarray(edge_weights, dtype=np.float64)
    if maximize:
        return -karp_mean_value(graph, -w, maximize=False)
    B = graph.n_states
    dist = np.full((B + 1, B), np.inf)
    dist[0] = 0.0
    for k in range(1, B + 1):
        np.minimum.at(dist[k], graph.edges_v, dist[k - 1][graph.edges_u] + w)
    best = np.inf
    for v in range(B):
        if not np.isfinite(dist[B, v]):
            continue
        ratios = [
            (dist[B, v] - dist[k, v]) / (B - k) for k in range(B) if np.isfinite(dist[k, v])
        ]
        best = min(best, max(ratios))
    return float(best)


def tight_edges(graph, edge_weights, target, maximize, slack_tol=TIGHT_SLACK):
    """Edges lying on some cycle of extremal mean weight ``target``.

    Shortest-walk potentials for the reduced weights w - target certify
    tightness: an edge is tight when its reduced slack vanishes, and every
    cycle made of tight edges has mean exactly ``target``.
    """
    w = np.asarray(edge_weights, dtype=np.float64)
    if maximize:
        w = -w
        target = -target
    red = w - target
    p = np.zeros(graph.n_states)
    for _ in range(graph.n_states + 2):
        nxt = p.copy()
        np.minimum.at(nxt, graph.edges_v, p[graph.edges_u] + red)
        if np.array_equal(nxt, p):
            break
        p = nxt
    slack = p[graph.edges_u] + red - p[graph.edges_v]
    return slack <= slack_tol


def tight_components(graph, edge_weights, target, maximize, slack_tol=TIGHT_SLACK):
    """Strongly connected pieces of the mean-optimal subgraph.

    Measures integrating the weight to the extremal value are exactly those
    supported on these components; each is returned as
    ``(state_indices, edge_mask)`` with at least one internal edge.
    """
    tight = tight_edges(graph, edge_weights, target, maximize, slack_tol)
    if not tight.any():
        return []
    B = graph.n_states
    adj = csr_matrix(
        (np.ones(int(tight.sum())), (graph.edges_u[tight], graph.edges_v[tight])),
        shape=(B, B),
    )
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    comps = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        internal = tight & np.isin(graph.edges_u, members) & np.isin(graph.edges_v, members)
        if internal.any():
            comps.append((members, internal))
    return comps


def extremal_cycle(graph, edge_weights, maximize=False):
    """An extremal mean cycle: ``(mean_value, cycle_state_list)``.

    The value comes from Karp's recurrence; the witness cycle is any cycle
    of the tight subgraph, found by walking tight successors.
    """
    value = karp_mean_value(graph, edge_weights, maximize)
    comps = tight_components(graph, edge_weights, value, maximize)
    if not comps:
        raise AssertionError("tight subgraph lost the optimal cycle")
    members, internal = comps[0]
    succ = {}
    for u, v in zip(graph.edges_u[internal], graph.edges_v[internal]):
        succ.setdefault(int(u), int(v))
    walk = [int(members[0])]
    seen = {walk[0]: 0}
    while True:
        nxt = succ[walk[-1]]
        if nxt in seen:
            return value, walk[seen[nxt]:]
        seen[nxt] = len(walk)
        walk.append(nxt)
