"""Binary s-t min-cut used by alpha-expansion moves and GrabCut.

The augmenting-path work is delegated to scipy's Dinic implementation, which
needs int32 capacities: real capacities are scaled into that range, and the
returned cut value is re-evaluated on the original capacities.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

_INT_BUDGET = 2 ** 30


def _to_int(caps: np.ndarray, total: float) -> tuple[np.ndarray, float]:
    if total <= _INT_BUDGET and np.all(caps == np.round(caps)):
        return caps.astype(np.int64), 1.0
    scale = _INT_BUDGET / max(total, 1e-300)
    return np.floor(caps * scale + 0.5).astype(np.int64), scale


def cut_value(source_caps, sink_caps, edges, caps, rev_caps, source_side) -> float:
    """Cost of a partition; ``source_side[p]`` True puts node p with the source."""
    source_side = np.asarray(source_side, dtype=bool)
    val = float(np.sum(np.asarray(source_caps)[~source_side]) + np.sum(np.asarray(sink_caps)[source_side]))
    if len(edges):
        u, v = edges[:, 0], edges[:, 1]
        val += float(np.sum(caps[source_side[u] & ~source_side[v]]))
        val += float(np.sum(rev_caps[source_side[v] & ~source_side[u]]))
    return val


def maxflow(source_caps, sink_caps, edges=None, caps=None, rev_caps=None):
    """Max-flow / min-cut on nodes 0..n-1 plus terminals.

    source_caps[p] is the capacity of s->p (paid when p ends on the sink side),
    sink_caps[p] that of p->t. ``edges`` is an (E, 2) array of node pairs with
    forward capacities ``caps`` (u->v) and optional reverse ``rev_caps`` (v->u).
    Returns (cut value, boolean array: True = source side).
    """
    source_caps = np.asarray(source_caps, dtype=np.float64)
    sink_caps = np.asarray(sink_caps, dtype=np.float64)
    n = len(source_caps)
    edges = np.zeros((0, 2), dtype=np.int64) if edges is None else np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    caps = np.zeros(len(edges)) if caps is None else np.asarray(caps, dtype=np.float64)
    rev_caps = np.zeros(len(edges)) if rev_caps is None else np.asarray(rev_caps, dtype=np.float64)
    if (source_caps < 0).any() or (sink_caps < 0).any() or (caps < 0).any() or (rev_caps < 0).any():
        raise ValueError("capacities must be non-negative")

    s, t = n, n + 1
    nodes = np.arange(n)
    rows = np.concatenate([np.full(n, s), nodes, edges[:, 0], edges[:, 1]])
    cols = np.concatenate([nodes, np.full(n, t), edges[:, 1], edges[:, 0]])
    vals = np.concatenate([source_caps, sink_caps, caps, rev_caps])
    keep = (vals > 0) & (rows != cols)
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    ivals, _ = _to_int(vals, float(vals.sum()))
    nz = ivals > 0
    graph = sp.csr_matrix((ivals[nz].astype(np.int32), (rows[nz], cols[nz])), shape=(n + 2, n + 2))
    graph.sum_duplicates()
    if graph.nnz == 0:
        side = np.ones(n, dtype=bool)
        return cut_value(source_caps, sink_caps, edges, caps, rev_caps, side), side

    flow = maximum_flow(graph, s, t, method="dinic").flow
    residual = (graph - flow).tocsr()
    residual.eliminate_zeros()
    seen = np.zeros(n + 2, dtype=bool)
    seen[breadth_first_order(residual, s, directed=True, return_predecessors=False)] = True
    side = seen[:n]
    return cut_value(source_caps, sink_caps, edges, caps, rev_caps, side), side
