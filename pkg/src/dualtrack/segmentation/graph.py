"""Spatio-temporal superpixel graph and the multi-label CRF energy defined on it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .slic import SuperpixelMap

MIN_FLOW = 1e-3
TEMPORAL_FRACTION = 1.0 / 3.0


def spatial_neighbors(assignment: np.ndarray) -> np.ndarray:
    """Unordered pairs (k, l), k < l, of superpixels sharing a 4-neighbour pixel edge."""
    a = np.asarray(assignment)
    pairs = np.concatenate([
        np.stack([a[:, :-1].ravel(), a[:, 1:].ravel()], axis=1),
        np.stack([a[:-1, :].ravel(), a[1:, :].ravel()], axis=1),
    ])
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(np.sort(pairs, axis=1), axis=0).astype(np.int64)


def temporal_neighbors(sp_t: SuperpixelMap, sp_t1: SuperpixelMap, flow: np.ndarray) -> np.ndarray:
    """Edges (k, l) where at least a third of k's pixels land inside l under the flow.

    Landing positions are rounded half-up; pixels leaving the frame count toward no superpixel.
    """
    h, w = sp_t.assignment.shape
    ys, xs = np.indices((h, w))
    tx = np.floor(xs + flow[..., 0] + 0.5).astype(np.int64)
    ty = np.floor(ys + flow[..., 1] + 0.5).astype(np.int64)
    inside = (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
    src = sp_t.assignment[inside]
    dst = sp_t1.assignment[ty[inside], tx[inside]]
    n1 = sp_t1.n
    counts = np.bincount(src * n1 + dst, minlength=sp_t.n * n1).reshape(sp_t.n, n1)
    hit = counts >= TEMPORAL_FRACTION * sp_t.sizes[:, None] - 1e-9
    return np.argwhere(hit & (counts > 0)).astype(np.int64)


def pairwise_weight(lab_k, lab_l, flow_k, flow_l) -> float:
    """D_c * max(0, cos(V_k, V_l)); the flow factor is 1 when either mean flow is ~0."""
    return float(pairwise_weights(np.atleast_2d(lab_k), np.atleast_2d(lab_l),
                                  np.atleast_2d(flow_k), np.atleast_2d(flow_l))[0])


def pairwise_weights(lab_k, lab_l, flow_k, flow_l) -> np.ndarray:
    dc = 1.0 / (1.0 + np.linalg.norm(np.asarray(lab_k) - np.asarray(lab_l), axis=1))
    nk = np.linalg.norm(flow_k, axis=1)
    nl = np.linalg.norm(flow_l, axis=1)
    small = (nk < MIN_FLOW) | (nl < MIN_FLOW)
    denom = np.where(small, 1.0, nk * nl)
    cos = np.sum(np.asarray(flow_k) * np.asarray(flow_l), axis=1) / denom
    df = np.where(small, 1.0, np.clip(cos, 0.0, 1.0))
    return dc * df


@dataclass
class STGraph:
    """Superpixels of every frame in a segment as one graph.

    Node ids are global: frame f's superpixel k is ``offsets[f] + k``.
    """

    maps: list[SuperpixelMap]
    offsets: np.ndarray
    spatial: np.ndarray          # (Es, 2) global node ids
    temporal: np.ndarray         # (Et, 2)
    w_spatial: np.ndarray        # D_c * D_f per spatial edge
    w_temporal: np.ndarray
    beta1: float = 1.0
    beta2: float = 5.0

    @property
    def n_nodes(self) -> int:
        return int(self.offsets[-1])

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([self.spatial, self.temporal]).reshape(-1, 2)

    @property
    def weights(self) -> np.ndarray:
        """Edge weights with the beta multipliers applied."""
        return np.concatenate([self.beta1 * self.w_spatial, self.beta2 * self.w_temporal])

    def frame_of(self, node: int) -> int:
        return int(np.searchsorted(self.offsets, node, side="right") - 1)

    def expand(self, labels: np.ndarray, f: int) -> np.ndarray:
        """Pixel label image of frame f from a per-node labeling."""
        m = self.maps[f]
        return np.asarray(labels)[self.offsets[f]:self.offsets[f + 1]][m.assignment]


def build_stgraph(maps: Sequence[SuperpixelMap], flows: Sequence[np.ndarray],
                  beta1: float = 1.0, beta2: float = 5.0) -> STGraph:
    """``flows[f]`` maps frame f to f+1; every map must already carry its mean flow."""
    maps = list(maps)
    offsets = np.concatenate([[0], np.cumsum([m.n for m in maps])]).astype(np.int64)
    sp_e, sp_w, tp_e, tp_w = [], [], [], []
    for f, m in enumerate(maps):
        e = spatial_neighbors(m.assignment)
        sp_e.append(e + offsets[f])
        sp_w.append(pairwise_weights(m.mean_lab[e[:, 0]], m.mean_lab[e[:, 1]],
                                     m.mean_flow[e[:, 0]], m.mean_flow[e[:, 1]]))
    for f in range(len(maps) - 1):
        a, b = maps[f], maps[f + 1]
        e = temporal_neighbors(a, b, flows[f])
        tp_e.append(np.stack([e[:, 0] + offsets[f], e[:, 1] + offsets[f + 1]], axis=1))
        tp_w.append(pairwise_weights(a.mean_lab[e[:, 0]], b.mean_lab[e[:, 1]],
                                     a.mean_flow[e[:, 0]], b.mean_flow[e[:, 1]]))

    spatial = np.concatenate(sp_e).reshape(-1, 2) if sp_e else np.zeros((0, 2), np.int64)
    temporal = np.concatenate(tp_e).reshape(-1, 2) if tp_e else np.zeros((0, 2), np.int64)
    w_s = np.concatenate(sp_w) if sp_w else np.zeros(0)
    w_t = np.concatenate(tp_w) if tp_w else np.zeros(0)
    return STGraph(maps, offsets, spatial.astype(np.int64), temporal.astype(np.int64), w_s, w_t, beta1, beta2)


def superpixel_unaries(graph: STGraph, fg_maps: Sequence[Sequence[np.ndarray]],
                       bg_maps: Sequence[np.ndarray]) -> np.ndarray:
    """Q(s, z): column 0 is -log S_bg(s), column i is -log S_fg(i)(s).

    ``fg_maps[f][i-1]`` and ``bg_maps[f]`` are per-pixel confidence maps of frame f;
    S(s) is the mean confidence over the superpixel's pixels.
    """
    n_labels = 1 + (len(fg_maps[0]) if len(fg_maps) else 0)
    Q = np.zeros((graph.n_nodes, n_labels))
    for f, m in enumerate(graph.maps):
        flat = m.assignment.ravel()
        rows = slice(graph.offsets[f], graph.offsets[f + 1])
        for lab, conf in enumerate([bg_maps[f], *fg_maps[f]]):
            mean = np.bincount(flat, weights=conf.ravel(), minlength=m.n) / m.sizes
            Q[rows, lab] = -np.log(mean)
    return Q


def crf_energy(graph: STGraph, labeling, unaries: np.ndarray) -> float:
    """Unary sum plus beta-weighted D over spatial and temporal edges with differing labels."""
    z = np.asarray(labeling)
    if z.shape != (graph.n_nodes,):
        raise ValueError(f"labeling must cover all {graph.n_nodes} nodes")
    if unaries.shape[0] != graph.n_nodes or z.max(initial=0) >= unaries.shape[1]:
        raise ValueError("missing unary entry for some node/label")
    val = float(unaries[np.arange(len(z)), z].sum())
    for edges, weights, beta in ((graph.spatial, graph.w_spatial, graph.beta1),
                                 (graph.temporal, graph.w_temporal, graph.beta2)):
        if len(edges):
            val += beta * float(weights[z[edges[:, 0]] != z[edges[:, 1]]].sum())
    return val
