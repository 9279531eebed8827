"""Candidate sampling and the per-target network-flow tracking subproblem.

Within a segment each live target carries exactly one unit of flow from the
source, through one candidate per frame, to the sink. On that layered DAG the
min-cost flow is a shortest path, solved by forward dynamic programming.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .appearance import AppearanceModel, score
from .features import (DEFAULT_FEATURES, FeatureConfig, has_samples, hist_intersection,
                       hist_intersection_matrix, joint_feature_batch)
from .scene import SCALES, BBox, Frame


class BrokenChainError(ValueError):
    """A frame layer of the flow graph has no candidates."""


@dataclass
class CandidateSet:
    """Candidate boxes of one target over consecutive frames.

    ``boxes[f]``, ``ids[f]`` and ``unary[f]`` are aligned per frame layer; ids are
    global within the segment so that dual variables can index them directly.
    """

    target_id: int
    boxes: list[list[BBox]]
    ids: list[np.ndarray]
    unary: list[np.ndarray]
    hists: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        for f, layer in enumerate(self.boxes):
            if not layer:
                raise BrokenChainError(f"broken-chain: target {self.target_id} has no candidates in layer {f}")

    @property
    def n_frames(self) -> int:
        return len(self.boxes)

    @property
    def all_ids(self) -> np.ndarray:
        return np.concatenate(self.ids)

    def box_of(self, cid: int) -> BBox:
        for f, ids in enumerate(self.ids):
            if ids[0] <= cid <= ids[-1]:
                return self.boxes[f][int(cid - ids[0])]
        raise KeyError(cid)


@dataclass
class FlowGraph:
    """Layered DAG: source -> layer 0 -> ... -> layer F-1 -> sink, unit capacities."""

    node_cost: list[np.ndarray]
    transition: list[np.ndarray]
    ids: list[np.ndarray]
    c_start: float = 10.0
    c_end: float = 10.0

    def __post_init__(self):
        for f, c in enumerate(self.node_cost):
            if len(c) == 0:
                raise BrokenChainError(f"broken-chain: empty frame layer {f}")
        for f, t in enumerate(self.transition):
            if t.shape != (len(self.node_cost[f]), len(self.node_cost[f + 1])):
                raise ValueError(f"transition {f} has shape {t.shape}")
            if not np.all(np.isfinite(t)):
                raise ValueError("edge costs must be finite")

    @property
    def n_candidates(self) -> int:
        return sum(len(c) for c in self.node_cost)

    @property
    def offset(self) -> int:
        return int(self.ids[0][0])


@dataclass
class FlowSolution:
    selected: list[int]          # local index per frame layer
    selected_ids: list[int]      # global candidate ids
    cost: float
    y: np.ndarray                # 0/1 indicator over the graph's candidates (local order)
    y_start: np.ndarray
    y_end: np.ndarray
    y_edges: list[np.ndarray]


def sample_boxes(prev_box: BBox, radius: Optional[float] = None, stride: float = 4.0,
                 frame_index: Optional[int] = None, scales=SCALES) -> list[BBox]:
    """Dense grid of centers within ``radius`` (Chebyshev) at three scales, ordered (scale, y, x)."""
    if radius is None:
        radius = max(prev_box.w, prev_box.h)
    steps = int(np.floor(radius / stride + 1e-9)) if stride > 0 else 0
    offsets = [k * stride for k in range(-steps, steps + 1)]
    cx, cy = prev_box.center
    frame = prev_box.frame if frame_index is None else frame_index
    return [prev_box.moved(cx + dx, cy + dy, s, frame) for s in sorted(scales) for dy in offsets for dx in offsets]


def sample_candidates(prev_box: BBox, frame: Frame, radius: Optional[float] = None, stride: float = 4.0,
                      target_id: int = 1, first_id: int = 0) -> CandidateSet:
    """Candidates for a single frame, zero unary cost until scored."""
    boxes = sample_boxes(prev_box, radius, stride, frame.index)
    boxes = [b for b, ok in zip(boxes, has_samples(frame, boxes)) if ok]
    if not boxes:
        cx, cy = prev_box.center
        cx = min(max(cx, 0.0), frame.width - 1.0)
        cy = min(max(cy, 0.0), frame.height - 1.0)
        boxes = [prev_box.moved(cx, cy, 1.0, frame.index)]
    ids = np.arange(first_id, first_id + len(boxes))
    return CandidateSet(target_id, [boxes], [ids], [np.zeros(len(boxes))])


def unary_cost(model: AppearanceModel, frame: Frame, box: BBox, cfg: FeatureConfig = DEFAULT_FEATURES) -> float:
    return -score(model, frame, box, cfg)


def pairwise_cost(h_m, h_n) -> float:
    return 1.0 - hist_intersection(h_m, h_n)


def build_candidates(model: AppearanceModel, frames: Sequence[Frame], prev_box: BBox,
                     radius: Optional[float] = None, stride: float = 4.0, first_id: int = 0,
                     cfg: FeatureConfig = DEFAULT_FEATURES, velocity=(0.0, 0.0)) -> CandidateSet:
    """Sample and score candidates in every frame of a segment.

    Frame f's grid is centered on ``prev_box`` moved by (f + 1) * ``velocity``
    (kept inside the frame), a constant-velocity guess that keeps appearance
    out of candidate placement.
    """
    boxes, ids, unary, hists = [], [], [], []
    nxt = first_id
    cx, cy = prev_box.center
    for k, frame in enumerate(frames):
        ax = min(max(cx + (k + 1) * velocity[0], 0.0), frame.width - 1.0)
        ay = min(max(cy + (k + 1) * velocity[1], 0.0), frame.height - 1.0)
        anchor = prev_box.moved(ax, ay, 1.0, frame.index)
        layer = sample_candidates(anchor, frame, radius, stride, model.target_id, nxt)
        feats = joint_feature_batch(frame, layer.boxes[0], cfg)
        section = feats[:, cfg.hog_len:]
        boxes.append(layer.boxes[0])
        ids.append(layer.ids[0])
        unary.append(-(feats @ model.w))
        hists.append(section / section.sum(axis=1, keepdims=True))
        nxt += len(layer.boxes[0])
    return CandidateSet(model.target_id, boxes, ids, unary, hists)


def build_graph(cands: CandidateSet, c_start: float = 10.0, c_end: float = 10.0) -> FlowGraph:
    trans = [1.0 - hist_intersection_matrix(cands.hists[f], cands.hists[f + 1])
             for f in range(cands.n_frames - 1)]
    return FlowGraph(list(cands.unary), trans, list(cands.ids), c_start, c_end)


def solve_flow(graph: FlowGraph, extra_unary: Optional[np.ndarray] = None) -> FlowSolution:
    """Single-unit min-cost source-to-sink flow by forward DP; ties go to the lowest id."""
    sizes = [len(c) for c in graph.node_cost]
    if extra_unary is None:
        extra_unary = np.zeros(sum(sizes))
    extra_unary = np.asarray(extra_unary, dtype=np.float64)
    if len(extra_unary) != sum(sizes):
        raise ValueError(f"extra_unary has length {len(extra_unary)}, expected {sum(sizes)}")
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    node = [graph.node_cost[f] + extra_unary[bounds[f]:bounds[f + 1]] for f in range(len(sizes))]

    dist = graph.c_start + node[0]
    back = []
    for f in range(1, len(sizes)):
        through = dist[:, None] + graph.transition[f - 1]
        arg = np.argmin(through, axis=0)
        back.append(arg)
        dist = through[arg, np.arange(sizes[f])] + node[f]
    total = dist + graph.c_end
    last = int(np.argmin(total))
    path = [last]
    for arg in reversed(back):
        path.append(int(arg[path[-1]]))
    path.reverse()

    y = np.zeros(sum(sizes), dtype=np.int8)
    for f, n in enumerate(path):
        y[bounds[f] + n] = 1
    y_start = np.zeros(sizes[0], dtype=np.int8)
    y_start[path[0]] = 1
    y_end = np.zeros(sizes[-1], dtype=np.int8)
    y_end[path[-1]] = 1
    y_edges = []
    for f in range(len(sizes) - 1):
        e = np.zeros((sizes[f], sizes[f + 1]), dtype=np.int8)
        e[path[f], path[f + 1]] = 1
        y_edges.append(e)
    ids = [int(graph.ids[f][n]) for f, n in enumerate(path)]
    return FlowSolution(path, ids, float(total[last]), y, y_start, y_end, y_edges)


def path_cost(graph: FlowGraph, path: Sequence[int], extra_unary: Optional[np.ndarray] = None) -> float:
    """Energy of selecting local candidate ``path[f]`` in each layer (same summation order as the DP)."""
    sizes = [len(c) for c in graph.node_cost]
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    if extra_unary is None:
        extra_unary = np.zeros(bounds[-1])

    def node(f, n):
        return graph.node_cost[f][n] + extra_unary[bounds[f] + n]

    total = graph.c_start + node(0, path[0])
    for f in range(1, len(path)):
        total = total + graph.transition[f - 1][path[f - 1], path[f]] + node(f, path[f])
    return float(total + graph.c_end)


def enumerate_min_cost(graph: FlowGraph, extra_unary: Optional[np.ndarray] = None) -> float:
    """Brute-force minimum over every path; exponential, for verification only."""
    return min(path_cost(graph, p, extra_unary) for p in product(*[range(len(c)) for c in graph.node_cost]))


def check_conservation(sol: FlowSolution, graph: FlowGraph) -> bool:
    """y_n^s + sum_m y_mn = y_n = y_n^t + sum_m y_nm on every node."""
    sizes = [len(c) for c in graph.node_cost]
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    for f in range(len(sizes)):
        yn = sol.y[bounds[f]:bounds[f + 1]]
        inflow = sol.y_start if f == 0 else sol.y_edges[f - 1].sum(axis=0)
        outflow = sol.y_end if f == len(sizes) - 1 else sol.y_edges[f].sum(axis=1)
        if not (np.array_equal(inflow, yn) and np.array_equal(outflow, yn)):
            return False
        if yn.sum() != 1:
            return False
    return True
