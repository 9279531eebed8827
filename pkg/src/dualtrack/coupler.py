"""Joint tracking and segmentation of one video segment by Lagrangian dual decomposition.

The joint energy E(Y, Z) = E_track(Y) + E_couple(Y, Z) + E_seg(Z) is split by
copying the box selection into Y0 (tracking side) and Y1 (segmentation side).
Multipliers lambda, indexed by candidate id, price their disagreement; a
subgradient loop raises the price of tracking boxes the segmentation side does
not choose until both sides agree up to the configured box overlap.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .appearance import AppearanceModel, SearchSpace, pa_update
from .config import Config
from .flow import block_matching_flow
from .scene import BBox, Frame, PixelMask, Track, VideoSegment, center_distance, exit_check, iou
from .segmentation.expansion import alpha_expansion, potts_energy
from .segmentation.gmm import Gmm, confidence_map
from .segmentation.graph import STGraph, build_stgraph, superpixel_unaries
from .segmentation.slic import slic
from .trackflow import CandidateSet, FlowGraph, build_candidates, build_graph, path_cost, solve_flow

log = logging.getLogger(__name__)

TIE_TOL = 1e-9


# --- coupling energy -------------------------------------------------------

def shape_prior(rel_x, rel_y):
    """Separable raised cosine: 1 at the box center, 0 on and beyond the border."""
    rel_x, rel_y = np.asarray(rel_x, dtype=np.float64), np.asarray(rel_y, dtype=np.float64)
    inside = (rel_x >= 0) & (rel_x <= 1) & (rel_y >= 0) & (rel_y <= 1)
    val = 0.25 * (1 - np.cos(2 * np.pi * rel_x)) * (1 - np.cos(2 * np.pi * rel_y))
    return np.where(inside, val, 0.0)


def box_kernel(box: BBox):
    """Unclipped pixel origin (y0, x0) of the box and its shape-prior weights (kh, kw).

    A pixel belongs to the box when its center lies inside it.
    """
    x0, y0 = math.ceil(box.x - 0.5), math.ceil(box.y - 0.5)
    x1, y1 = math.ceil(box.x + box.w - 0.5), math.ceil(box.y + box.h - 0.5)
    rx = (np.arange(x0, x1) + 0.5 - box.x) / box.w
    ry = (np.arange(y0, y1) + 0.5 - box.y) / box.h
    return y0, x0, shape_prior(rx[None, :], ry[:, None])


def couple_energy(Y: Mapping[int, Mapping[int, BBox]], Z: Mapping[int, PixelMask], phi0: float = 0.05) -> float:
    """Sum over targets i and pixels k of theta for k in y_i with z_k != i, plus phi0 for k outside y_i with z_k = i.

    ``Y[target][frame]`` is the selected box and ``Z[frame]`` the pixel labeling
    (label value = target id). Frames missing from either side contribute nothing.
    """
    total = 0.0
    for tid, boxes in Y.items():
        for f, box in boxes.items():
            if f not in Z:
                continue
            total += _box_couple(box, np.asarray(Z[f].labels), tid, phi0)
    return total


def _clipped_kernel(box: BBox, H: int, W: int):
    """Frame slices covered by the box and the matching part of its kernel."""
    y0, x0, theta = box_kernel(box)
    ya, xa = min(max(0, y0), H), min(max(0, x0), W)
    yb, xb = max(ya, min(H, y0 + theta.shape[0])), max(xa, min(W, x0 + theta.shape[1]))
    return slice(ya, yb), slice(xa, xb), theta[ya - y0:yb - y0, xa - x0:xb - x0]


def _box_couple(box: BBox, labels: np.ndarray, label: int, phi0: float) -> float:
    ys, xs, theta_c = _clipped_kernel(box, *labels.shape)
    region = labels[ys, xs]
    inside = float(theta_c[region != label].sum())
    outside = int((labels == label).sum()) - int((region == label).sum())
    return inside + phi0 * outside


def _window_sums(img: np.ndarray, kernel: np.ndarray, y0s: np.ndarray, x0s: np.ndarray) -> np.ndarray:
    """sum(img[y0 + i, x0 + j] * kernel[i, j]) per origin; pixels outside img count as 0."""
    kh, kw = kernel.shape
    padded = np.zeros((img.shape[0] + 2 * kh, img.shape[1] + 2 * kw))
    padded[kh:kh + img.shape[0], kw:kw + img.shape[1]] = img
    win = sliding_window_view(padded, (kh, kw))
    return np.einsum("nij,ij->n", win[y0s + kh, x0s + kw], kernel)


@dataclass
class _KernelGroup:
    theta: np.ndarray
    y0: np.ndarray
    x0: np.ndarray
    local: np.ndarray


def _kernel_groups(boxes: Sequence[BBox]) -> list[_KernelGroup]:
    """Group boxes whose pixel footprints differ only by an integer translation."""
    groups: dict[tuple, list] = {}
    for n, b in enumerate(boxes):
        key = (round(b.w, 9), round(b.h, 9), round(b.x % 1.0, 9), round(b.y % 1.0, 9))
        groups.setdefault(key, []).append(n)
    out = []
    for members in groups.values():
        y0, x0, theta = box_kernel(boxes[members[0]])
        ys = [math.ceil(boxes[n].y - 0.5) for n in members]
        xs = [math.ceil(boxes[n].x - 0.5) for n in members]
        out.append(_KernelGroup(theta, np.array(ys), np.array(xs), np.array(members)))
    return out


# --- segment problem -------------------------------------------------------

@dataclass
class SegModels:
    """Color models of the segmentation side: one foreground GMM per target plus background."""

    fg: dict[int, Gmm]
    bg: Gmm


@dataclass
class SegmentProblem:
    frames: list[Frame]
    target_ids: list[int]
    config: Config
    cands: list[CandidateSet] = field(default_factory=list)
    graphs: list[FlowGraph] = field(default_factory=list)
    stgraph: Optional[STGraph] = None
    Q: Optional[np.ndarray] = None
    groups: list = field(default_factory=list)   # [target][frame] -> list[_KernelGroup]

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def n_targets(self) -> int:
        return len(self.target_ids)

    @property
    def n_cand(self) -> int:
        return sum(g.n_candidates for g in self.graphs)

    def box(self, ti: int, cid: int) -> BBox:
        return self.cands[ti].box_of(cid)

    def pixel_labels(self, Z: np.ndarray) -> list[np.ndarray]:
        """Per-frame pixel images of label indices (0 = background, i = target_ids[i-1])."""
        return [self.stgraph.expand(Z, f) for f in range(self.n_frames)]

    def masks(self, Z: np.ndarray) -> list[PixelMask]:
        lut = np.array([0] + list(self.target_ids), dtype=np.int32)
        return [PixelMask(lut[img]) for img in self.pixel_labels(Z)]


def prepare_segment(frames: Sequence[Frame], target_ids: Sequence[int], config: Config,
                    models: Optional[Mapping[int, AppearanceModel]] = None,
                    prev_boxes: Optional[Mapping[int, BBox]] = None,
                    seg_models: Optional[SegModels] = None,
                    flows: Optional[Sequence[np.ndarray]] = None,
                    velocities: Optional[Mapping[int, tuple]] = None) -> SegmentProblem:
    """Build the tracking side (needs models and prev_boxes) and/or the segmentation side (needs seg_models).

    ``velocities[tid]`` (pixels per frame) shifts that target's candidate grids; default zero.
    """
    prob = SegmentProblem(list(frames), list(target_ids), config)
    if models is not None:
        nxt = 0
        for tid in prob.target_ids:
            vel = (velocities or {}).get(tid, (0.0, 0.0))
            cs = build_candidates(models[tid], frames, prev_boxes[tid], config.cand_radius,
                                  config.cand_stride, first_id=nxt, velocity=vel)
            prob.cands.append(cs)
            prob.graphs.append(build_graph(cs, config.c_start, config.c_end))
            prob.groups.append([_kernel_groups(layer) for layer in cs.boxes])
            nxt += sum(len(b) for b in cs.boxes)
    if seg_models is not None:
        if flows is None:
            flows = [block_matching_flow(a, b, config.flow_block, config.flow_search)
                     for a, b in zip(frames[:-1], frames[1:])]
        flows = list(flows)
        maps = []
        for f, frame in enumerate(frames):
            sp = slic(frame, min(config.n_sp, frame.width * frame.height), config.compactness)
            maps.append(sp.with_flow(flows[min(f, len(flows) - 1)]))
        prob.stgraph = build_stgraph(maps, flows, config.beta1, config.beta2)
        fg_maps = [[confidence_map(seg_models.fg[tid], fr) for tid in prob.target_ids] for fr in frames]
        bg_maps = [confidence_map(seg_models.bg, fr) for fr in frames]
        prob.Q = superpixel_unaries(prob.stgraph, fg_maps, bg_maps)
    return prob


# --- dual state and updates --------------------------------------------------

def step_size(t: int) -> float:
    return 1.0 / (10.0 + t)


@dataclass
class DualState:
    lam: np.ndarray
    gam: np.ndarray
    t: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def zeros(cls, n: int) -> "DualState":
        return cls(np.zeros(n), np.zeros(n))


def agreement(box0: BBox, box1: BBox, overlap: float = 0.8) -> bool:
    """Boxes agree when their IoU exceeds ``overlap``; an overlap of 1 demands identical boxes."""
    if overlap >= 1.0:
        return (box0.x, box0.y, box0.w, box0.h) == (box1.x, box1.y, box1.w, box1.h)
    return iou(box0, box1) > overlap


def subgradient_step(state: DualState, y0: np.ndarray, y1: np.ndarray,
                     agreed: Optional[np.ndarray] = None) -> DualState:
    """lambda += alpha_t (Y0 - Y1) over disagreeing slots only; t advances.

    ``y0`` and ``y1`` hold the selected candidate id of every (target, frame) slot.
    """
    y0, y1 = np.asarray(y0).ravel(), np.asarray(y1).ravel()
    agreed = (y0 == y1) if agreed is None else np.asarray(agreed).ravel()
    alpha = step_size(state.t)
    lam = state.lam.copy()
    for a, b, ok in zip(y0, y1, agreed):
        if ok or a == b:
            continue
        lam[a] += alpha
        lam[b] -= alpha
    return replace(state, lam=lam, t=state.t + 1)


def update_gamma(state: DualState, boxes0: Sequence[Sequence[BBox]], ids0: np.ndarray,
                 pixel_labels: Sequence[np.ndarray], delta: float = 15.0) -> DualState:
    """Penalize tracking boxes that crowd another target's box without any supporting pixel.

    ``boxes0[i][f]`` / ``ids0[i, f]`` are target i's selected box and its candidate id,
    and ``pixel_labels[f]`` labels target i as i + 1.
    """
    alpha = step_size(state.t)
    gam = state.gam.copy()
    n_t = len(boxes0)
    for f, labels in enumerate(pixel_labels):
        H, W = labels.shape
        for i in range(n_t):
            box = boxes0[i][f]
            close = any(center_distance(box, boxes0[j][f]) < delta for j in range(n_t) if j != i)
            if not close:
                continue
            x0, y0, x1, y1 = box.pixel_bounds(W, H)
            if not np.any(labels[y0:y1, x0:x1] == i + 1):
                gam[ids0[i, f]] += alpha
    return replace(state, gam=gam)


# --- subproblems -------------------------------------------------------------

def _extra(prob: SegmentProblem, ti: int, vec: np.ndarray) -> np.ndarray:
    g = prob.graphs[ti]
    return vec[g.offset:g.offset + g.n_candidates]


def solve_g(prob: SegmentProblem, lam: np.ndarray, gam: Optional[np.ndarray] = None):
    """Per-target flow with extra unary lambda + gamma; returns (solutions, ids array (N, F))."""
    vec = lam if gam is None else lam + gam
    sols = [solve_flow(g, _extra(prob, ti, vec)) for ti, g in enumerate(prob.graphs)]
    return sols, np.array([s.selected_ids for s in sols], dtype=np.int64).reshape(prob.n_targets, prob.n_frames)


def dual_track_value(prob: SegmentProblem, lam: np.ndarray) -> float:
    """g(lambda) = min_Y0 E_track(Y0) + lambda Y0, exact."""
    return sum(solve_flow(g, _extra(prob, ti, lam)).cost for ti, g in enumerate(prob.graphs))


def track_energy(prob: SegmentProblem, ids: np.ndarray) -> float:
    total = 0.0
    for ti, g in enumerate(prob.graphs):
        path = [int(ids[ti, f] - g.ids[f][0]) for f in range(prob.n_frames)]
        total += path_cost(g, path)
    return total


def couple_unaries(prob: SegmentProblem, ids: np.ndarray) -> np.ndarray:
    """Per-superpixel, per-label coupling cost with the box selection ``ids`` held fixed."""
    cfg = prob.config
    n_labels = prob.n_targets + 1
    U = np.zeros((prob.stgraph.n_nodes, n_labels))
    for f, m in enumerate(prob.stgraph.maps):
        H, W = m.assignment.shape
        flat = m.assignment.ravel()
        rows = slice(prob.stgraph.offsets[f], prob.stgraph.offsets[f + 1])
        theta_sum = np.zeros((m.n, prob.n_targets))
        out_cnt = np.zeros((m.n, prob.n_targets))
        for ti in range(prob.n_targets):
            box = prob.box(ti, int(ids[ti, f]))
            ys, xs, theta_c = _clipped_kernel(box, H, W)
            img = np.zeros((H, W))
            inside = np.zeros((H, W), dtype=bool)
            img[ys, xs] = theta_c
            inside[ys, xs] = True
            theta_sum[:, ti] = np.bincount(flat, weights=img.ravel(), minlength=m.n)
            out_cnt[:, ti] = m.sizes - np.bincount(flat, weights=inside.ravel(), minlength=m.n)
        U[rows, 0] = theta_sum.sum(axis=1)
        for ti in range(prob.n_targets):
            U[rows, ti + 1] = theta_sum.sum(axis=1) - theta_sum[:, ti] + cfg.phi0 * out_cnt[:, ti]
    return cfg.couple_weight * U


def candidate_couple_costs(prob: SegmentProblem, ti: int, f: int, labels: np.ndarray) -> np.ndarray:
    """E_couple contribution of every candidate of target ti in frame f under pixel labels."""
    lab = ti + 1
    not_i = (labels != lab).astype(np.float64)
    is_i = (labels == lab).astype(np.float64)
    total_i = is_i.sum()
    out = np.zeros(len(prob.cands[ti].boxes[f]))
    for grp in prob.groups[ti][f]:
        inside = _window_sums(not_i, grp.theta, grp.y0, grp.x0)
        own = _window_sums(is_i, np.ones_like(grp.theta), grp.y0, grp.x0)
        out[grp.local] = inside + prob.config.phi0 * (total_i - own)
    return out


def best_boxes_given_z(prob: SegmentProblem, pixel_labels: Sequence[np.ndarray], lam: np.ndarray,
                       current: Optional[np.ndarray] = None) -> np.ndarray:
    """Step B: per target and frame, argmin over candidates of couple cost - lambda.

    Ties (common for a hidden target, whose cost barely depends on position)
    go to the candidate overlapping ``current`` most, then to the lowest id.
    """
    ids = np.zeros((prob.n_targets, prob.n_frames), dtype=np.int64)
    for ti in range(prob.n_targets):
        cs = prob.cands[ti]
        for f in range(prob.n_frames):
            cost = prob.config.couple_weight * candidate_couple_costs(prob, ti, f, pixel_labels[f]) - lam[cs.ids[f]]
            best = float(cost.min())
            tied = np.flatnonzero(cost <= best + TIE_TOL * (1.0 + abs(best)))
            if current is None or len(tied) == 1:
                ids[ti, f] = cs.ids[f][tied[0]]
                continue
            ref = prob.box(ti, int(current[ti, f]))
            overlaps = [iou(cs.boxes[f][n], ref) for n in tied]
            ids[ti, f] = cs.ids[f][tied[int(np.argmax(overlaps))]]
    return ids


def couple_value(prob: SegmentProblem, ids: np.ndarray, pixel_labels: Sequence[np.ndarray]) -> float:
    total = 0.0
    for ti in range(prob.n_targets):
        for f in range(prob.n_frames):
            total += _box_couple(prob.box(ti, int(ids[ti, f])), pixel_labels[f], ti + 1, prob.config.phi0)
    return prob.config.couple_weight * total


def seg_energy(prob: SegmentProblem, Z: np.ndarray) -> float:
    return potts_energy(prob.Q, prob.stgraph.edges, prob.stgraph.weights, Z)


@dataclass
class HSolution:
    ids: np.ndarray
    Z: np.ndarray
    value: float                 # E_couple + E_seg - lambda Y1
    trace: list                  # h objective after every A/B step
    from_store: bool = False


@dataclass
class _Stored:
    fixed: float                 # E_couple + E_seg, lambda-free
    ids: np.ndarray
    Z: np.ndarray


def solve_h(prob: SegmentProblem, lam: np.ndarray, init_ids: np.ndarray,
            init_Z: Optional[np.ndarray] = None, store: Sequence[_Stored] = ()) -> HSolution:
    """Alternate graph-cut labeling (boxes fixed) and exhaustive box choice (labels fixed).

    Always finishes on a box step, so the returned Y1 is optimal for the returned Z.
    Pairs seen in earlier iterations stay eligible, which keeps the reported
    value below every primal energy evaluated so far.
    """
    edges, weights = prob.stgraph.edges, prob.stgraph.weights
    ids = np.asarray(init_ids).copy()
    Z = np.zeros(prob.stgraph.n_nodes, dtype=np.int64) if init_Z is None else np.asarray(init_Z).copy()

    def objective(ids_, Z_, pix=None):
        pix = prob.pixel_labels(Z_) if pix is None else pix
        return couple_value(prob, ids_, pix) + seg_energy(prob, Z_) - float(lam[ids_].sum())

    trace = [objective(ids, Z)]
    for _ in range(prob.config.h_rounds):
        res = alpha_expansion(prob.Q + couple_unaries(prob, ids), edges, weights, init=Z)
        new_Z = res.labels
        pix = prob.pixel_labels(new_Z)
        trace.append(objective(ids, new_Z, pix))
        new_ids = best_boxes_given_z(prob, pix, lam, ids)
        trace.append(objective(new_ids, new_Z, pix))
        changed = not (np.array_equal(new_Z, Z) and np.array_equal(new_ids, ids))
        Z, ids = new_Z, new_ids
        if not changed:
            break
    best = HSolution(ids, Z, trace[-1], trace)
    if store:
        vals = [s.fixed - float(lam[s.ids].sum()) for s in store]
        k = int(np.argmin(vals))
        if vals[k] < best.value:
            s = store[k]
            pix = prob.pixel_labels(s.Z)
            ids_k = best_boxes_given_z(prob, pix, lam, s.ids)
            val = objective(ids_k, s.Z, pix)
            if val > vals[k]:
                ids_k, val = s.ids, vals[k]
            best = HSolution(ids_k, s.Z.copy(), val, trace + [val], from_store=True)
    return best


# --- the segment loop ----------------------------------------------------------

@dataclass
class IterationRecord:
    iter: int
    disagreements: int
    dual: float
    primal: float            # E(Y0, Z) of this iteration
    best_primal: float       # min over every (Y, Z) pair evaluated so far


@dataclass
class SegmentResult:
    boxes: dict[int, dict[int, BBox]]      # target id -> frame index -> box
    masks: dict[int, PixelMask]            # frame index -> labels (target ids)
    history: list[IterationRecord]
    converged: bool
    iterations: int
    Z: Optional[np.ndarray] = None
    ids: Optional[np.ndarray] = None
    state: Optional[DualState] = None


def _boxes_of(prob: SegmentProblem, ids: np.ndarray) -> list[list[BBox]]:
    return [[prob.box(ti, int(ids[ti, f])) for f in range(prob.n_frames)] for ti in range(prob.n_targets)]


def dual_loop(prob: SegmentProblem, freeze_dual: bool = False) -> SegmentResult:
    """Subgradient ascent on the Lagrangian dual of one prepared segment."""
    cfg = prob.config
    state = DualState.zeros(prob.n_cand)
    store: list[_Stored] = []
    history: list[IterationRecord] = []
    best_primal = np.inf
    fallback = None          # (E(Y0, Z), ids0, Z)
    prev_Z = None
    converged = False
    ids0 = Z = None
    for it in range(cfg.max_iters):
        _, ids0 = solve_g(prob, state.lam, state.gam)
        g_val = dual_track_value(prob, state.lam)
        h = solve_h(prob, state.lam, ids0, prev_Z, store)
        Z = h.Z
        pix = prob.pixel_labels(Z)
        seg_e = seg_energy(prob, Z)
        fixed0 = couple_value(prob, ids0, pix) + seg_e
        fixed1 = couple_value(prob, h.ids, pix) + seg_e
        primal0 = track_energy(prob, ids0) + fixed0
        primal1 = track_energy(prob, h.ids) + fixed1
        store.append(_Stored(fixed0, ids0.copy(), Z.copy()))
        store.append(_Stored(fixed1, h.ids.copy(), Z.copy()))
        best_primal = min(best_primal, primal0, primal1)
        if fallback is None or primal0 < fallback[0]:
            fallback = (primal0, ids0.copy(), Z.copy())

        b0, b1 = _boxes_of(prob, ids0), _boxes_of(prob, h.ids)
        agreed = np.array([[agreement(b0[i][f], b1[i][f], cfg.agreement_overlap)
                            for f in range(prob.n_frames)] for i in range(prob.n_targets)], dtype=bool)
        n_dis = int((~agreed).sum())
        rec = IterationRecord(it, n_dis, g_val + h.value, primal0, best_primal)
        history.append(rec)
        state.history.append({"ids0": ids0.copy(), "ids1": h.ids.copy(), "dual": rec.dual,
                              "disagreements": n_dis})
        log.debug("iter %d: %d disagreements, dual %.4f, primal %.4f", it, n_dis, rec.dual, primal0)
        if n_dis == 0:
            converged = True
            break
        if freeze_dual:
            break
        state = update_gamma(state, b0, ids0, pix, cfg.delta)
        state = subgradient_step(state, ids0, h.ids, agreed)
        prev_Z = Z

    if not converged and not freeze_dual:
        _, ids0, Z = fallback
    boxes = {tid: {prob.frames[f].index: prob.box(ti, int(ids0[ti, f])) for f in range(prob.n_frames)}
             for ti, tid in enumerate(prob.target_ids)}
    masks = {prob.frames[f].index: m for f, m in enumerate(prob.masks(Z))}
    return SegmentResult(boxes, masks, history, converged, len(history), Z, ids0, state)


def track_only(prob: SegmentProblem) -> dict[int, dict[int, BBox]]:
    _, ids = solve_g(prob, np.zeros(prob.n_cand))
    return {tid: {prob.frames[f].index: prob.box(ti, int(ids[ti, f])) for f in range(prob.n_frames)}
            for ti, tid in enumerate(prob.target_ids)}


def seg_only(prob: SegmentProblem) -> dict[int, PixelMask]:
    res = alpha_expansion(prob.Q, prob.stgraph.edges, prob.stgraph.weights)
    return {prob.frames[f].index: m for f, m in enumerate(prob.masks(res.labels))}


def track_velocity(track: Track, span: int = 10) -> tuple[float, float]:
    """Mean per-frame center displacement over the last ``span`` frames; zero for a fresh track."""
    last = track.last_frame
    first = max(min(track.boxes), last - span)
    if first == last:
        return (0.0, 0.0)
    (ax, ay), (bx, by) = track.boxes[last].center, track.boxes[first].center
    return ((ax - bx) / (last - first), (ay - by) / (last - first))


def run_segment(segment: VideoSegment, models: dict[int, AppearanceModel], tracks: dict[int, Track],
                seg_models: SegModels, config: Config, flows=None, freeze_dual: bool = False):
    """Joint solve of one segment, then model updates and exit checks.

    Returns (tracks, masks, result). ``tracks`` and ``models`` are updated in place.
    """
    live = [tid for tid in sorted(tracks) if tracks[tid].active]
    frames = list(segment.frames)
    prev = {tid: tracks[tid].boxes[segment.start - 1] for tid in live}
    if not live:
        blank = {f.index: PixelMask(np.zeros((f.height, f.width), np.int32)) for f in frames}
        return tracks, blank, None
    prob = prepare_segment(frames, live, config, models, prev, seg_models, flows,
                           {tid: track_velocity(tracks[tid], config.segment_length) for tid in live})
    result = dual_loop(prob, freeze_dual=freeze_dual)
    last = frames[-1]
    for tid in live:
        for fi in sorted(result.boxes[tid]):
            tracks[tid].add(result.boxes[tid][fi])
        box = result.boxes[tid][last.index]
        space = SearchSpace(box, radius=config.learn_radius_factor * box.w, stride=config.learn_stride)
        models[tid] = pa_update(models[tid], last, box, space, config.pa_C)
        if exit_check(tracks[tid], last):
            tracks[tid].active = False
            tracks[tid].exit_frame = last.index
    return tracks, result.masks, result
