"""Tracking (CLEAR MOT) and identity-aware segmentation metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from .scene import BBox, iou

# frame -> {target id -> box}
Boxes = Mapping[int, Mapping[int, BBox]]


@dataclass
class MotReport:
    MOTA: float
    MOTP: float
    Rcll: float
    Prcn: float
    MT: float     # percent of ground-truth tracks covered >= 80%
    ML: float     # percent covered < 20%
    Frag: int
    IDS: int
    FN: int
    FP: int
    n_gt: int

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SegReport:
    identity_iou: float
    overall_err: float
    avg_err: float
    over_seg: float

    def as_dict(self) -> dict:
        return asdict(self)


def clear_mot(gt: Boxes, hyp: Boxes, iou_threshold: float = 0.5) -> MotReport:
    """CLEAR MOT with match persistence and greedy descending-IoU assignment."""
    n_gt = sum(len(v) for v in gt.values())
    if n_gt == 0:
        raise ValueError("ground truth is empty")
    frames = sorted(set(gt) | set(hyp))
    last_match: dict[int, int] = {}      # gt id -> hyp id from the latest frame it was matched
    prev_pairs: dict[int, int] = {}      # matches of the previous frame
    tp = fp = fn = ids = 0
    iou_sum = 0.0
    covered: dict[int, list[bool]] = {}
    for f in frames:
        g = dict(gt.get(f, {}))
        h = dict(hyp.get(f, {}))
        pairs: dict[int, int] = {}
        for gid, hid in prev_pairs.items():
            if gid in g and hid in h and iou(g[gid], h[hid]) >= iou_threshold:
                pairs[gid] = hid
        scored = sorted(
            ((iou(g[gid], h[hid]), gid, hid) for gid in g if gid not in pairs
             for hid in h if hid not in pairs.values()),
            key=lambda t: (-t[0], t[1], t[2]),
        )
        used = set(pairs.values())
        for ov, gid, hid in scored:
            if ov < iou_threshold:
                break
            if gid in pairs or hid in used:
                continue
            pairs[gid] = hid
            used.add(hid)
        for gid, hid in pairs.items():
            if gid in last_match and last_match[gid] != hid:
                ids += 1
            last_match[gid] = hid
            iou_sum += iou(g[gid], h[hid])
        tp += len(pairs)
        fn += len(g) - len(pairs)
        fp += len(h) - len(pairs)
        for gid in g:
            covered.setdefault(gid, []).append(gid in pairs)
        prev_pairs = pairs

    mt = ml = frag = 0
    for seq in covered.values():
        ratio = sum(seq) / len(seq)
        mt += ratio >= 0.8
        ml += ratio < 0.2
        for k in range(1, len(seq)):
            if seq[k] and not seq[k - 1] and any(seq[:k]):
                frag += 1
    n_tracks = len(covered)
    return MotReport(
        MOTA=1.0 - (fn + fp + ids) / n_gt,
        MOTP=iou_sum / tp if tp else 0.0,
        Rcll=tp / n_gt,
        Prcn=tp / (tp + fp) if tp + fp else 0.0,
        MT=100.0 * mt / n_tracks,
        ML=100.0 * ml / n_tracks,
        Frag=frag,
        IDS=ids,
        FN=fn,
        FP=fp,
        n_gt=n_gt,
    )


def _ids(mask: np.ndarray) -> list[int]:
    return [int(v) for v in np.unique(mask) if v != 0]


def assign_segments(gt_masks: Mapping[int, np.ndarray], pred_masks: Mapping[int, np.ndarray]) -> dict[int, int]:
    """Map predicted segment id -> ground-truth id across all annotated frames.

    A one-to-one Hungarian assignment maximizes summed IoU; each remaining
    segment then joins the ground-truth mask it overlaps most if that raises
    the mask's summed IoU.
    """
    frames = sorted(gt_masks)
    g_ids = sorted({i for f in frames for i in _ids(gt_masks[f])})
    p_ids = sorted({j for f in frames for j in _ids(pred_masks[f])})
    if not g_ids or not p_ids:
        return {}
    score = np.zeros((len(p_ids), len(g_ids)))
    for f in frames:
        g, p = gt_masks[f], pred_masks[f]
        for a, j in enumerate(p_ids):
            pm = p == j
            if not pm.any():
                continue
            for b, i in enumerate(g_ids):
                gm = g == i
                union = np.logical_or(pm, gm).sum()
                if union:
                    score[a, b] += np.logical_and(pm, gm).sum() / union
    rows, cols = linear_sum_assignment(-score)
    mapping = {p_ids[r]: g_ids[c] for r, c in zip(rows, cols) if score[r, c] > 0}

    def total_iou(gid, segs):
        val = 0.0
        for f in frames:
            gm = gt_masks[f] == gid
            if not gm.any():
                continue
            pm = np.isin(pred_masks[f], list(segs)) if segs else np.zeros_like(gm)
            val += np.logical_and(pm, gm).sum() / np.logical_or(pm, gm).sum()
        return val

    for j in p_ids:
        if j in mapping:
            continue
        overlaps = [(sum(np.logical_and(pred_masks[f] == j, gt_masks[f] == i).sum() for f in frames), i)
                    for i in g_ids]
        best, gid = max(overlaps, key=lambda t: (t[0], -t[1]))
        if best == 0:
            continue
        current = [s for s, g in mapping.items() if g == gid]
        if total_iou(gid, current + [j]) > total_iou(gid, current):
            mapping[j] = gid
    return mapping


def _mapped(pred: np.ndarray, mapping: Mapping[int, int]) -> np.ndarray:
    out = np.zeros_like(pred)
    for j, i in mapping.items():
        out[pred == j] = i
    return out


def identity_iou(gt_masks: Mapping[int, np.ndarray], pred_masks: Mapping[int, np.ndarray]) -> float:
    """Mean over (target, annotated frame) of IoU(gt mask, union of segments assigned to it)."""
    if not gt_masks:
        raise ValueError("no annotated frames")
    mapping = assign_segments(gt_masks, pred_masks)
    vals = []
    for f in sorted(gt_masks):
        g = gt_masks[f]
        m = _mapped(pred_masks[f], mapping)
        for i in _ids(g):
            gm, pm = g == i, m == i
            vals.append(np.logical_and(gm, pm).sum() / np.logical_or(gm, pm).sum())
    return float(np.mean(vals)) if vals else 0.0


def error_metrics(gt_masks: Mapping[int, np.ndarray], pred_masks: Mapping[int, np.ndarray]):
    """(overall error %, average per-mask error %, mean segments per ground-truth mask)."""
    mapping = assign_segments(gt_masks, pred_masks)
    wrong = total = 0
    per_mask, counts = [], []
    for f in sorted(gt_masks):
        g, p = gt_masks[f], pred_masks[f]
        m = _mapped(p, mapping)
        wrong += int((m != g).sum())
        total += g.size
        for i in _ids(g):
            gm = g == i
            per_mask.append(100.0 * (m[gm] != i).sum() / gm.sum())
            counts.append(sum(1 for j, gid in mapping.items() if gid == i and (p == j).any()))
    overall = 100.0 * wrong / total if total else 0.0
    avg = float(np.mean(per_mask)) if per_mask else 0.0
    over = float(np.mean(counts)) if counts else 0.0
    return overall, avg, over


def seg_report(gt_masks, pred_masks) -> SegReport:
    overall, avg, over = error_metrics(gt_masks, pred_masks)
    return SegReport(identity_iou(gt_masks, pred_masks), overall, avg, over)
