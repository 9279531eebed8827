"""Per-target appearance models learned as a structured SVM.

Initial training solves the max-margin problem with a cutting-plane loop over
the box search space; during tracking the weights receive passive-aggressive
corrections.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .features import DEFAULT_FEATURES, FeatureConfig, joint_feature, joint_feature_batch
from .scene import SCALES, BBox, Frame, iou

log = logging.getLogger(__name__)


class UntrainableTargetError(ValueError):
    """The ground-truth box yields a degenerate (all-zero) feature vector."""


@dataclass(frozen=True)
class LearningConfig:
    C: float = 10.0
    C_pa: float = 0.1
    epsilon: float = 1e-3
    max_iters: int = 50
    radius_factor: float = 2.0
    stride: float = 2.0
    features: FeatureConfig = DEFAULT_FEATURES


@dataclass
class AppearanceModel:
    target_id: int
    w: np.ndarray
    C: float = 10.0
    support_constraints: list = field(default_factory=list)
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class SearchSpace:
    center: BBox
    radius: Optional[float] = None
    stride: float = 2.0
    scales: tuple = SCALES

    def boxes(self, width: Optional[int] = None, height: Optional[int] = None) -> list[BBox]:
        """Candidate boxes ordered by (scale, y, x); centers kept inside the frame when given."""
        radius = 2.0 * self.center.w if self.radius is None else self.radius
        steps = int(np.floor(radius / self.stride + 1e-9))
        offsets = [k * self.stride for k in range(-steps, steps + 1)]
        cx, cy = self.center.center
        out = []
        for s in sorted(self.scales):
            for dy in offsets:
                for dx in offsets:
                    x, y = cx + dx, cy + dy
                    if width is not None and not (0 <= x < width and 0 <= y < height):
                        continue
                    out.append(self.center.moved(x, y, s))
        if not out:
            out.append(self.center)
        return out


def structured_loss(gt: BBox, y: BBox) -> float:
    return 1.0 - iou(gt, y)


def _same_geometry(a: BBox, b: BBox) -> bool:
    return abs(a.x - b.x) < 1e-9 and abs(a.y - b.y) < 1e-9 and abs(a.w - b.w) < 1e-9 and abs(a.h - b.h) < 1e-9


def _excluding_gt(gt: BBox, boxes: list[BBox]) -> list[BBox]:
    return [b for b in boxes if not _same_geometry(b, gt)]


def most_violated_index(w: np.ndarray, feats: np.ndarray, losses: np.ndarray) -> int:
    """argmax of w.phi + loss; np.argmax keeps the first (lowest-order) maximizer."""
    return int(np.argmax(feats @ w + losses))


def most_violated(model: AppearanceModel, frame: Frame, gt: BBox, space: SearchSpace,
                  cfg: FeatureConfig = DEFAULT_FEATURES) -> BBox:
    boxes = _excluding_gt(gt, space.boxes(frame.width, frame.height))
    if not boxes:
        raise ValueError("search space contains no box other than the ground truth")
    feats = joint_feature_batch(frame, boxes, cfg)
    losses = np.array([structured_loss(gt, b) for b in boxes])
    return boxes[most_violated_index(model.w, feats, losses)]


def solve_working_set(D: np.ndarray, losses: np.ndarray, C: float,
                      alpha: Optional[np.ndarray] = None, tol: float = 1e-12,
                      max_sweeps: int = 5000) -> np.ndarray:
    """Dual coordinate ascent for min 1/2|w|^2 + C xi s.t. w.d_j >= loss_j - xi.

    Dual: max sum a_j loss_j - 1/2 |sum a_j d_j|^2 over a >= 0, sum a <= C.
    Single-coordinate steps move mass in and out of the budget; pairwise steps
    shuffle it once the budget is exhausted. Returns the dual variables.
    """
    m = len(losses)
    G = D @ D.T
    a = np.zeros(m) if alpha is None else np.concatenate([alpha, np.zeros(m - len(alpha))])
    for _ in range(max_sweeps):
        change = 0.0
        for j in range(m):
            grad = losses[j] - G[j] @ a
            if G[j, j] <= 0:
                continue
            room = C - (a.sum() - a[j])
            new = min(max(a[j] + grad / G[j, j], 0.0), room)
            change = max(change, abs(new - a[j]))
            a[j] = new
        if a.sum() >= C - 1e-12 and m > 1:
            grad = losses - G @ a
            for j in range(m):
                for k in range(m):
                    if j == k:
                        continue
                    curv = G[j, j] + G[k, k] - 2 * G[j, k]
                    if curv <= 1e-15:
                        continue
                    gj = losses[j] - G[j] @ a
                    gk = losses[k] - G[k] @ a
                    t = min(max((gj - gk) / curv, -a[j]), a[k])
                    if t != 0.0:
                        a[j] += t
                        a[k] -= t
                        change = max(change, abs(t))
        if change < tol:
            break
    return a


def primal_objective(w: np.ndarray, D: np.ndarray, losses: np.ndarray, C: float) -> float:
    xi = max(0.0, float(np.max(losses - D @ w))) if len(losses) else 0.0
    return 0.5 * float(w @ w) + C * xi


def cutting_plane(phi_gt: np.ndarray, feats: np.ndarray, losses: np.ndarray, C: float,
                  epsilon: float = 1e-3, max_iters: int = 50):
    """Cutting-plane training on precomputed features.

    ``feats`` rows are phi(x, y) for every y in the search space except the
    ground truth. Returns (w, working-set indices, per-iteration records) where
    each record holds the restricted objective and the full-space objective.
    """
    if not np.any(phi_gt):
        raise UntrainableTargetError("untrainable-target: ground-truth features are all zero")
    w = np.zeros_like(phi_gt)
    work: list[int] = []
    alpha = None
    records = []
    diffs = phi_gt[None, :] - feats
    for _ in range(max_iters):
        j = most_violated_index(w, feats, losses)
        xi = max(0.0, float(np.max(losses[work] - diffs[work] @ w))) if work else 0.0
        violation = losses[j] - diffs[j] @ w - xi
        if violation < epsilon:
            break
        if j not in work:
            work.append(j)
        D = diffs[work]
        alpha = solve_working_set(D, losses[work], C, alpha)
        w = alpha @ D
        records.append({
            "working_set": primal_objective(w, D, losses[work], C),
            "full": primal_objective(w, diffs, losses, C),
            "violation": float(violation),
        })
    return w, work, records


def train_initial(frame: Frame, gt: BBox, config: LearningConfig = LearningConfig(),
                  target_id: int = 1) -> AppearanceModel:
    space = SearchSpace(gt, radius=config.radius_factor * gt.w, stride=config.stride)
    boxes = _excluding_gt(gt, space.boxes(frame.width, frame.height))
    feats = joint_feature_batch(frame, boxes, config.features)
    losses = np.array([structured_loss(gt, b) for b in boxes])
    phi_gt = joint_feature(frame, gt, config.features)
    w, work, records = cutting_plane(phi_gt, feats, losses, config.C, config.epsilon, config.max_iters)
    log.debug("target %d trained: %d constraints, %d iterations", target_id, len(work), len(records))
    return AppearanceModel(
        target_id=target_id,
        w=w,
        C=config.C,
        support_constraints=[(boxes[j], float(losses[j])) for j in work],
        history=records,
    )


def score(model: AppearanceModel, frame: Frame, box: BBox, cfg: FeatureConfig = DEFAULT_FEATURES) -> float:
    return float(model.w @ joint_feature(frame, box, cfg))


def pa_update(model: AppearanceModel, frame: Frame, new_box: BBox, space: SearchSpace,
              C_pa: float = 0.1, cfg: FeatureConfig = DEFAULT_FEATURES) -> AppearanceModel:
    """One passive-aggressive step toward ranking ``new_box`` above its most violating rival."""
    rival = most_violated(model, frame, new_box, space, cfg)
    phi_new = joint_feature(frame, new_box, cfg)
    direction = phi_new - joint_feature(frame, rival, cfg)
    loss = max(0.0, structured_loss(new_box, rival) - float(model.w @ direction))
    sq = float(direction @ direction)
    if loss == 0.0 or sq == 0.0:
        return model
    tau = min(C_pa, loss / sq)
    return replace(model, w=model.w + tau * direction)


def save_model(model: AppearanceModel, path) -> None:
    """Binary layout: u32 target_id, f64 C, u32 length, then length f64 weights (little-endian)."""
    w = np.asarray(model.w, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<IdI", model.target_id, model.C, len(w)))
        fh.write(w.tobytes())


def load_model(path) -> AppearanceModel:
    data = Path(path).read_bytes()
    tid, C, n = struct.unpack_from("<IdI", data)
    off = struct.calcsize("<IdI")
    if len(data) != off + 8 * n:
        raise ValueError(f"{path}: truncated model file")
    w = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(np.float64)
    return AppearanceModel(target_id=tid, w=w, C=C)
