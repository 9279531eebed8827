"""GrabCut-style foreground extraction inside a target's initial box."""

from __future__ import annotations

import numpy as np

from ..scene import BBox, Frame, PixelMask
from .gmm import fit_gmm
from .maxflow import maxflow

SMOOTHNESS = 50.0


class DegenerateBoxError(ValueError):
    pass


def _grid_edges(h: int, w: int):
    idx = np.arange(h * w).reshape(h, w)
    right = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    down = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    return np.concatenate([right, down])


def grabcut_init(frame: Frame, box: BBox, margin=None, label: int = 1, iters: int = 5,
                 K: int = 5, seed: int = 0) -> PixelMask:
    """Foreground mask of ``box`` refined by alternating GMM fits and binary graph cuts.

    Pixels of the surrounding region outside the box are fixed background; the
    result never leaves the box. ``margin`` defaults to half the box size per axis.
    """
    H, W = frame.height, frame.width
    bx0, by0, bx1, by1 = box.pixel_bounds(W, H)
    if bx1 <= bx0 or by1 <= by0:
        raise DegenerateBoxError(f"box {box} is empty after clipping to the frame")
    mx, my = (0.5 * box.w, 0.5 * box.h) if margin is None else (float(margin), float(margin))
    rx0, ry0 = max(0, int(np.floor(bx0 - mx))), max(0, int(np.floor(by0 - my)))
    rx1, ry1 = min(W, int(np.ceil(bx1 + mx))), min(H, int(np.ceil(by1 + my)))
    lab = np.asarray(frame.lab[ry0:ry1, rx0:rx1]).reshape(-1, 3)
    h, w = ry1 - ry0, rx1 - rx0
    inbox = np.zeros((h, w), dtype=bool)
    inbox[by0 - ry0:by1 - ry0, bx0 - rx0:bx1 - rx0] = True
    inbox = inbox.ravel()

    edges = _grid_edges(h, w)
    diff2 = np.sum((lab[edges[:, 0]] - lab[edges[:, 1]]) ** 2, axis=1)
    mean = diff2.mean() if len(diff2) else 0.0
    beta = 1.0 / (2.0 * mean) if mean > 0 else 0.0
    pw = SMOOTHNESS * np.exp(-beta * diff2)

    # edges touching fixed background become unary pulls toward background
    free = np.flatnonzero(inbox)
    local = -np.ones(h * w, dtype=np.int64)
    local[free] = np.arange(len(free))
    both = inbox[edges[:, 0]] & inbox[edges[:, 1]]
    one = inbox[edges[:, 0]] ^ inbox[edges[:, 1]]
    boundary_pull = np.zeros(len(free))
    inner = np.where(inbox[edges[one, 0]], edges[one, 0], edges[one, 1])
    np.add.at(boundary_pull, local[inner], pw[one])
    fe = local[edges[both]]
    fw = pw[both]

    fg = inbox.copy()
    for _ in range(iters):
        bg_pix = lab[~fg]
        fg_pix = lab[fg]
        if len(fg_pix) == 0 or len(bg_pix) == 0:
            break
        fg_gmm = fit_gmm(fg_pix, K, seed=seed)
        bg_gmm = fit_gmm(bg_pix, K, seed=seed)
        cost_fg = -fg_gmm.log_density(lab[free])
        cost_bg = -bg_gmm.log_density(lab[free])
        cost_fg = cost_fg + boundary_pull
        shift = np.minimum(cost_fg, cost_bg)
        # x=1 (sink side) is foreground: pay cost_fg on the source edge, cost_bg on the sink edge
        _, source_side = maxflow(cost_fg - shift, cost_bg - shift, fe, fw, fw)
        new_fg = np.zeros(h * w, dtype=bool)
        new_fg[free[~source_side]] = True
        if np.array_equal(new_fg, fg):
            break
        fg = new_fg

    if not fg.any():
        fg = inbox
    labels = np.zeros((H, W), dtype=np.int32)
    labels[ry0:ry1, rx0:rx1] = np.where(fg.reshape(h, w), label, 0)
    return PixelMask(labels)
