"""SLIC superpixels over (LAB, xy) with 4-connectivity enforcement."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage
from skimage.measure import label as cc_label

from ..scene import Frame


@dataclass
class SuperpixelMap:
    """Per-pixel superpixel ids (0..n-1) plus per-superpixel statistics."""

    assignment: np.ndarray
    sizes: np.ndarray
    centroids: np.ndarray     # (n, 2) as (x, y)
    mean_lab: np.ndarray      # (n, 3)
    mean_flow: Optional[np.ndarray] = None   # (n, 2) once a flow field is attached

    @property
    def n(self) -> int:
        return len(self.sizes)

    def pixels(self, k: int) -> np.ndarray:
        """(m, 2) array of (y, x) pixel coordinates of superpixel k."""
        return np.argwhere(self.assignment == k)

    @classmethod
    def from_assignment(cls, assignment: np.ndarray, lab: np.ndarray) -> "SuperpixelMap":
        assignment = np.asarray(assignment, dtype=np.int64)
        n = int(assignment.max()) + 1
        flat = assignment.ravel()
        sizes = np.bincount(flat, minlength=n).astype(np.float64)
        ys, xs = np.indices(assignment.shape)
        cx = np.bincount(flat, weights=xs.ravel() + 0.5, minlength=n) / sizes
        cy = np.bincount(flat, weights=ys.ravel() + 0.5, minlength=n) / sizes
        mean_lab = np.stack([np.bincount(flat, weights=lab[..., c].ravel(), minlength=n) / sizes
                             for c in range(3)], axis=1)
        return cls(assignment, sizes.astype(np.int64), np.stack([cx, cy], axis=1), mean_lab)

    def with_flow(self, flow: np.ndarray) -> "SuperpixelMap":
        """Attach mean (u, v) per superpixel from a (H, W, 2) flow field."""
        flat = self.assignment.ravel()
        mean = np.stack([np.bincount(flat, weights=flow[..., c].ravel(), minlength=self.n) / self.sizes
                         for c in range(2)], axis=1)
        return SuperpixelMap(self.assignment, self.sizes, self.centroids, self.mean_lab, mean)


def _grid_centers(h: int, w: int, n_sp: int) -> np.ndarray:
    nx = max(1, int(round(np.sqrt(n_sp * w / h))))
    ny = max(1, int(round(n_sp / nx)))
    nx, ny = min(nx, w), min(ny, h)
    ys = (np.arange(ny) + 0.5) * h / ny
    xs = (np.arange(nx) + 0.5) * w / nx
    return np.array([(y, x) for y in ys for x in xs])


def _perturb(centers: np.ndarray, lab: np.ndarray) -> np.ndarray:
    """Move each seed to the lowest-gradient pixel of its 3x3 neighborhood."""
    h, w = lab.shape[:2]
    grad = np.zeros((h, w))
    grad[1:-1, 1:-1] = (np.sum((lab[1:-1, 2:] - lab[1:-1, :-2]) ** 2, axis=2)
                        + np.sum((lab[2:, 1:-1] - lab[:-2, 1:-1]) ** 2, axis=2))
    out = []
    for cy, cx in centers:
        iy, ix = int(cy), int(cx)
        best = (grad[iy, ix], iy, ix)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                y, x = iy + dy, ix + dx
                if 0 <= y < h and 0 <= x < w and grad[y, x] < best[0]:
                    best = (grad[y, x], y, x)
        out.append((best[1] + 0.5, best[2] + 0.5))
    return np.array(out)


def _enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    """Keep the largest 4-connected piece of every label; merge the rest into neighbours."""
    comp = cc_label(labels, background=-1, connectivity=1) - 1
    n_comp = int(comp.max()) + 1
    sizes = np.bincount(comp.ravel(), minlength=n_comp)
    owner = np.zeros(n_comp, dtype=np.int64)
    owner[comp.ravel()] = labels.ravel()
    # largest component of each label survives (first in raster order on ties)
    keep = np.zeros(n_comp, dtype=bool)
    best: dict[int, int] = {}
    for c in range(n_comp):
        lab = int(owner[c])
        if lab not in best or sizes[c] > sizes[best[lab]]:
            best[lab] = c
    keep[list(best.values())] = True
    if keep.all():
        return labels

    pairs = np.concatenate([
        np.stack([comp[:, :-1].ravel(), comp[:, 1:].ravel()], axis=1),
        np.stack([comp[:-1, :].ravel(), comp[1:, :].ravel()], axis=1),
    ])
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs = np.unique(np.sort(pairs, axis=1), axis=0)
    neighbours: dict[int, set] = {c: set() for c in range(n_comp)}
    for a, b in pairs:
        neighbours[int(a)].add(int(b))
        neighbours[int(b)].add(int(a))

    root = np.arange(n_comp)

    def find(c):
        while root[c] != c:
            root[c] = root[root[c]]
            c = root[c]
        return c

    group_size = sizes.astype(np.int64).copy()
    pending = sorted(np.flatnonzero(~keep).tolist(), key=lambda c: (sizes[c], c))
    while pending:
        remaining = []
        for c in pending:
            targets = {find(nb) for nb in neighbours[c] if keep[find(nb)] and find(nb) != find(c)}
            if not targets:
                remaining.append(c)
                continue
            tgt = max(targets, key=lambda r: (group_size[r], -r))
            root[find(c)] = tgt
            group_size[tgt] += group_size[c]
        if len(remaining) == len(pending):
            # isolated orphan groups: promote the first one to a kept superpixel
            keep[find(remaining[0])] = True
            remaining = remaining[1:]
        pending = remaining
    merged = np.array([find(c) for c in range(n_comp)])
    out = owner[merged][comp]
    return out


def _relabel(labels: np.ndarray) -> np.ndarray:
    _, first = np.unique(labels.ravel(), return_index=True)
    order = np.argsort(first)
    uniq = labels.ravel()[first[order]]
    lut = np.zeros(int(labels.max()) + 1, dtype=np.int64)
    lut[uniq] = np.arange(len(uniq))
    return lut[labels]


def slic_labels(lab: np.ndarray, n_sp: int, compactness: float = 10.0, max_iter: int = 10) -> np.ndarray:
    h, w = lab.shape[:2]
    if not 1 <= n_sp <= h * w:
        raise ValueError(f"n_sp must lie in [1, {h * w}]")
    S = np.sqrt(h * w / n_sp)
    centers_xy = _perturb(_grid_centers(h, w, n_sp), lab) if n_sp > 1 else _grid_centers(h, w, 1)
    k = len(centers_xy)
    c_lab = np.array([lab[int(cy), int(cx)] for cy, cx in centers_xy])
    c_y, c_x = centers_xy[:, 0].copy(), centers_xy[:, 1].copy()
    ys, xs = np.indices((h, w))
    ys = ys + 0.5
    xs = xs + 0.5
    ratio = compactness / S
    win = int(np.ceil(S))
    labels = -np.ones((h, w), dtype=np.int64)
    for _ in range(max_iter):
        dist = np.full((h, w), np.inf)
        labels = -np.ones((h, w), dtype=np.int64)
        for i in range(k):
            y0, y1 = max(0, int(c_y[i]) - win), min(h, int(c_y[i]) + win + 1)
            x0, x1 = max(0, int(c_x[i]) - win), min(w, int(c_x[i]) + win + 1)
            patch = lab[y0:y1, x0:x1]
            d_lab = np.sqrt(np.sum((patch - c_lab[i]) ** 2, axis=2))
            d_xy = np.hypot(ys[y0:y1, x0:x1] - c_y[i], xs[y0:y1, x0:x1] - c_x[i])
            d = d_lab + ratio * d_xy
            sub = dist[y0:y1, x0:x1]
            better = d < sub
            sub[better] = d[better]
            labels[y0:y1, x0:x1][better] = i
        if (labels < 0).any():
            _, (iy, ix) = ndimage.distance_transform_edt(labels < 0, return_indices=True)
            labels = labels[iy, ix]
        flat = labels.ravel()
        cnt = np.bincount(flat, minlength=k).astype(np.float64)
        ok = cnt > 0
        for c in range(3):
            s = np.bincount(flat, weights=lab[..., c].ravel(), minlength=k)
            c_lab[ok, c] = s[ok] / cnt[ok]
        c_y[ok] = np.bincount(flat, weights=ys.ravel(), minlength=k)[ok] / cnt[ok]
        c_x[ok] = np.bincount(flat, weights=xs.ravel(), minlength=k)[ok] / cnt[ok]
    return _relabel(_enforce_connectivity(labels))


def slic(frame: Frame, n_sp: int, compactness: float = 10.0, max_iter: int = 10) -> SuperpixelMap:
    lab = np.asarray(frame.lab)
    return SuperpixelMap.from_assignment(slic_labels(lab, n_sp, compactness, max_iter), lab)
