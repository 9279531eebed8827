"""Box features: HOG on a canonical patch, LAB color histograms, and their concatenation.

Every box is resampled onto a fixed patch grid (nearest sample, half-up rounding)
so feature length never depends on box size. Batched variants take a sequence of
boxes on one frame and return stacked arrays; the single-box functions wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .scene import BBox, Frame


class EmptyRegionError(ValueError):
    """Raised when a box has no pixels inside the frame."""


@dataclass(frozen=True)
class FeatureConfig:
    patch_w: int = 32
    patch_h: int = 64
    cell: int = 8
    n_orient: int = 9
    block: int = 2
    clip: float = 0.2
    color_bins: int = 8

    @property
    def hog_len(self) -> int:
        bx = self.patch_w // self.cell - self.block + 1
        by = self.patch_h // self.cell - self.block + 1
        return bx * by * self.block * self.block * self.n_orient

    @property
    def hist_len(self) -> int:
        return self.color_bins ** 3

    @property
    def length(self) -> int:
        return self.hog_len + self.hist_len


DEFAULT_FEATURES = FeatureConfig()


@dataclass(frozen=True)
class ColorHistogram:
    bins: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.bins.sum())


def _sample_grid(frame: Frame, boxes: Sequence[BBox], cfg: FeatureConfig):
    """Row/col sample indices (B, ph, pw) and in-frame validity for each box."""
    geo = np.array([[b.x, b.y, b.w, b.h] for b in boxes], dtype=np.float64).reshape(-1, 4)
    jj = (np.arange(cfg.patch_w) + 0.5) / cfg.patch_w
    ii = (np.arange(cfg.patch_h) + 0.5) / cfg.patch_h
    cols = np.floor(geo[:, 0:1] + jj[None, :] * geo[:, 2:3]).astype(np.int64)
    rows = np.floor(geo[:, 1:2] + ii[None, :] * geo[:, 3:4]).astype(np.int64)
    vc = (cols >= 0) & (cols < frame.width)
    vr = (rows >= 0) & (rows < frame.height)
    valid = vr[:, :, None] & vc[:, None, :]
    rows_c = np.clip(rows, 0, frame.height - 1)
    cols_c = np.clip(cols, 0, frame.width - 1)
    return rows_c, cols_c, valid


def has_samples(frame: Frame, boxes: Sequence[BBox], cfg: FeatureConfig = DEFAULT_FEATURES) -> np.ndarray:
    """Per box: does any patch sample fall inside the frame."""
    if not len(boxes):
        return np.zeros(0, dtype=bool)
    return _sample_grid(frame, boxes, cfg)[2].any(axis=(1, 2))


def sample_patches(frame: Frame, boxes: Sequence[BBox], cfg: FeatureConfig = DEFAULT_FEATURES):
    """LAB patches (B, ph, pw, 3) with edge replication, plus the validity mask."""
    rows, cols, valid = _sample_grid(frame, boxes, cfg)
    patches = frame.lab[rows[:, :, None], cols[:, None, :]]
    return patches, valid


def hog_cells(lum: np.ndarray, cfg: FeatureConfig = DEFAULT_FEATURES) -> np.ndarray:
    """Magnitude-weighted unsigned orientation histograms per cell.

    ``lum`` has shape (B, ph, pw); result is (B, ph//cell, pw//cell, n_orient).
    """
    lum = np.asarray(lum, dtype=np.float64)
    gx = np.zeros_like(lum)
    gy = np.zeros_like(lum)
    gx[:, :, 1:-1] = lum[:, :, 2:] - lum[:, :, :-2]
    gy[:, 1:-1, :] = lum[:, 2:, :] - lum[:, :-2, :]
    mag = np.sqrt(gx * gx + gy * gy)
    # orientation in [0, 1) of a half turn; the nudge keeps exact bin edges from rounding down
    turn = np.arctan2(gy, gx) * (1.0 / np.pi)
    turn = turn + (turn < 0)
    bins = (turn * cfg.n_orient + 1e-9).astype(np.int64) % cfg.n_orient
    B, H, W = lum.shape
    ncy, ncx = H // cfg.cell, W // cfg.cell
    cy = (np.arange(H) // cfg.cell)[None, :, None]
    cx = (np.arange(W) // cfg.cell)[None, None, :]
    flat = ((np.arange(B)[:, None, None] * ncy + cy) * ncx + cx) * cfg.n_orient + bins
    hist = np.bincount(flat.ravel(), weights=mag.ravel(), minlength=B * ncy * ncx * cfg.n_orient)
    return hist.reshape(B, ncy, ncx, cfg.n_orient)


def _block_normalize(cells: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    B, ncy, ncx, _ = cells.shape
    k = cfg.block
    blocks = []
    for by in range(ncy - k + 1):
        for bx in range(ncx - k + 1):
            blocks.append(cells[:, by:by + k, bx:bx + k, :].reshape(B, -1))
    v = np.stack(blocks, axis=1)
    eps = 1e-5
    v = v / np.sqrt((v ** 2).sum(axis=2, keepdims=True) + eps ** 2)
    v = np.minimum(v, cfg.clip)
    v = v / np.sqrt((v ** 2).sum(axis=2, keepdims=True) + eps ** 2)
    return v.reshape(B, -1)


def hog_batch(frame: Frame, boxes: Sequence[BBox], cfg: FeatureConfig = DEFAULT_FEATURES) -> np.ndarray:
    return _hog_from_patches(*sample_patches(frame, boxes, cfg), cfg)


def _hog_from_patches(patches, valid, cfg: FeatureConfig) -> np.ndarray:
    out = _block_normalize(hog_cells(patches[..., 0], cfg), cfg)
    out[~valid.any(axis=(1, 2))] = 0.0
    return out


def color_hist_batch(frame: Frame, boxes: Sequence[BBox], cfg: FeatureConfig = DEFAULT_FEATURES) -> np.ndarray:
    """Unit-mass joint LAB histograms, one row per box."""
    return _hist_from_patches(*sample_patches(frame, boxes, cfg), cfg, boxes)


def _hist_from_patches(patches, valid, cfg: FeatureConfig, boxes) -> np.ndarray:
    n = cfg.color_bins
    L = np.clip((patches[..., 0] / 100.0 * n).astype(np.int64), 0, n - 1)
    a = np.clip(((patches[..., 1] + 128.0) / 256.0 * n).astype(np.int64), 0, n - 1)
    b = np.clip(((patches[..., 2] + 128.0) / 256.0 * n).astype(np.int64), 0, n - 1)
    idx = (L * n + a) * n + b
    B = len(idx)
    flat = idx + (np.arange(B) * n ** 3)[:, None, None]
    hist = np.bincount(flat.ravel(), weights=valid.ravel().astype(np.float64), minlength=B * n ** 3)
    hist = hist.reshape(B, n ** 3)
    mass = hist.sum(axis=1, keepdims=True)
    if np.any(mass == 0):
        bad = int(np.flatnonzero(mass[:, 0] == 0)[0])
        raise EmptyRegionError(f"empty-region: box {boxes[bad]} does not intersect the frame")
    return hist / mass


def _l2(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.divide(v, norm, out=np.zeros_like(v), where=norm > 0)


def joint_feature_batch(
    frame: Frame, boxes: Sequence[BBox], cfg: FeatureConfig = DEFAULT_FEATURES, chunk: int = 256
) -> np.ndarray:
    """phi(x, y) for every box: [HOG ; color histogram], each section unit L2 norm."""
    out = np.empty((len(boxes), cfg.length))
    for s in range(0, len(boxes), chunk):
        part = boxes[s:s + chunk]
        patches, valid = sample_patches(frame, part, cfg)
        hist = _hist_from_patches(patches, valid, cfg, part)
        hog = _hog_from_patches(patches, valid, cfg)
        out[s:s + chunk, :cfg.hog_len] = _l2(hog)
        out[s:s + chunk, cfg.hog_len:] = _l2(hist)
    return out


def extract_hog(frame: Frame, box: BBox, cfg: FeatureConfig = DEFAULT_FEATURES) -> np.ndarray:
    return hog_batch(frame, [box], cfg)[0]


def extract_color_hist(frame: Frame, box: BBox, cfg: FeatureConfig = DEFAULT_FEATURES) -> ColorHistogram:
    return ColorHistogram(color_hist_batch(frame, [box], cfg)[0])


def joint_feature(frame: Frame, box: BBox, cfg: FeatureConfig = DEFAULT_FEATURES) -> np.ndarray:
    return joint_feature_batch(frame, [box], cfg)[0]


def hist_intersection(h1, h2) -> float:
    a = h1.bins if isinstance(h1, ColorHistogram) else np.asarray(h1, dtype=np.float64)
    b = h2.bins if isinstance(h2, ColorHistogram) else np.asarray(h2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"histogram layouts differ: {a.shape} vs {b.shape}")
    return float(np.minimum(a, b).sum())


def hist_intersection_matrix(ha: np.ndarray, hb: np.ndarray) -> np.ndarray:
    """Pairwise intersections between unit-mass rows of ``ha`` (M, K) and ``hb`` (N, K).

    Uses sum(min(a, b)) = 1 - |a - b|_1 / 2, valid when both have unit mass.
    """
    return 1.0 - 0.5 * cdist(ha, hb, metric="cityblock")
