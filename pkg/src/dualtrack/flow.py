"""Dense optical flow by exhaustive block matching, plus the binary flow file format."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .scene import Frame


def _candidate_shifts(search: int) -> list[tuple[int, int]]:
    shifts = [(u, v) for v in range(-search, search + 1) for u in range(-search, search + 1)]
    # tie rule: smallest magnitude first, then lexicographic (u, v)
    return sorted(shifts, key=lambda s: (s[0] ** 2 + s[1] ** 2, s[0], s[1]))


def block_matching_flow(frame_t: Frame, frame_t1: Frame, block: int = 8, search: int = 8) -> np.ndarray:
    """Per-block integer displacement minimizing the LAB sum of absolute differences.

    Returns a (H, W, 2) float array of (u, v); every pixel takes its block's vector.
    Displacements that would read outside frame_t1 are not considered.
    """
    if frame_t.rgb.shape != frame_t1.rgb.shape:
        raise ValueError("frames must have equal dimensions")
    H, W = frame_t.height, frame_t.width
    a = np.asarray(frame_t.lab)
    bh, bw = min(block, H), min(block, W)
    padded = np.full((H + 2 * search, W + 2 * search, 3), np.nan)
    padded[search:search + H, search:search + W] = frame_t1.lab
    rows, cols = np.arange(0, H, bh), np.arange(0, W, bw)
    best = np.full((len(rows), len(cols)), np.inf)
    best_uv = np.zeros((len(rows), len(cols), 2))
    for u, v in _candidate_shifts(search):
        shifted = padded[search + v:search + v + H, search + u:search + u + W]
        d = np.abs(shifted - a).sum(axis=2)
        sad = np.add.reduceat(np.add.reduceat(d, rows, axis=0), cols, axis=1)
        sad = np.where(np.isnan(sad), np.inf, sad)
        better = sad < best - 1e-9
        best[better] = sad[better]
        best_uv[better] = (u, v)
    by = np.minimum(np.arange(H) // bh, len(rows) - 1)
    bx = np.minimum(np.arange(W) // bw, len(cols) - 1)
    return best_uv[by[:, None], bx[None, :]].copy()


def mean_flow(pixels: np.ndarray, flow: np.ndarray) -> tuple[float, float]:
    """Mean (u, v) over ``pixels`` given as (m, 2) rows of (y, x)."""
    pixels = np.asarray(pixels)
    if len(pixels) == 0:
        raise ValueError("empty superpixel")
    vals = flow[pixels[:, 0], pixels[:, 1]]
    return float(vals[:, 0].mean()), float(vals[:, 1].mean())


def write_flow(path, flow: np.ndarray) -> None:
    """[width:u32-le][height:u32-le] then row-major (u, v) float32-le pairs."""
    H, W = flow.shape[:2]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", W, H))
        fh.write(np.ascontiguousarray(flow, dtype="<f4").tobytes())


def read_flow(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise ValueError(f"{path}: truncated flow header")
    W, H = struct.unpack_from("<II", data)
    if len(data) != 8 + W * H * 8:
        raise ValueError(f"{path}: expected {W}x{H} flow payload")
    flow = np.frombuffer(data, dtype="<f4", offset=8).reshape(H, W, 2).astype(np.float64)
    if not np.all(np.isfinite(flow)):
        raise ValueError(f"{path}: non-finite flow values")
    return flow


def flow_filename(t: int) -> str:
    """File holding the flow from frame t to frame t+1."""
    return f"flow_{t:06d}.bin"
