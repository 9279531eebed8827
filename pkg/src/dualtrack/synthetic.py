"""Deterministic synthetic scenes with exact ground truth (tracks, masks, background, flow)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from . import io
from .flow import flow_filename, write_flow
from .scene import BBox, PixelMask, Track


@dataclass(frozen=True)
class SyntheticTarget:
    target_id: int
    size: tuple[float, float]                         # (w, h)
    waypoints: tuple[tuple[float, float, float], ...]  # (frame, cx, cy), linearly interpolated
    colors: tuple[tuple[int, int, int], ...] = ((200, 40, 40),)   # horizontal bands, top to bottom
    shape: str = "rect"                                # "rect" or "ellipse"
    depth: int = 0                                     # larger is drawn in front
    noise: float = 6.0

    def center(self, t: int) -> tuple[float, float]:
        fs = [w[0] for w in self.waypoints]
        return (float(np.interp(t, fs, [w[1] for w in self.waypoints])),
                float(np.interp(t, fs, [w[2] for w in self.waypoints])))

    def box(self, t: int) -> BBox:
        cx, cy = self.center(t)
        w, h = self.size
        return BBox(cx - w / 2, cy - h / 2, w, h, frame=t)


@dataclass(frozen=True)
class SyntheticScene:
    width: int = 160
    height: int = 120
    n_frames: int = 11
    targets: tuple[SyntheticTarget, ...] = ()
    bg_color: tuple[int, int, int] = (110, 130, 110)
    bg_texture: float = 25.0          # amplitude of the static smooth texture
    bg_cell: int = 8                  # texture correlation length in pixels
    noise: float = 4.0                # per-frame sensor noise
    props: tuple[tuple, ...] = ()     # static background rectangles (x, y, w, h, (r, g, b), ...bands)
    occluders: tuple[tuple, ...] = () # static rectangles drawn in front of every target, same layout


@dataclass
class SyntheticData:
    frames: list[np.ndarray]                   # RGB uint8
    tracks: dict[int, Track]
    masks: dict[int, PixelMask]
    background: np.ndarray
    flows: list[np.ndarray]                    # flows[t]: frame t -> t+1

    def init_boxes(self) -> dict[int, BBox]:
        return {tid: tr.boxes[min(tr.boxes)] for tid, tr in self.tracks.items()}


def _shape_mask(target: SyntheticTarget, t: int, H: int, W: int) -> np.ndarray:
    box = target.box(t)
    ys, xs = np.indices((H, W)) + 0.5
    rx = (xs - box.x) / box.w
    ry = (ys - box.y) / box.h
    if target.shape == "ellipse":
        return (rx - 0.5) ** 2 + (ry - 0.5) ** 2 <= 0.25
    if target.shape != "rect":
        raise ValueError(f"unknown shape {target.shape!r}")
    return (rx >= 0) & (rx < 1) & (ry >= 0) & (ry < 1)


def _band_colors(target: SyntheticTarget, t: int, H: int) -> np.ndarray:
    """(H, 3) color of each image row for this target at frame t."""
    box = target.box(t)
    ry = (np.arange(H) + 0.5 - box.y) / box.h
    band = np.clip((ry * len(target.colors)).astype(int), 0, len(target.colors) - 1)
    return np.asarray(target.colors, dtype=np.float64)[band]


def _paint(img: np.ndarray, rects, mask: Optional[np.ndarray] = None) -> None:
    """Fill (x, y, w, h, band colors...) rectangles, bands stacked top to bottom."""
    H, W = img.shape[:2]
    for x, y, w, h, *bands in rects:
        x0, y0, x1, y1 = max(0, round(x)), max(0, round(y)), min(W, round(x + w)), min(H, round(y + h))
        for band, rr in zip(bands, np.array_split(np.arange(y0, y1), len(bands))):
            if len(rr) and x1 > x0:
                img[rr[0]:rr[-1] + 1, x0:x1] = band
                if mask is not None:
                    mask[rr[0]:rr[-1] + 1, x0:x1] = True


def generate_synthetic(scene: SyntheticScene, seed: int = 0, out_dir=None) -> SyntheticData:
    """Render the scene with painter's-algorithm occlusion (ascending depth)."""
    rng = np.random.default_rng(seed)
    H, W = scene.height, scene.width
    coarse = rng.normal(0.0, 1.0, (H // scene.bg_cell + 2, W // scene.bg_cell + 2, 3))
    tex = ndimage.zoom(coarse, (scene.bg_cell, scene.bg_cell, 1), order=1)[:H, :W]
    background = np.asarray(scene.bg_color, float) + scene.bg_texture * tex
    _paint(background, scene.props)
    front = np.zeros((H, W), dtype=bool)
    front_img = np.zeros((H, W, 3))
    _paint(front_img, scene.occluders, front)
    background = np.clip(np.where(front[..., None], front_img, background), 0, 255)

    order = sorted(scene.targets, key=lambda tg: (tg.depth, tg.target_id))
    frames, masks, label_imgs = [], {}, []
    for t in range(scene.n_frames):
        img = background + rng.normal(0.0, scene.noise, (H, W, 3))
        labels = np.zeros((H, W), dtype=np.int32)
        for tg in order:
            m = _shape_mask(tg, t, H, W)
            col = _band_colors(tg, t, H)[:, None, :] + rng.normal(0.0, tg.noise, (H, W, 3))
            m &= ~front
            img[m] = col[m]
            labels[m] = tg.target_id
        frames.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
        masks[t] = PixelMask(labels)
        label_imgs.append(labels)

    flows = []
    for t in range(scene.n_frames - 1):
        fl = np.zeros((H, W, 2))
        for tg in scene.targets:
            (x0, y0), (x1, y1) = tg.center(t), tg.center(t + 1)
            sel = label_imgs[t] == tg.target_id
            fl[sel] = (x1 - x0, y1 - y0)
        flows.append(fl)

    tracks = {tg.target_id: Track(tg.target_id, {t: tg.box(t) for t in range(scene.n_frames)})
              for tg in scene.targets}
    data = SyntheticData(frames, tracks, masks, np.rint(background).astype(np.uint8), flows)
    if out_dir is not None:
        write_synthetic(data, out_dir)
    return data


def write_synthetic(data: SyntheticData, out_dir) -> None:
    """Layout: seq/, gt_tracks.csv, init.csv, gt_masks/, background.ppm, flow/."""
    out = Path(out_dir)
    (out / "seq").mkdir(parents=True, exist_ok=True)
    (out / "flow").mkdir(exist_ok=True)
    for t, rgb in enumerate(data.frames):
        io.write_ppm(out / "seq" / io.frame_filename(t), rgb)
    for t, fl in enumerate(data.flows):
        write_flow(out / "flow" / flow_filename(t), fl)
    io.write_tracks(out / "gt_tracks.csv", data.tracks)
    io.write_init(out / "init.csv", data.init_boxes())
    io.write_masks(out / "gt_masks", data.masks)
    io.write_ppm(out / "background.ppm", data.background)


# --- presets -----------------------------------------------------------------------

def single_scene(n_frames: int = 11) -> SyntheticScene:
    """One red target drifting right over a green textured background."""
    tg = SyntheticTarget(1, (20, 36), ((0, 50, 60), (n_frames - 1, 90, 64)), ((200, 40, 40),))
    return SyntheticScene(n_frames=n_frames, targets=(tg,))


def crossing_scene(n_frames: int = 11) -> SyntheticScene:
    """Two distinctly colored targets that swap sides, the red one passing in front."""
    last = n_frames - 1
    a = SyntheticTarget(1, (20, 36), ((0, 65, 60), (last, 95, 60)), ((210, 50, 40),), depth=1)
    b = SyntheticTarget(2, (20, 36), ((0, 95, 62), (last, 65, 62)), ((40, 70, 200),), depth=0)
    return SyntheticScene(n_frames=n_frames, targets=(a, b))


def adversarial_scene(n_frames: int = 21) -> SyntheticScene:
    """A two-band target passes behind a pillar next to a static look-alike.

    A second target shares its lower band color and walks down the right edge.
    """
    last = n_frames - 1
    walker = SyntheticTarget(1, (20, 36), ((0, 40, 60), (last, 120, 60)),
                             ((200, 60, 40), (60, 70, 190)), depth=1)
    edge = SyntheticTarget(2, (20, 36), ((0, 140, 30), (last, 140, 90)), ((60, 70, 190),), depth=0)
    lure = (96, 42, 20, 36, (190, 75, 25), (45, 55, 205))
    pillar = (62, 20, 26, 80, (150, 150, 150))
    return SyntheticScene(n_frames=n_frames, targets=(walker, edge), props=(lure,), occluders=(pillar,))


PRESETS = {"single": single_scene, "crossing": crossing_scene, "adversarial": adversarial_scene}
