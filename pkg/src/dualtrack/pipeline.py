"""Segment-by-segment orchestration of the joint, track-only and seg-only modes."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import io
from .appearance import AppearanceModel, LearningConfig, SearchSpace, pa_update, train_initial
from .config import Config
from .coupler import SegModels, dual_loop, prepare_segment, seg_only, track_only, track_velocity
from .scene import BBox, Frame, PixelMask, Track, exit_check
from .segmentation.gmm import fit_gmm
from .segmentation.grabcut import grabcut_init

log = logging.getLogger(__name__)

MODES = ("joint", "track-only", "seg-only")


@dataclass
class PipelineResult:
    tracks: dict[int, Track] = field(default_factory=dict)
    masks: dict[int, PixelMask] = field(default_factory=dict)
    diagnostics: list[tuple] = field(default_factory=list)   # (segment, iter, disagreements, dual, primal)
    segments: list = field(default_factory=list)             # per-segment SegmentResult (joint mode)


def segment_bounds(n_frames: int, length: int) -> list[tuple[int, int]]:
    """Half-open frame ranges [1, 1+L), [1+L, 1+2L), ...; a 1-frame remainder joins the last one."""
    bounds = []
    s = 1
    while s < n_frames:
        e = min(s + length, n_frames)
        if e - s < 2 and bounds:
            bounds[-1] = (bounds[-1][0], e)
        else:
            bounds.append((s, e))
        s = e
    return bounds


def learning_config(cfg: Config) -> LearningConfig:
    return LearningConfig(C=cfg.svm_C, C_pa=cfg.pa_C, radius_factor=cfg.learn_radius_factor,
                          stride=cfg.learn_stride)


def background_gmm(frames: Sequence[Frame], cfg: Config, background: Optional[Frame] = None):
    """Background colors come from a given plate or the per-pixel median of the sequence."""
    if background is not None:
        lab = np.asarray(background.lab)
    else:
        lab = np.median(np.stack([f.lab for f in frames]), axis=0)
    pix = lab.reshape(-1, 3)
    rng = np.random.default_rng(cfg.seed)
    if len(pix) > cfg.bg_samples:
        pix = pix[np.sort(rng.choice(len(pix), cfg.bg_samples, replace=False))]
    return fit_gmm(pix, cfg.gmm_bg_k, cfg.gmm_iters, seed=cfg.seed)


def foreground_gmm(frame: Frame, box: BBox, cfg: Config):
    mask = grabcut_init(frame, box, iters=cfg.grabcut_iters, seed=cfg.seed)
    pix = np.asarray(frame.lab)[mask.labels == 1]
    return fit_gmm(pix, cfg.gmm_fg_k, cfg.gmm_iters, seed=cfg.seed)


def _flows_for(flows, s: int, e: int):
    if flows is None:
        return None
    return [np.asarray(flows[t]) for t in range(s, e - 1)]


def _finish(tracks, models, boxes, last: Frame, cfg: Config) -> None:
    """Append segment boxes, update appearance models on the final box and retire exiting tracks."""
    for tid, per_frame in boxes.items():
        for f in sorted(per_frame):
            tracks[tid].add(per_frame[f])
        box = per_frame[last.index]
        space = SearchSpace(box, radius=cfg.learn_radius_factor * box.w, stride=cfg.learn_stride)
        models[tid] = pa_update(models[tid], last, box, space, cfg.pa_C)
        if exit_check(tracks[tid], last):
            tracks[tid].active = False
            tracks[tid].exit_frame = last.index
            log.info("target %d exits at frame %d", tid, last.index)


def run_pipeline(mode: str, frames: Sequence[Frame], init: Mapping[int, BBox], config: Config = Config(),
                 flows: Optional[Sequence[np.ndarray]] = None, background: Optional[Frame] = None,
                 out_dir=None) -> PipelineResult:
    """Process the sequence online, one segment at a time.

    ``init`` holds each target's first box; it must sit at frame 0 or at the
    last frame before a segment starts. ``flows[t]`` (optional) maps frame t to
    t+1 and replaces block matching. With ``out_dir`` outputs are rewritten
    after every segment, so an error leaves the completed segments on disk.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {', '.join(MODES)}")
    frames = list(frames)
    bounds = segment_bounds(len(frames), config.segment_length)
    starts = {s - 1 for s, _ in bounds}
    for tid, box in init.items():
        if box.frame not in starts:
            raise ValueError(f"target {tid} starts at frame {box.frame}; targets may only start at "
                             f"frames {sorted(starts)}")
    use_track = mode != "seg-only"
    use_seg = mode != "track-only"
    lcfg = learning_config(config)

    res = PipelineResult()
    models: dict[int, AppearanceModel] = {}
    seg_models = SegModels({}, background_gmm(frames, config, background)) if use_seg else None
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    for k, (s, e) in enumerate(bounds):
        for tid in sorted(init):
            box = init[tid]
            if box.frame != s - 1:
                continue
            res.tracks[tid] = Track(tid, {box.frame: box})
            if use_track:
                models[tid] = train_initial(frames[box.frame], box, lcfg, tid)
            if use_seg:
                seg_models.fg[tid] = foreground_gmm(frames[box.frame], box, config)
        live = [tid for tid in sorted(res.tracks) if res.tracks[tid].active]
        seg_frames = frames[s:e]
        if not live:
            if use_seg:
                for fr in seg_frames:
                    res.masks[fr.index] = PixelMask(np.zeros((fr.height, fr.width), np.int32))
            continue
        prev = {tid: res.tracks[tid].boxes[s - 1] for tid in live} if use_track else None
        vel = {tid: track_velocity(res.tracks[tid], config.segment_length) for tid in live}
        prob = prepare_segment(seg_frames, live, config, models if use_track else None, prev,
                               seg_models, _flows_for(flows, s, e), vel)
        if mode == "joint":
            sr = dual_loop(prob)
            res.segments.append(sr)
            res.diagnostics += [(k, r.iter, r.disagreements, r.dual, r.primal) for r in sr.history]
            _finish(res.tracks, models, sr.boxes, seg_frames[-1], config)
            res.masks.update(sr.masks)
            log.info("segment %d: %d iterations, converged=%s", k, sr.iterations, sr.converged)
        elif mode == "track-only":
            _finish(res.tracks, models, track_only(prob), seg_frames[-1], config)
        else:
            res.masks.update(seg_only(prob))
        if out is not None:
            write_outputs(res, mode, out)
    if out is not None:
        write_outputs(res, mode, out)
    return res


def write_outputs(res: PipelineResult, mode: str, out: Path) -> None:
    """tracks.csv (not in seg-only), masks/ (not in track-only), diagnostics.csv (joint)."""
    if mode != "seg-only":
        io.write_tracks(out / "tracks.csv", res.tracks)
    if mode != "track-only":
        io.write_masks(out / "masks", res.masks)
    if mode == "joint":
        io.write_diagnostics(out / "diagnostics.csv", res.diagnostics)
