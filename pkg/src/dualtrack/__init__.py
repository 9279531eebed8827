"""Online multi-target tracking and segmentation solved jointly by dual decomposition."""

from .config import Config, load_config, parse_config
from .coupler import couple_energy, dual_loop, prepare_segment, run_segment
from .evaluation import clear_mot, identity_iou, seg_report
from .pipeline import run_pipeline
from .scene import BBox, Frame, PixelMask, Track, VideoSegment, iou

__all__ = [
    "BBox", "Config", "Frame", "PixelMask", "Track", "VideoSegment", "clear_mot", "couple_energy",
    "dual_loop", "identity_iou", "iou", "load_config", "parse_config", "prepare_segment",
    "run_pipeline", "run_segment", "seg_report",
]
