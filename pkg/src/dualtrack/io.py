"""File formats: PPM/PGM images, tracks CSV, init file, masks, diagnostics and metrics."""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .scene import BBox, Frame, PixelMask, Track

TRACK_HEADER = ["frame", "target_id", "x", "y", "w", "h"]
DIAG_HEADER = ["segment", "iter", "disagreements", "dual", "primal"]
IMAGE_SUFFIXES = (".ppm", ".png")


class FormatError(ValueError):
    pass


# --- images ------------------------------------------------------------------

def _read_pnm(path, magic: bytes, channels: int) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated header")
        tokens.append(data[start:pos])
    if tokens[0] != magic:
        raise FormatError(f"{path}: expected {magic.decode()} image, got {tokens[0][:2]!r}")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit images are supported")
    pos += 1
    n = w * h * channels
    if len(data) - pos < n:
        raise FormatError(f"{path}: truncated pixel data")
    arr = np.frombuffer(data, dtype=np.uint8, count=n, offset=pos)
    return arr.reshape((h, w, channels) if channels > 1 else (h, w)).copy()


def read_ppm(path) -> np.ndarray:
    return _read_pnm(path, b"P6", 3)


def write_ppm(path, rgb: np.ndarray) -> None:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w = rgb.shape[:2]
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + rgb.tobytes())


def read_pgm(path) -> np.ndarray:
    return _read_pnm(path, b"P5", 1)


def write_pgm(path, gray: np.ndarray) -> None:
    gray = np.asarray(gray)
    if gray.min(initial=0) < 0 or gray.max(initial=0) > 255:
        raise FormatError("mask values must fit in 8 bits")
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    h, w = gray.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + gray.tobytes())


def read_image(path) -> np.ndarray:
    path = Path(path)
    try:
        if path.suffix.lower() == ".png":
            from PIL import Image
            with Image.open(path) as im:
                return np.asarray(im.convert("RGB"), dtype=np.uint8)
        return read_ppm(path)
    except FormatError:
        raise
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def _frame_number(path: Path):
    m = re.search(r"(\d+)$", path.stem)
    return int(m.group(1)) if m else None


def sequence_files(directory) -> list[Path]:
    """Numbered image files of a directory in index order; raises on gaps."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError(f"{directory}: not a directory")
    numbered = sorted((_frame_number(p), p) for p in directory.iterdir()
                      if p.suffix.lower() in IMAGE_SUFFIXES and _frame_number(p) is not None)
    if not numbered:
        raise FormatError(f"{directory}: no numbered .ppm/.png frames")
    nums = [n for n, _ in numbered]
    if len(set(nums)) != len(nums):
        raise FormatError(f"{directory}: duplicate frame numbers")
    for a, b in zip(nums, nums[1:]):
        if b != a + 1:
            raise FormatError(f"{directory}: missing frame {a + 1}")
    return [p for _, p in numbered]


def load_sequence(directory) -> list[Frame]:
    frames = []
    for i, path in enumerate(sequence_files(directory)):
        rgb = read_image(path)
        if frames and rgb.shape != frames[0].rgb.shape:
            raise FormatError(f"{path}: size {rgb.shape[1]}x{rgb.shape[0]} differs from the first frame")
        frames.append(Frame(rgb, index=i))
    return frames


def frame_filename(t: int) -> str:
    return f"frame_{t:06d}.ppm"


def mask_filename(t: int) -> str:
    return f"mask_{t:06d}.pgm"


# --- masks ---------------------------------------------------------------------

def write_masks(directory, masks: Mapping[int, PixelMask]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for t in sorted(masks):
        write_pgm(directory / mask_filename(t), masks[t].labels)


def read_masks(directory) -> dict[int, np.ndarray]:
    out = {}
    for p in sorted(Path(directory).glob("mask_*.pgm")):
        out[_frame_number(p)] = read_pgm(p).astype(np.int32)
    return out


# --- tracks CSV ----------------------------------------------------------------

def _fmt(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def format_tracks(tracks: Mapping[int, Track]) -> str:
    rows = sorted((f, tid, b) for tid, tr in tracks.items() for f, b in tr.boxes.items())
    lines = [",".join(TRACK_HEADER)]
    lines += [f"{f},{tid},{_fmt(b.x)},{_fmt(b.y)},{_fmt(b.w)},{_fmt(b.h)}" for f, tid, b in rows]
    return "\n".join(lines) + "\n"


def write_tracks(path, tracks: Mapping[int, Track]) -> None:
    Path(path).write_text(format_tracks(tracks))


def _read_box_rows(path) -> list[tuple[int, int, BBox]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != TRACK_HEADER:
            raise FormatError(f"{path}: header must be {','.join(TRACK_HEADER)}")
        for lineno, rec in enumerate(reader, 2):
            if not rec or not "".join(rec).strip():
                continue
            try:
                f, tid = int(rec[0]), int(rec[1])
                x, y, w, h = (float(v) for v in rec[2:6])
                rows.append((f, tid, BBox(x, y, w, h, frame=f)))
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return rows


def read_tracks(path) -> dict[int, Track]:
    tracks: dict[int, Track] = {}
    for f, tid, box in sorted(_read_box_rows(path), key=lambda r: (r[1], r[0])):
        tracks.setdefault(tid, Track(tid)).add(box)
    return tracks


def tracks_by_frame(tracks: Mapping[int, Track]) -> dict[int, dict[int, BBox]]:
    out: dict[int, dict[int, BBox]] = {}
    for tid, tr in tracks.items():
        for f, b in tr.boxes.items():
            out.setdefault(f, {})[tid] = b
    return out


def read_init(path) -> dict[int, BBox]:
    """First box of each target; target ids must be unique."""
    out: dict[int, BBox] = {}
    for f, tid, box in _read_box_rows(path):
        if tid in out:
            raise FormatError(f"{path}: target {tid} initialized twice")
        out[tid] = box
    return out


def write_init(path, boxes: Mapping[int, BBox]) -> None:
    write_tracks(path, {tid: Track(tid, {b.frame: b}) for tid, b in boxes.items()})


# --- diagnostics and metrics -----------------------------------------------------

def write_diagnostics(path, rows: Iterable[tuple]) -> None:
    """Rows of (segment, iter, disagreements, dual, primal)."""
    lines = [",".join(DIAG_HEADER)]
    for seg, it, dis, dual, primal in rows:
        lines.append(f"{seg},{it},{dis},{dual:.6f},{primal:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_diagnostics(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{"segment": int(r["segment"]), "iter": int(r["iter"]),
                 "disagreements": int(r["disagreements"]), "dual": float(r["dual"]),
                 "primal": float(r["primal"])} for r in csv.DictReader(fh)]


def write_metrics(out_dir, metrics: Mapping[str, float], stem: str = "metrics") -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{stem}.txt").write_text("".join(f"{k}={v}\n" for k, v in metrics.items()))
    (out_dir / f"{stem}.json").write_text(json.dumps(dict(metrics), indent=2, sort_keys=False) + "\n")
