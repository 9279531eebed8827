import numpy as np
import pytest

from dualtrack.config import Config
from dualtrack.scene import Frame
from dualtrack.synthetic import SyntheticScene, SyntheticTarget, generate_synthetic

# settings shared by the scene-level tests: fewer superpixels and a coarser learning grid keep a run under a minute
FAST = Config(n_sp=200, learn_stride=4)


def crossing_at(speed: float, n_frames: int = 11) -> SyntheticScene:
    """Red target in front, blue behind, swapping sides at ``speed`` px/frame."""
    half = speed * (n_frames - 1) / 2
    a = SyntheticTarget(1, (20, 36), ((0, 80 - half, 60), (n_frames - 1, 80 + half, 60)), ((210, 50, 40),), depth=1)
    b = SyntheticTarget(2, (20, 36), ((0, 80 + half, 62), (n_frames - 1, 80 - half, 62)), ((40, 70, 200),), depth=0)
    return SyntheticScene(n_frames=n_frames, targets=(a, b))


def frames_of(data):
    return [Frame(x, i) for i, x in enumerate(data.frames)]


@pytest.fixture(scope="session")
def tiny():
    """Two small targets on a 72x48 frame, 7 frames."""
    a = SyntheticTarget(1, (10, 16), ((0, 20, 24), (6, 32, 24)), ((220, 40, 40),), noise=3)
    b = SyntheticTarget(2, (10, 16), ((0, 52, 22), (6, 46, 26)), ((40, 60, 220),), noise=3)
    sc = SyntheticScene(width=72, height=48, n_frames=7, targets=(a, b), bg_cell=6, noise=3)
    return generate_synthetic(sc, seed=0)


TINY_CFG = Config(n_sp=60, segment_length=3, cand_radius=6, cand_stride=2, learn_stride=4,
                  gmm_bg_k=5, gmm_fg_k=3, max_iters=20)


_criteria: dict[int, str] = {}


@pytest.fixture(scope="session")
def criterion():
    """Record the outcome line of an acceptance criterion; call before asserting."""
    def record(number: int, passed: bool, detail: str) -> bool:
        _criteria[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_criteria):
            terminalreporter.write_line(_criteria[n])
