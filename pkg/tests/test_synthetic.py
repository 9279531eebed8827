import filecmp

import numpy as np

from dualtrack import io
from dualtrack.flow import read_flow
from dualtrack.synthetic import PRESETS, SyntheticScene, SyntheticTarget, generate_synthetic


def test_static_rectangle():
    tg = SyntheticTarget(1, (20, 40), ((0, 50, 50), (4, 50, 50)), ((200, 30, 30),))
    d = generate_synthetic(SyntheticScene(width=100, height=100, n_frames=5, targets=(tg,)), seed=3)
    ref = np.zeros((100, 100), np.int32)
    ref[30:70, 40:60] = 1
    for t in range(5):
        assert d.tracks[1].boxes[t] == d.tracks[1].boxes[0].__class__(40, 30, 20, 40, frame=t)
        assert np.array_equal(d.masks[t].labels, ref)
    assert not d.flows[0].any()


def test_crossing_targets_follow_depth_order():
    scene = PRESETS["crossing"]()
    d = generate_synthetic(scene, seed=0)
    front, rear = scene.targets
    for t in range(scene.n_frames):
        labels = np.asarray(d.masks[t].labels)
        H, W = labels.shape
        ys, xs = np.indices((H, W)) + 0.5
        def inside(tg):
            b = tg.box(t)
            return (xs >= b.x) & (xs < b.x + b.w) & (ys >= b.y) & (ys < b.y + b.h)
        assert np.all(labels[inside(front)] == front.target_id)
        assert np.all(labels[inside(rear) & ~inside(front)] == rear.target_id)
    assert any((np.asarray(d.masks[t].labels) == 2).sum() < 720 for t in range(scene.n_frames))


def test_occluder_hides_target_but_keeps_its_box():
    d = generate_synthetic(PRESETS["adversarial"](), seed=0)
    hidden = [t for t in d.masks if (np.asarray(d.masks[t].labels) == 1).sum() == 0]
    assert hidden and all(t in d.tracks[1].boxes for t in hidden)


def test_true_flow_moves_target_pixels():
    d = generate_synthetic(PRESETS["single"](), seed=0)
    m = np.asarray(d.masks[0].labels) == 1
    assert np.allclose(d.flows[0][m], [4.0, 0.4])
    assert not d.flows[0][~m].any()


def test_same_seed_same_bytes(tmp_path):
    for name in ("a", "b"):
        generate_synthetic(PRESETS["crossing"](), seed=5, out_dir=tmp_path / name)
    files = ["gt_tracks.csv", "init.csv", "background.ppm"]
    assert filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", files, shallow=False)[0] == files
    for sub in ("seq", "gt_masks", "flow"):
        names = sorted(p.name for p in (tmp_path / "a" / sub).iterdir())
        assert filecmp.cmpfiles(tmp_path / "a" / sub, tmp_path / "b" / sub, names, shallow=False)[0] == names
    assert len(io.load_sequence(tmp_path / "a" / "seq")) == 11
    assert read_flow(tmp_path / "a" / "flow" / "flow_000000.bin").shape == (120, 160, 2)
    other = generate_synthetic(PRESETS["crossing"](), seed=6)
    assert not np.array_equal(other.frames[0], io.read_ppm(tmp_path / "a" / "seq" / "frame_000000.ppm"))
