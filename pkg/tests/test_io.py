import numpy as np
import pytest
from PIL import Image

from dualtrack import io
from dualtrack.scene import BBox, PixelMask, Track


def test_ppm_pgm_round_trip(tmp_path):
    rgb = np.random.default_rng(0).integers(0, 256, (5, 7, 3)).astype(np.uint8)
    io.write_ppm(tmp_path / "a.ppm", rgb)
    assert np.array_equal(io.read_ppm(tmp_path / "a.ppm"), rgb)
    g = np.arange(12, dtype=np.uint8).reshape(3, 4)
    io.write_pgm(tmp_path / "m.pgm", g)
    assert np.array_equal(io.read_pgm(tmp_path / "m.pgm"), g)
    with pytest.raises(io.FormatError):
        io.write_pgm(tmp_path / "bad.pgm", np.array([[300]]))


def test_ppm_header_comments_and_errors(tmp_path):
    p = tmp_path / "c.ppm"
    p.write_bytes(b"P6\n# made by hand\n2 1\n255\n" + bytes([1, 2, 3, 4, 5, 6]))
    assert io.read_ppm(p).tolist() == [[[1, 2, 3], [4, 5, 6]]]
    p.write_bytes(b"P6\n2 1\n255\n" + bytes([1, 2, 3]))
    with pytest.raises(io.FormatError, match="truncated"):
        io.read_ppm(p)
    with pytest.raises(io.FormatError, match="P5"):
        io.read_pgm(p)


def test_png_frames(tmp_path):
    rgb = np.random.default_rng(1).integers(0, 256, (4, 6, 3)).astype(np.uint8)
    Image.fromarray(rgb).save(tmp_path / "frame_0.png")
    assert np.array_equal(io.read_image(tmp_path / "frame_0.png"), rgb)


def write_seq(d, n, shape=(4, 5)):
    d.mkdir()
    for t in range(n):
        io.write_ppm(d / io.frame_filename(t), np.full(shape + (3,), t, np.uint8))


def test_load_sequence(tmp_path):
    write_seq(tmp_path / "s", 3)
    frames = io.load_sequence(tmp_path / "s")
    assert [f.index for f in frames] == [0, 1, 2]
    (tmp_path / "s" / io.frame_filename(1)).unlink()
    with pytest.raises(io.FormatError, match="missing frame 1"):
        io.load_sequence(tmp_path / "s")


def test_sequence_size_mismatch(tmp_path):
    write_seq(tmp_path / "s", 2)
    io.write_ppm(tmp_path / "s" / io.frame_filename(2), np.zeros((3, 3, 3), np.uint8))
    with pytest.raises(io.FormatError, match="differs"):
        io.load_sequence(tmp_path / "s")
    with pytest.raises(io.FormatError):
        io.load_sequence(tmp_path / "nothing")


def test_tracks_csv_round_trip(tmp_path):
    tracks = {2: Track(2, {0: BBox(1.004, -0.001, 10, 20.5, 0), 1: BBox(2, 3, 10, 20, 1)}),
              1: Track(1, {1: BBox(5, 6, 7, 8, 1)})}
    text = io.format_tracks(tracks)
    assert text.splitlines() == ["frame,target_id,x,y,w,h", "0,2,1.00,0.00,10.00,20.50",
                                 "1,1,5.00,6.00,7.00,8.00", "1,2,2.00,3.00,10.00,20.00"]
    io.write_tracks(tmp_path / "t.csv", tracks)
    back = io.read_tracks(tmp_path / "t.csv")
    assert sorted(back) == [1, 2] and back[2].boxes[1] == BBox(2, 3, 10, 20, 1)
    assert io.tracks_by_frame(back)[1].keys() == {1, 2}


def test_init_file(tmp_path):
    io.write_init(tmp_path / "i.csv", {1: BBox(1, 2, 3, 4, 0), 3: BBox(5, 6, 7, 8, 10)})
    init = io.read_init(tmp_path / "i.csv")
    assert init[3].frame == 10
    (tmp_path / "dup.csv").write_text("frame,target_id,x,y,w,h\n0,1,0,0,5,5\n0,1,1,1,5,5\n")
    with pytest.raises(io.FormatError, match="twice"):
        io.read_init(tmp_path / "dup.csv")
    (tmp_path / "bad.csv").write_text("f,id\n")
    with pytest.raises(io.FormatError, match="header"):
        io.read_init(tmp_path / "bad.csv")
    (tmp_path / "junk.csv").write_text("frame,target_id,x,y,w,h\n0,1,a,0,5,5\n")
    with pytest.raises(io.FormatError, match=":2:"):
        io.read_init(tmp_path / "junk.csv")


def test_masks_and_diagnostics(tmp_path):
    m = {4: PixelMask(np.array([[0, 1], [2, 0]])), 5: PixelMask(np.zeros((2, 2)))}
    io.write_masks(tmp_path / "masks", m)
    assert (tmp_path / "masks" / "mask_000004.pgm").exists()
    back = io.read_masks(tmp_path / "masks")
    assert back[4].tolist() == [[0, 1], [2, 0]] and sorted(back) == [4, 5]
    io.write_diagnostics(tmp_path / "d.csv", [(0, 0, 3, -1.5, 2.25), (0, 1, 0, 2.0, 2.0)])
    assert (tmp_path / "d.csv").read_text().splitlines()[1] == "0,0,3,-1.500000,2.250000"
    assert io.read_diagnostics(tmp_path / "d.csv")[1] == {"segment": 0, "iter": 1, "disagreements": 0,
                                                         "dual": 2.0, "primal": 2.0}


def test_metrics_files(tmp_path):
    io.write_metrics(tmp_path, {"MOTA": 0.5, "IDS": 1})
    assert (tmp_path / "metrics.txt").read_text() == "MOTA=0.5\nIDS=1\n"
    assert '"IDS": 1' in (tmp_path / "metrics.json").read_text()
