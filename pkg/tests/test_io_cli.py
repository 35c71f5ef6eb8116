"""File formats and the command-line interface, end to end."""

import json
import struct

import numpy as np
import pytest

from toolloc import io
from toolloc.cli import main
from toolloc.core import BoundingBox, Detection, FormatError, FrameDetections, HeatmapStack


@pytest.fixture
def stack(rng):
    return HeatmapStack(rng.random((3, 2, 5, 7)).astype(np.float32))


def test_camt_roundtrip_bit_exact(tmp_path, stack):
    p = tmp_path / "a.camt"
    io.write_camt(p, stack)
    raw = p.read_bytes()
    assert raw[:4] == b"CAMT" and len(raw) == 24 + 3 * 2 * 5 * 7 * 4
    back = io.read_camt(p)
    assert back.data.tobytes() == stack.data.tobytes()


def _corrupt(path, offset, fmt, value):
    raw = bytearray(path.read_bytes())
    struct.pack_into(fmt, raw, offset, value)
    path.write_bytes(bytes(raw))


@pytest.mark.parametrize(
    "offset,fmt,value", [(0, "<4s", b"CAMX"), (4, "<H", 2), (6, "<H", 1), (8, "<I", 0), (20, "<I", 8)]
)
def test_bad_header_fields(tmp_path, stack, offset, fmt, value):
    p = tmp_path / "a.camt"
    io.write_camt(p, stack)
    _corrupt(p, offset, fmt, value)
    with pytest.raises(FormatError):
        io.read_camt(p)


def test_truncated_and_nan_payload(tmp_path, stack):
    p = tmp_path / "a.camt"
    io.write_camt(p, stack)
    raw = p.read_bytes()
    p.write_bytes(raw[:-4])
    with pytest.raises(FormatError):
        io.read_camt(p)
    p.write_bytes(raw[:10])
    with pytest.raises(FormatError):
        io.read_camt(p)
    bad = bytearray(raw)
    struct.pack_into("<f", bad, 24, float("nan"))
    p.write_bytes(bytes(bad))
    with pytest.raises(FormatError):
        io.read_camt(p)


def test_detections_roundtrip(tmp_path):
    frames = [
        FrameDetections(0, (Detection(BoundingBox(1, 2, 3, 4), 1, 0.5),)),
        FrameDetections(4, (Detection(BoundingBox(0.5, 0, 9, 9.25), 0, 0.9, from_track=True),)),
    ]
    p = tmp_path / "d.json"
    io.write_detections(p, frames, ["a", "b"], 6)
    classes, back, n = io.read_detections(p)
    assert classes == ["a", "b"] and n == 6 and back == frames


@pytest.mark.parametrize(
    "doc",
    [
        "not json",
        {"frames": []},
        {"classes": ["a"], "frames": [{"frame_id": 0, "boxes": [{"class_id": 3}]}]},
        {"classes": ["a"], "frames": [{"frame_id": 0, "boxes": [
            {"class_id": 0, "score": 1, "x_min": 5, "y_min": 0, "x_max": 1, "y_max": 1}]}]},
        {"classes": ["a"], "frames": [{"frame_id": 2, "boxes": []}, {"frame_id": 1, "boxes": []}]},
        {"classes": ["a"], "num_frames": -1, "frames": []},
    ],
)
def test_detections_rejects_malformed(tmp_path, doc):
    p = tmp_path / "d.json"
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    with pytest.raises(FormatError):
        io.read_detections(p)


def test_matrix_roundtrip_and_errors(tmp_path):
    p = tmp_path / "m.csv"
    data = np.array([[0.1, -2.5], [3.0, 1e-300]])
    io.write_matrix(p, ["x", "y"], data)
    names, back = io.read_matrix(p)
    assert names == ["x", "y"]
    np.testing.assert_array_equal(back, data)
    p.write_text("x,y\n1,2\n3\n")
    with pytest.raises(FormatError):
        io.read_matrix(p)
    p.write_text("x,y\n1,nan\n")
    with pytest.raises(FormatError):
        io.read_matrix(p)


# --- command line -----------------------------------------------------------


@pytest.fixture
def scene(tmp_path):
    d = tmp_path / "scene"
    assert main(["synth", "--out", str(d), "--frames", "30", "--seed", "7"]) == 0
    return d


def test_synth_is_deterministic(tmp_path, scene):
    other = tmp_path / "again"
    main(["synth", "--out", str(other), "--frames", "30", "--seed", "7"])
    for name in ("cams.camt", "gt.json"):
        assert (scene / name).read_bytes() == (other / name).read_bytes()


def test_eval_of_ground_truth_against_itself(scene, capsys):
    gt = str(scene / "gt.json")
    assert main(["eval", "--pred", gt, "--gt", gt]) == 0
    doc = json.loads(capsys.readouterr().out.split("\n}\n")[0] + "}")
    assert doc["mean_ap"] == 1.0 and doc["mean_f1"] == 1.0


def test_localize_then_eval(scene, tmp_path):
    dets, rep = tmp_path / "dets.json", tmp_path / "rep.json"
    assert main(["localize", "--cams", str(scene / "cams.camt"), "--out", str(dets)]) == 0
    assert main(["eval", "--pred", str(dets), "--gt", str(scene / "gt.json"), "--out", str(rep)]) == 0
    assert json.loads(rep.read_text())["mean_ap"] >= 0.95


def test_workers_do_not_change_output(scene, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cams = str(scene / "cams.camt")
    main(["localize", "--cams", cams, "--out", str(a)])
    main(["localize", "--cams", cams, "--out", str(b), "--workers", "2"])
    assert a.read_bytes() == b.read_bytes()


def test_track_and_pseudo_label(scene, tmp_path, capsys):
    dets, tracked, acc, rej = (tmp_path / n for n in ("d.json", "t.json", "a.json", "r.json"))
    main(["localize", "--cams", str(scene / "cams.camt"), "--out", str(dets)])
    assert main(["track", "--dets", str(dets), "--out", str(tracked)]) == 0
    _, frames, n = io.read_detections(tracked)
    assert n == 30 and frames
    capsys.readouterr()
    code = main(["pseudo-label", "--dets", str(tracked), "--refs", str(dets),
                 "--out", str(acc), "--rejected-out", str(rej)])
    assert code == 0
    stats = json.loads(capsys.readouterr().out)
    assert set(stats) <= {"class_0", "class_1", "class_2"}
    _, a, _ = io.read_detections(acc)
    _, r, _ = io.read_detections(rej)
    n_in = sum(len(f.detections) for f in frames)
    assert sum(len(f.detections) for f in a) + sum(len(f.detections) for f in r) == n_in


def test_calibrate_and_classify(tmp_path, rng):
    z = rng.normal(size=(60, 3)) + np.array([0.0, 1.5, -1.0])
    y = (rng.random((60, 3)) < 0.4).astype(int)
    lz, ly = tmp_path / "z.csv", tmp_path / "y.csv"
    io.write_matrix(lz, io.class_header(3), z)
    io.write_matrix(ly, io.class_header(3), y, fmt="{:d}")
    sh, out, plain = tmp_path / "s.json", tmp_path / "p.csv", tmp_path / "q.csv"
    assert main(["calibrate", "--logits", str(lz), "--labels", str(ly), "--out", str(sh)]) == 0
    assert main(["classify", "--logits", str(lz), "--shifts", str(sh), "--out", str(out)]) == 0
    assert main(["classify", "--logits", str(lz), "--out", str(plain)]) == 0
    _, q = io.read_matrix(plain)
    np.testing.assert_array_equal(q, (1 / (1 + np.exp(-z)) >= 0.5).astype(float))
    zero = tmp_path / "zero.json"
    zero.write_text(json.dumps({"classes": io.class_header(3), "shifts": [0, 0, 0]}))
    again = tmp_path / "again.csv"
    main(["classify", "--logits", str(lz), "--shifts", str(zero), "--out", str(again)])
    assert again.read_bytes() == plain.read_bytes()


def test_presence_eval(tmp_path):
    p, t = tmp_path / "p.csv", tmp_path / "t.csv"
    io.write_matrix(p, ["a", "b"], [[1, 0], [1, 1]], fmt="{:d}")
    io.write_matrix(t, ["a", "b"], [[1, 0], [0, 1]], fmt="{:d}")
    assert main(["eval", "--presence", str(p), "--labels", str(t)]) == 0
    assert main(["eval", "--presence", str(p)]) == 2


def test_exit_codes(tmp_path, scene):
    bad = tmp_path / "bad.camt"
    bad.write_bytes(b"NOPE" + bytes(40))
    assert main(["localize", "--cams", str(bad), "--out", str(tmp_path / "x.json")]) == 2
    assert main(["localize", "--cams", str(tmp_path / "missing"), "--out", str(tmp_path / "x.json")]) == 2
    empty = tmp_path / "empty.json"
    io.write_detections(empty, [], io.class_header(3), 30)
    assert main(["eval", "--pred", str(scene / "gt.json"), "--gt", str(empty)]) == 3
