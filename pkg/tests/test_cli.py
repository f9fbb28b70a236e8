import json
import subprocess
import sys

import numpy as np
import pytest

from armloc.cli import main
from armloc.core import ArmClass, FrameAnnotation, JointAnnotation
from armloc.formats import encode_gray_png, read_detections, read_gray_png, read_hmap, write_annotations


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--n", "6", "--seed", "7", "--out-dir", str(d)]) == 0
    return d


def test_synth_deterministic_and_parallel_identical(synth_dir, tmp_path):
    assert main(["synth", "--n", "6", "--seed", "7", "--out-dir", str(tmp_path), "--jobs", "2"]) == 0
    a = sorted((synth_dir / "stacks").glob("*.hmap"))
    b = sorted((tmp_path / "stacks").glob("*.hmap"))
    assert [p.name for p in a] == [p.name for p in b] and len(a) == 6
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()
    assert (synth_dir / "annotations.json").read_text() == (tmp_path / "annotations.json").read_text()


def test_decode_then_eval(synth_dir, tmp_path):
    dets = tmp_path / "d.jsonl"
    assert main(["decode", str(synth_dir / "stacks"), "--out", str(dets)]) == 0
    assert main(["eval", "--detections", str(dets), "--annotations",
                 str(synth_dir / "annotations.json"), "--out-dir", str(tmp_path / "ev")]) == 0
    summary = json.loads((tmp_path / "ev" / "summary.json").read_text())
    assert summary["pck_at_0.05"] == 1.0
    assert summary["angle_within_3deg"] == 1.0
    assert (tmp_path / "ev" / "pck.csv").read_text().startswith("threshold,DriverLeft.elbow")


def test_decode_jobs_keeps_order(synth_dir, tmp_path):
    one, two = tmp_path / "1.jsonl", tmp_path / "2.jsonl"
    assert main(["decode", str(synth_dir / "stacks"), "--out", str(one)]) == 0
    assert main(["decode", str(synth_dir / "stacks"), "--out", str(two), "--jobs", "3"]) == 0
    assert one.read_bytes() == two.read_bytes()


def test_config_precedence(synth_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"presence_threshold": 0.99}))
    out = tmp_path / "d.jsonl"
    stacks = str(synth_dir / "stacks")
    assert main(["decode", stacks, "--out", str(out), "--config", str(cfg)]) == 0
    dets, _ = read_detections(out)
    assert not any(d.present for per in dets.values() for d in per.values())
    assert main(["decode", stacks, "--out", str(out), "--config", str(cfg),
                 "--presence-threshold", "0.2"]) == 0
    dets, _ = read_detections(out)
    assert all(d.present for per in dets.values() for d in per.values())
    cfg.write_text(json.dumps({"sigma_banana": 1}))
    assert main(["decode", stacks, "--out", str(out), "--config", str(cfg)]) == 3


def test_occupancy(synth_dir, tmp_path):
    dets = tmp_path / "d.jsonl"
    main(["decode", str(synth_dir / "stacks"), "--out", str(dets)])
    prefix = tmp_path / "occ"
    assert main(["occupancy", "--detections", str(dets), "--out", str(prefix)]) == 0
    grids = read_hmap(prefix.with_suffix(".hmap"))
    assert grids.shape == (4, 368, 736)
    assert grids.sum() == pytest.approx(24, rel=0.02)
    assert prefix.with_suffix(".png").exists()
    assert main(["occupancy", "--detections", str(dets), "--annotations", str(synth_dir / "annotations.json"),
                 "--drive-mode", "manual", "--out", str(prefix)]) == 0
    assert read_hmap(prefix.with_suffix(".hmap")).sum() < 24


def _image_and_ann(tmp_path):
    img = np.full((40, 80), 0.6)
    img[:, :10] = 0.2
    png = tmp_path / "img.png"
    png.write_bytes(encode_gray_png(img))
    ann = tmp_path / "ann.json"
    write_annotations(ann, [FrameAnnotation("img", (80, 40), (
        JointAnnotation(ArmClass.DriverLeft, (20, 20), (5, 25)),))])
    return png, ann


def test_augment_lighting_dark(tmp_path):
    png, _ = _image_and_ann(tmp_path)
    out = tmp_path / "o.png"
    assert main(["augment", "--image", str(png), "--mode", "lighting", "--condition", "dark",
                 "--out-image", str(out), "--seed", "3"]) == 0
    assert read_gray_png(out).mean() < read_gray_png(png).mean()


def test_augment_mirror_and_geometric(tmp_path):
    png, ann = _image_and_ann(tmp_path)
    out, out_ann = tmp_path / "m.png", tmp_path / "m.json"
    assert main(["augment", "--image", str(png), "--annotations", str(ann), "--mode", "mirror",
                 "--side", "driver", "--out-image", str(out), "--out-annotations", str(out_ann)]) == 0
    m = read_gray_png(out)
    np.testing.assert_array_equal(m, m[:, ::-1])
    arms = json.loads(out_ann.read_text())["frames"][0]["arms"]
    assert {a["class"] for a in arms} == {"DriverLeft", "PassengerRight"}
    assert main(["augment", "--image", str(png), "--annotations", str(ann), "--mode", "geometric",
                 "--crop-w", "60", "--crop-h", "30", "--seed", "1",
                 "--out-image", str(out), "--out-annotations", str(out_ann)]) == 0
    assert read_gray_png(out).shape == (30, 60)


def test_exit_codes(tmp_path, synth_dir):
    assert main(["frobnicate"]) == 1
    assert main(["decode", str(tmp_path / "missing.hmap"), "--out", str(tmp_path / "x")]) == 2
    bad = tmp_path / "bad.hmap"
    bad.write_bytes(b"XMAP" + bytes(40))
    out = tmp_path / "never.jsonl"
    assert main(["decode", str(bad), "--out", str(out)]) == 3
    assert not out.exists()
    assert list(tmp_path.glob(".never*")) == []
    png, _ = _image_and_ann(tmp_path)
    assert main(["augment", "--image", str(png), "--mode", "lighting",
                 "--out-image", str(tmp_path / "o.png")]) == 1
    assert main(["synth", "--n", "0", "--out-dir", str(tmp_path)]) == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "armloc", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "decode" in r.stdout
