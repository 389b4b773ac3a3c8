import shutil
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from conftest import KITTI_FIXTURE
from monoprop.cli import main
from monoprop.kitti_io import DepthMap, parse_labels, write_depth_png


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    assert main(["synth", "--root", str(root), "--scenes", "4", "--seed", "7"]) == 0
    return root


def _bytes(d):
    return {p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_synth_deterministic(dataset, tmp_path):
    assert len(list((dataset / "label_2").glob("*.txt"))) == 4
    again = tmp_path / "again"
    assert main(["synth", "--root", str(again), "--scenes", "4", "--seed", "7",
                 "--jobs", "2"]) == 0
    assert _bytes(dataset) == _bytes(again)


def test_synth_invalid_range(tmp_path, capsys):
    assert main(["synth", "--root", str(tmp_path), "--z-min", "50", "--z-max", "10"]) != 0
    assert "invalid depth range" in capsys.readouterr().err


def test_gen_instances_counts(dataset, tmp_path, capsys):
    out = tmp_path / "inst"
    assert main(["gen-instances", "--root", str(dataset), "--out", str(out)]) == 0
    expected = sum(len(parse_labels(p.read_text()).objects)
                   for p in (dataset / "label_2").glob("*.txt"))
    assert len(list(out.glob("*.local.grid"))) == expected
    text = capsys.readouterr().out
    assert f"instances written {expected}" in text
    assert "0.000 px" in text


def test_gen_instances_zero_depth_frame(dataset, tmp_path, capsys):
    root = tmp_path / "ds"
    shutil.copytree(dataset, root)
    (root / "depth" / "000000.png").write_bytes(write_depth_png(DepthMap(np.zeros((375, 1242)))))
    assert main(["gen-instances", "--root", str(root), "--out", str(tmp_path / "i")]) == 0
    assert "no valid pixels" in capsys.readouterr().err


def test_gen_instances_reports_parse_errors(dataset, tmp_path):
    root = tmp_path / "ds"
    shutil.copytree(dataset, root)
    (root / "calib" / "000001.txt").write_text("P0: 1 2 3\n")
    assert main(["gen-instances", "--root", str(root), "--out", str(tmp_path / "i")]) == 1


def test_propose_refine_eval_pipeline(dataset, tmp_path, capsys):
    inst, prop, ref = tmp_path / "inst", tmp_path / "prop", tmp_path / "ref"
    assert main(["gen-instances", "--root", str(dataset), "--out", str(inst)]) == 0
    assert main(["propose", "--root", str(dataset), "--out", str(prop)]) == 0
    table = capsys.readouterr().out
    assert "depth error (mean / std, m)" in table
    assert main(["refine", "--root", str(dataset), "--proposals", str(prop), "--instances",
                 str(inst), "--out", str(ref), "--traces", str(tmp_path / "tr")]) == 0
    out = capsys.readouterr().out
    after = float(out.split("depth error after  (mean / std, m): ")[1].split(" / ")[0])
    assert after <= 0.05
    for p in ref.glob("*.txt"):
        parse_labels(p.read_text())
    for p in (tmp_path / "tr").glob("*.txt"):
        vals = [float(line.split()[1]) for line in p.read_text().splitlines()]
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    zero = tmp_path / "zero"
    assert main(["refine", "--root", str(dataset), "--proposals", str(prop), "--instances",
                 str(inst), "--out", str(zero), "--max-iters", "0"]) == 0
    assert _bytes(zero) == _bytes(prop)

    pr = tmp_path / "pr"
    assert main(["eval", "--gt", str(dataset / "label_2"), "--dets", str(dataset / "label_2"),
                 "--classes", "Car,Pedestrian,Cyclist", "--out", str(pr)]) == 0
    rows = [line for line in capsys.readouterr().out.splitlines() if "|" in line][1:]
    assert rows and all(v == "100.00" for r in rows for v in r.replace("|", " ").split()[2:])
    for svg in pr.glob("*.svg"):
        ET.parse(svg)


def test_propose_class_means_worse(dataset, tmp_path, capsys):
    assert main(["propose", "--root", str(dataset), "--out", str(tmp_path / "p"),
                 "--class-means", "--difficulties", "hard"]) == 0
    text = capsys.readouterr().out
    gt_part, mean_part = text.split("class-mean dims")
    gt_car = float(gt_part.split("Car")[1].split("/")[0])
    mean_car = float(mean_part.split("Car")[1].split("/")[0])
    assert mean_car > gt_car


def test_propose_empty_detection_file(dataset, tmp_path):
    root = tmp_path / "ds"
    shutil.copytree(dataset, root)
    (root / "detections").mkdir()
    for p in (root / "label_2").glob("*.txt"):
        (root / "detections" / p.name).write_text("")
    out = tmp_path / "p"
    assert main(["propose", "--root", str(root), "--source", "detections", "--out",
                 str(out)]) == 0
    assert all(p.read_text() == "" for p in out.glob("*.txt"))


def test_refine_frame_mismatch(dataset, tmp_path, capsys):
    prop = tmp_path / "prop"
    prop.mkdir()
    (prop / "999999.txt").write_text("")
    assert main(["refine", "--root", str(dataset), "--proposals", str(prop), "--instances",
                 str(tmp_path), "--out", str(tmp_path / "o")]) != 0
    assert "999999" in capsys.readouterr().err


def test_eval_empty_gt(tmp_path, capsys):
    (tmp_path / "gt").mkdir()
    (tmp_path / "gt" / "000000.txt").write_text("")
    assert main(["eval", "--gt", str(tmp_path / "gt"), "--dets", str(tmp_path)]) != 0


def test_eval_real_fixture(capsys):
    gt = KITTI_FIXTURE / "label_2"
    assert main(["eval", "--gt", str(gt), "--dets", str(gt), "--classes", "Car,Pedestrian",
                 "--points", "40"]) == 0
    assert "40-point" in capsys.readouterr().out


def test_viz_svgs(dataset, tmp_path):
    out = tmp_path / "v.svg"
    assert main(["viz", "--root", str(dataset), "--frame", "000000", "--dets",
                 str(dataset / "label_2"), "--out", str(out)]) == 0
    tree = ET.parse(out)
    ns = "{http://www.w3.org/2000/svg}"
    colors = {e.get("stroke") for e in tree.iter(f"{ns}polygon")}
    assert colors == {"red", "green"}

    empty = tmp_path / "empty"
    (empty / "calib").mkdir(parents=True)
    shutil.copy(dataset / "calib" / "000000.txt", empty / "calib")
    assert main(["viz", "--root", str(empty), "--frame", "000000",
                 "--out", str(tmp_path / "e.svg")]) == 0
    assert not list(ET.parse(tmp_path / "e.svg").iter(f"{ns}polygon"))


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"root = {tmp_path / 'a'}\nscenes = 2\nseed = 3\n")
    assert main(["--config", str(cfg), "synth"]) == 0
    assert len(list((tmp_path / "a" / "label_2").glob("*.txt"))) == 2
    assert main(["--config", str(cfg), "synth", "--scenes", "1", "--root",
                 str(tmp_path / "b")]) == 0
    assert len(list((tmp_path / "b" / "label_2").glob("*.txt"))) == 1


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("bogus = 1\n")
    assert main(["--config", str(cfg), "synth", "--root", str(tmp_path)]) != 0
