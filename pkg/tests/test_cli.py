import json

import numpy as np
import pytest

from oracles import brute_dice
from snowlens.cli import resolve_config, run
from snowlens.ingest import write_image
from snowlens.maskio import read_label_mask


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert run(["synth", "--n", "6", "--seed", "7", "--out", str(data)]) == 0
    assert run(["split", "--data", str(data / "paired"), "--fraction", "0.67", "--seed", "1",
                "--out", str(root / "split")]) == 0
    common = ["--epochs", "1", "--seed", "0", "--split-file", str(root / "split" / "split.json")]
    assert run(["train-translate", "--data", str(data / "paired"), "--role", "U",
                "--out", str(root / "U")] + common) == 0
    assert run(["train-translate", "--data", str(data / "roadsurface"), "--role", "T",
                "--out", str(root / "T")] + common) == 0
    assert run(["train-segment", "--data", str(data / "annotated"), "--out", str(root / "S")]
               + common) == 0
    return root


def test_synth_tree(workspace):
    manifest = json.loads((workspace / "data" / "manifest.json").read_text())
    assert manifest["n"] == 6
    assert len(list((workspace / "data" / "paired" / "night").glob("*.png"))) == 6
    assert json.loads((workspace / "data" / "run_config.json").read_text())["seed"] == 7


def test_split_counts(workspace):
    doc = json.loads((workspace / "split" / "split.json").read_text())
    assert (doc["n_train"], doc["n_test"]) == (4, 2)


def test_training_artifacts(workspace):
    assert (workspace / "U" / "translator_U.pt").exists()
    side = json.loads((workspace / "T" / "translator_T.json").read_text())
    assert side["role_tag"] == "T" and side["epoch"] == 1 and len(side["loss_curve"]) == 1
    header = (workspace / "U" / "loss_log.csv").read_text().splitlines()[0]
    assert header == "epoch,adversarial_g,adversarial_d,l1,total_g"
    assert (workspace / "S" / "train_metrics.csv").read_text().startswith("epoch,loss,miou_train")


def test_translate_segment_and_eval(workspace):
    night = workspace / "data" / "paired" / "night"
    out = workspace / "K"
    assert run(["translate", "--model", str(workspace / "U" / "translator_U.pt"),
                "--input", str(night), "--out", str(out)]) == 0
    assert len(list(out.glob("*.png"))) == 6
    for src, dst in (("data/paired/day", "DrL"), ("K", "DfL")):
        assert run(["segment", "--model", str(workspace / "S" / "segmenter.pt"),
                    "--input", str(workspace / src), "--out", str(workspace / dst),
                    "--overlay", "true"]) == 0
    assert run(["eval-seg", "--pred", str(workspace / "DrL"),
                "--gt", str(workspace / "data" / "annotated" / "masks"),
                "--out", str(workspace / "evalseg")]) == 0
    report = json.loads((workspace / "evalseg" / "seg_report.json").read_text())
    assert 0.0 <= report["mean_iou"] <= 1.0 and len(report["confusion"]) == 6

    assert run(["eval-dice", "--real-labels", str(workspace / "DrL"),
                "--fake-labels", str(workspace / "DfL"), "--roi", "snow,road",
                "--out", str(workspace / "dice")]) == 0
    doc = json.loads((workspace / "dice" / "dice.json").read_text())
    for entry in doc["images"]:
        real = read_label_mask(workspace / "DrL" / f"{entry['image_id']}.png")
        fake = read_label_mask(workspace / "DfL" / f"{entry['image_id']}.png")
        assert entry["dice"]["snow"] == brute_dice(real, fake, 3)
        assert entry["dice"]["road"] == brute_dice(real, fake, 0)
    assert (workspace / "dice" / "dice.png").exists()
    assert len((workspace / "dice" / "dice.csv").read_text().splitlines()) == 1 + 2 * 6


def test_hazard_commands(workspace):
    frame = sorted((workspace / "data" / "paired" / "day").glob("*.png"))[0]
    night = workspace / "data" / "paired" / "night" / frame.name
    models = ["--t", str(workspace / "T" / "translator_T.pt"),
              "--s", str(workspace / "S" / "segmenter.pt")]
    status = run(["hazard", "--image", str(frame), "--out", str(workspace / "hz")] + models)
    doc = json.loads((workspace / "hz" / "hazard.json").read_text())
    if status == 0:
        assert 0.0 <= doc["index"] <= 100.0 and doc["source_tag"] == "day-direct"
    else:
        assert doc["verdict"] == "no-road"
    status = run(["hazard-night", "--image", str(night), "--u",
                  str(workspace / "U" / "translator_U.pt"), "--out", str(workspace / "hzn")] + models)
    doc = json.loads((workspace / "hzn" / "hazard.json").read_text())
    assert doc["source_tag"] == "night-composed"
    assert status in (0, 1)


def test_hazard_no_road_exit_code(workspace, tmp_path):
    from snowlens.segmenter import DeepLabSegmenter
    import torch

    s = DeepLabSegmenter.load(workspace / "S" / "segmenter.pt")
    with torch.no_grad():
        s.model_.classifier.bias[4] = 1e4  # everything becomes sky
    s.trail_ = []
    s.save(tmp_path / "sky.pt")
    frame = tmp_path / "frame.png"
    write_image(frame, np.full((128, 192, 3), 120, dtype=np.uint8))
    status = run(["hazard", "--image", str(frame), "--t", str(workspace / "T" / "translator_T.pt"),
                  "--s", str(tmp_path / "sky.pt"), "--out", str(tmp_path / "out")])
    assert status == 1
    doc = json.loads((tmp_path / "out" / "hazard.json").read_text())
    assert doc["verdict"] == "no-road"
    assert (tmp_path / "out" / "RsL.png").exists()


def test_report_montage_and_barplot(workspace):
    out = workspace / "rep"
    assert run(["report", "--images", str(workspace / "K"), "--grid", "2x2",
                "--dice-json", str(workspace / "dice" / "dice.json"), "--out", str(out)]) == 0
    from snowlens.ingest import read_image

    assert read_image(out / "montage.png").shape == (256, 384, 3)
    assert (out / "dice.png").exists()


def test_usage_errors(capsys):
    assert run(["bogus"]) == 2
    assert run(["synth"]) == 2
    assert run(["synth", "--out", "x", "--preset", "huge"]) == 2
    assert run(["report", "--out", "/tmp/snowlens-report-empty"]) == 2
    assert "usage" in capsys.readouterr().err


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"seed": 1, "n": 5, "synth": {"n": 9, "out": "from-file"}}))
    args = {"config": str(cfg_file), "seed": None, "n": None, "out": None}
    cfg = resolve_config("synth", args, environ={})
    assert (cfg["seed"], cfg["n"], cfg["out"]) == (1, 9, "from-file")
    cfg = resolve_config("synth", args, environ={"SNOWLENS_SEED": "2", "SNOWLENS_N": "3"})
    assert (cfg["seed"], cfg["n"]) == (2, 3)
    cfg = resolve_config("synth", dict(args, seed=4), environ={"SNOWLENS_SEED": "2"})
    assert cfg["seed"] == 4
    assert resolve_config("synth", {"out": "o"}, environ={})["canvas"] == (128, 192)
