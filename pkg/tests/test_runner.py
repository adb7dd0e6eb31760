import json
import os

import numpy as np
import pytest

from txai_bench.cli import main
from txai_bench.config import experiment_from_mapping, format_config
from txai_bench.runner import CSV_COLUMNS, records_to_csv, run_experiment


def _mini_mapping(out_dir, methods="bp", samples=1):
    return {
        "seed": "0",
        "out.dir": str(out_dir),
        "dataset.source": "synthetic",
        "synthetic.train_count": "400",
        "synthetic.test_count": "120",
        "train.epochs": "4",
        "train.learning_rate": "0.05",
        "eval.samples": str(samples),
        "eval.methods": methods,
        "scenario.c6.fraction": "0.15",
        "scenario.c6.entry.0.pattern": "solid",
        "scenario.c6.entry.0.size": "6",
        "scenario.c6.entry.0.location": "corner",
        "scenario.c6.entry.0.target": "1",
    }


def _write_cfg(tmp_path, mapping):
    path = tmp_path / "exp.cfg"
    path.write_text(format_config(mapping))
    return path


@pytest.fixture(scope="module")
def mini_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("mini_out")
    mapping = _mini_mapping(out)
    cfg = experiment_from_mapping(mapping)
    result = run_experiment(cfg, format_config(mapping))
    return out, result


def test_minimal_run_artifacts(mini_run):
    out, result = mini_run
    assert len(result.records) == 1
    assert os.path.exists(out / "maps" / "c6" / "bp" / "img000.pgm")
    assert os.path.exists(out / "maps" / "c6" / "bp" / "img000_overlay.ppm")
    assert not os.path.exists(out / "maps" / "c6" / "bp" / "img001.pgm")
    assert os.path.exists(out / "models" / "clean.txm")
    assert os.path.exists(out / "models" / "c6.txm")
    assert os.path.exists(out / "triggers" / "c6_entry0.ppm")


def test_csv_schema_and_content(mini_run):
    out, result = mini_run
    lines = (out / "report.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 2
    row = lines[1].split(",")
    assert row[:7] == ["cnn_small", "c6", "corner", "solid", "6", "single", "bp"]
    for cell in row[7:]:
        float(cell)
        assert len(cell.split(".")[1]) == 6


def test_json_mirrors_and_recomputes(mini_run):
    out, result = mini_run
    payload = json.loads((out / "records.json").read_text())
    assert len(payload) == 1
    rec = payload[0]
    imgs = rec["images"]
    assert len(imgs) == 1
    assert abs(rec["iou_mean"] - np.mean([i["iou"] for i in imgs])) <= 1e-12
    assert abs(rec["rd"] - np.mean([i["l0_difference"] for i in imgs])) <= 1e-12
    assert abs(rec["cc_mean"] - np.mean([i["wall_clock_seconds"] for i in imgs])) <= 1e-12
    rr = np.mean([i["recovered_label"] == i["true_label"] for i in imgs])
    assert abs(rec["rr"] - rr) <= 1e-12


def test_manifest_contents(mini_run):
    out, _ = mini_run
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["complete"] is True
    assert manifest["seed"] == 0
    assert len(manifest["config_sha256"]) == 64
    info = manifest["scenarios"]["c6"]
    assert info["eval_count"] == 1
    assert 0 <= info["mr"] <= 1 and 0 <= info["ca"] <= 1
    assert "numpy" in manifest["versions"]


def test_overwrite_needs_force(mini_run, tmp_path):
    out, _ = mini_run
    mapping = _mini_mapping(out)
    cfg_path = _write_cfg(tmp_path, mapping)
    assert main(["run", "--config", str(cfg_path)]) == 1
    # force allowed (reuse the trained artifacts dir)
    assert main(["run", "--config", str(cfg_path), "--force"]) == 0


def test_header_only_csv_for_empty_records():
    text = records_to_csv([], {})
    assert text == ",".join(CSV_COLUMNS) + "\n"


def test_failed_run_leaves_incomplete_manifest(tmp_path):
    mapping = _mini_mapping(tmp_path / "bad")
    mapping["synthetic.train_count"] = "40"
    mapping["scenario.c6.fraction"] = "0.01"  # floor(0.01 * 40) == 0 samples
    cfg_path = _write_cfg(tmp_path, mapping)
    assert main(["run", "--config", str(cfg_path)]) != 0
    manifest = json.loads((tmp_path / "bad" / "run_manifest.json").read_text())
    assert manifest["complete"] is False
    assert "error" in manifest
    assert (tmp_path / "bad" / "report.csv").read_text().startswith(",".join(CSV_COLUMNS))


def test_stage_subcommands_compose(tmp_path):
    out = tmp_path / "staged"
    mapping = _mini_mapping(out, methods="occ", samples=2)
    cfg_path = _write_cfg(tmp_path, mapping)
    assert main(["trojan", "--config", str(cfg_path)]) == 0
    assert os.path.exists(out / "models" / "c6.txm")
    assert main(["evaluate", "--config", str(cfg_path)]) == 0
    assert os.path.exists(out / "report.csv")
    assert main(["report", "--config", str(cfg_path)]) == 0
    lines = (out / "report.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].split(",")[6] == "occ"


def test_cli_method_override(tmp_path, capsys):
    out = tmp_path / "ovr"
    mapping = _mini_mapping(out, methods="bp,occ")
    cfg_path = _write_cfg(tmp_path, mapping)
    assert main(["run", "--config", str(cfg_path), "--methods", "bp"]) == 0
    lines = (out / "report.csv").read_text().splitlines()
    assert len(lines) == 2  # only bp evaluated


def test_cli_bad_config_exit_code(tmp_path):
    p = tmp_path / "broken.cfg"
    p.write_text("seed 3\n")
    assert main(["run", "--config", str(p)]) == 2


def test_stage_refuses_completed_run_dir(mini_run, tmp_path):
    out, _ = mini_run  # holds a completed run (manifest present)
    cfg_path = _write_cfg(tmp_path, _mini_mapping(out))
    assert main(["evaluate", "--config", str(cfg_path)]) == 2
    assert main(["trojan", "--config", str(cfg_path)]) == 2
    # report only re-derives the CSV from records.json and stays allowed
    assert main(["report", "--config", str(cfg_path)]) == 0


def test_selected_cases_all_flip_to_target(mini_run):
    out, result = mini_run
    from txai_bench.config import experiment_from_mapping
    from txai_bench.nn import load_model, predict_batch
    from txai_bench.runner import select_cases
    from txai_bench.data import generate_synthetic

    mapping = _mini_mapping(out, samples=10)
    cfg = experiment_from_mapping(mapping)
    trojaned = load_model(out / "models" / "c6.txm")
    _, test_set = generate_synthetic(cfg.dataset)
    cases, excluded, pool = select_cases(cfg, cfg.scenarios[0], trojaned, test_set)
    assert 0 < len(cases) <= 10
    assert pool == len(cases) + excluded
    for case in cases:
        assert case.true_label != case.target_label
        assert int(predict_batch(trojaned, case.stamped[None])[0]) == case.target_label


def test_thread_fanout_matches_serial(mini_run, monkeypatch):
    out, result = mini_run
    from txai_bench.config import experiment_from_mapping
    from txai_bench.nn import load_model
    from txai_bench.runner import evaluate_method, select_cases
    from txai_bench.data import generate_synthetic

    mapping = _mini_mapping(out, samples=4)
    cfg = experiment_from_mapping(mapping)
    trojaned = load_model(out / "models" / "c6.txm")
    _, test_set = generate_synthetic(cfg.dataset)
    cases, _, _ = select_cases(cfg, cfg.scenarios[0], trojaned, test_set)

    monkeypatch.delenv("TXAI_THREADS", raising=False)
    serial = evaluate_method(cfg, trojaned, "bp", cases)
    monkeypatch.setenv("TXAI_THREADS", "3")
    threaded = evaluate_method(cfg, trojaned, "bp", cases)
    for a, b in zip(serial, threaded):
        assert a.iou == b.iou
        assert a.detected_box == b.detected_box
        assert a.recovered_label == b.recovered_label
        assert a.l0_difference == b.l0_difference
