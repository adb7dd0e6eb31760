"""End-to-end pipeline: train, backdoor, explain, localize, score, report.

Every random choice flows from the experiment seed through named sub-seeds,
so a rerun with the same config reproduces every data-derived byte of the
reports. Saliency wall-clock timings are the one exception: they are real
measurements and vary run to run.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .arch import build_architecture
from .config import ExperimentConfig, IdxPaths, ScenarioConfig, config_digest, derive_seed
from .data import LabeledDataset, generate_synthetic, load_idx
from .imaging import render_overlay, write_pgm, write_ppm
from .localize import BoundingBox, detect_box
from .metrics import EvalRecord, ImageResult, iou, l0_difference, recover
from .nn import Network, load_model, predict_batch, save_model, train
from .saliency import explain
from .trojan import (
    MaterializedTrigger,
    PoisonEntry,
    ground_truth_box,
    materialize,
    poison_dataset,
    stamp,
)

CSV_COLUMNS = (
    "model", "scenario", "location", "pattern", "size", "target_mode",
    "method", "iou_mean", "rr", "rd", "cc_mean", "mr", "ca",
)


class RunError(RuntimeError):
    pass


def worker_count() -> int:
    """TXAI_THREADS caps the per-image fan-out; default is serial."""
    try:
        return max(1, int(os.environ.get("TXAI_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class EvalCase:
    original: np.ndarray
    stamped: np.ndarray
    true_label: int
    target_label: int
    true_box: BoundingBox


@dataclass
class ScenarioState:
    config: ScenarioConfig
    trojaned: Network
    mr: float
    ca: float
    cases: list[EvalCase]
    excluded_not_flipped: int
    pool_size: int


def load_dataset(cfg: ExperimentConfig) -> tuple[LabeledDataset, LabeledDataset]:
    if isinstance(cfg.dataset, IdxPaths):
        return (
            load_idx(cfg.dataset.train_images, cfg.dataset.train_labels),
            load_idx(cfg.dataset.test_images, cfg.dataset.test_labels),
        )
    return generate_synthetic(cfg.dataset)


def _num_classes(cfg: ExperimentConfig, train_set: LabeledDataset) -> int:
    if isinstance(cfg.dataset, IdxPaths):
        return int(train_set.labels.max()) + 1
    return cfg.dataset.classes


def train_clean(cfg: ExperimentConfig, train_set: LabeledDataset):
    classes = _num_classes(cfg, train_set)
    init_net = build_architecture(
        cfg.arch_id, train_set.image_dims, classes,
        seed=derive_seed(cfg.seed, "init"), init=cfg.train.init,
    )
    clean, history = train(init_net, train_set.images, train_set.labels, cfg.train)
    return init_net, clean, history


def train_scenario(cfg: ExperimentConfig, scenario: ScenarioConfig,
                   init_net: Network, train_set: LabeledDataset) -> Network:
    poisoned = poison_dataset(train_set.images, train_set.labels, scenario.poison)
    trojaned, _ = train(init_net, poisoned.images, poisoned.labels, cfg.train)
    return trojaned


def _resolve_trigger(entry: PoisonEntry, dims, rng) -> MaterializedTrigger:
    return materialize(entry.trigger, dims, rng)


def scenario_metrics(cfg: ExperimentConfig, scenario: ScenarioConfig,
                     trojaned: Network, test_set: LabeledDataset) -> tuple[float, float]:
    """Model-level MR (mean over entries, on stamped off-target test images)
    and CA (clean test accuracy of the backdoored model)."""
    rng = np.random.default_rng(derive_seed(cfg.seed, "mr", scenario.scenario_id))
    dims = test_set.image_dims
    rates = []
    for entry in scenario.poison.entries:
        keep = test_set.labels != entry.target_label
        images = test_set.images[keep]
        stamped = np.empty_like(images)
        for i, img in enumerate(images):
            stamped[i] = stamp(img, _resolve_trigger(entry, dims, rng))
        preds = predict_batch(trojaned, stamped)
        rates.append(float(np.mean(preds == entry.target_label)))
    preds = predict_batch(trojaned, test_set.images)
    ca = float(np.mean(preds == test_set.labels))
    return float(np.mean(rates)), ca


def select_cases(cfg: ExperimentConfig, scenario: ScenarioConfig,
                 trojaned: Network, test_set: LabeledDataset) -> tuple[list[EvalCase], int, int]:
    """Pick the shared evaluation set: stamped test images the backdoored
    model actually sends to the target label. Entries of a multi-target
    scenario take turns, so methods see the same paired images. Returns
    (cases, excluded count, candidate pool size)."""
    rng = np.random.default_rng(derive_seed(cfg.seed, "stamp", scenario.scenario_id))
    order = rng.permutation(len(test_set))
    dims = test_set.image_dims
    entries = scenario.poison.entries
    cases: list[EvalCase] = []
    excluded = 0
    pool = 0
    for i in order:
        if len(cases) >= cfg.eval_samples:
            break
        # entries take turns per attempt, so one weak trigger cannot starve
        # the others
        entry = entries[pool % len(entries)]
        true_label = int(test_set.labels[i])
        if true_label == entry.target_label:
            continue
        pool += 1
        trig = _resolve_trigger(entry, dims, rng)
        stamped = stamp(test_set.images[i], trig)
        pred = int(predict_batch(trojaned, stamped[None])[0])
        if pred != entry.target_label:
            excluded += 1
            continue
        cases.append(EvalCase(
            original=test_set.images[i],
            stamped=stamped,
            true_label=true_label,
            target_label=entry.target_label,
            true_box=ground_truth_box(trig),
        ))
    return cases, excluded, pool


def evaluate_method(cfg: ExperimentConfig, trojaned: Network, method: str,
                    cases: list[EvalCase], artifacts_dir: str | None = None) -> list[ImageResult]:
    """Explain each case, localize, recover, and score. With TXAI_THREADS >
    1 the per-image work fans out; results keep case order either way."""

    def one(indexed_case) -> tuple[ImageResult, object, object]:
        k, case = indexed_case
        smap = explain(trojaned, case.stamped, case.target_label, method, cfg.method_cfg)
        detected = detect_box(smap.values, cfg.canny_cfg)
        if detected is None:
            score = 0.0
            recovered_img = case.stamped  # no detection: nothing recovered
        else:
            score = iou(case.true_box, detected)
            recovered_img = recover(case.stamped, case.original, detected).values
        recovered_label = int(predict_batch(trojaned, recovered_img[None])[0])
        diff = l0_difference(case.original, recovered_img)
        result = ImageResult(
            true_box=case.true_box,
            detected_box=detected,
            iou=score,
            true_label=case.true_label,
            recovered_label=recovered_label,
            l0_difference=diff,
            wall_clock_seconds=smap.wall_clock_seconds,
        )
        return result, smap, detected

    workers = worker_count()
    indexed = list(enumerate(cases))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(one, indexed))
    else:
        outputs = [one(ic) for ic in indexed]

    if artifacts_dir is not None:
        os.makedirs(artifacts_dir, exist_ok=True)
        for k, (result, smap, detected) in enumerate(outputs):
            write_pgm(os.path.join(artifacts_dir, f"img{k:03d}.pgm"), smap.values)
            overlay = render_overlay(cases[k].stamped, smap.values, cases[k].true_box, detected)
            write_ppm(os.path.join(artifacts_dir, f"img{k:03d}_overlay.ppm"), overlay)
    return [r for r, _, _ in outputs]


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.6f}"


def records_to_csv(records: list[EvalRecord], scenarios: dict[str, ScenarioConfig]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        sc = scenarios[r.scenario_id]
        lines.append(",".join([
            r.model_id, r.scenario_id, sc.location_label, sc.pattern_label,
            str(sc.size_label), sc.target_mode, r.method,
            _fmt(r.iou_mean), _fmt(r.rr), _fmt(r.rd), _fmt(r.cc_mean),
            _fmt(r.mr), _fmt(r.ca),
        ]))
    return "\n".join(lines) + "\n"


def _box_json(box: BoundingBox | None):
    return None if box is None else list(box.as_tuple())


def records_to_json(records: list[EvalRecord], scenarios: dict[str, ScenarioConfig]) -> str:
    payload = []
    for r in records:
        sc = scenarios[r.scenario_id]
        payload.append({
            "model": r.model_id,
            "scenario": r.scenario_id,
            "location": sc.location_label,
            "pattern": sc.pattern_label,
            "size": sc.size_label,
            "target_mode": sc.target_mode,
            "method": r.method,
            "iou_mean": r.iou_mean,
            "rr": r.rr,
            "rd": r.rd,
            "cc_mean": r.cc_mean,
            "mr": r.mr,
            "ca": r.ca,
            "images": [
                {
                    "true_box": _box_json(img.true_box),
                    "detected_box": _box_json(img.detected_box),
                    "iou": img.iou,
                    "true_label": img.true_label,
                    "recovered_label": img.recovered_label,
                    "l0_difference": img.l0_difference,
                    "wall_clock_seconds": img.wall_clock_seconds,
                }
                for img in r.images
            ],
        })
    return json.dumps(payload, indent=2) + "\n"


def write_reports(out_dir: str, records: list[EvalRecord],
                  scenarios: dict[str, ScenarioConfig]) -> tuple[str, str]:
    csv_path = os.path.join(out_dir, "report.csv")
    json_path = os.path.join(out_dir, "records.json")
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        f.write(records_to_csv(records, scenarios))
    with open(json_path, "w", encoding="utf-8", newline="") as f:
        f.write(records_to_json(records, scenarios))
    return csv_path, json_path


def guard_output_dir(out_dir: str, force: bool) -> None:
    manifest = os.path.join(out_dir, "run_manifest.json")
    if os.path.exists(manifest) and not force:
        raise RunError(f"{out_dir} already holds a run (use --force to overwrite)")
    os.makedirs(out_dir, exist_ok=True)


def write_manifest(out_dir: str, cfg: ExperimentConfig, config_text: str,
                   scenario_info: dict, complete: bool, error: str | None = None) -> None:
    manifest = {
        "config_sha256": config_digest(config_text),
        "seed": cfg.seed,
        "versions": {
            "txai_bench": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "eval_samples": cfg.eval_samples,
        "methods": list(cfg.methods),
        "scenarios": scenario_info,
        "complete": complete,
    }
    if error is not None:
        manifest["error"] = error
    path = os.path.join(out_dir, "run_manifest.json")
    with open(path, "w", encoding="utf-8", newline="") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


# --------------------------------------------------------------------------
# full pipeline
# --------------------------------------------------------------------------

@dataclass
class RunResult:
    records: list[EvalRecord]
    csv_path: str
    json_path: str
    scenario_info: dict


def prepare_scenarios(
    cfg: ExperimentConfig,
    train_set: LabeledDataset,
    test_set: LabeledDataset,
    out_dir: str | None = None,
    trojaned_models: dict[str, Network] | None = None,
    clean: Network | None = None,
) -> tuple[list[ScenarioState], Network]:
    """Train (or adopt pre-trained) models and assemble evaluation cases.

    When ``out_dir`` is given the clean and per-scenario models are saved
    under ``out_dir/models``.
    """
    if clean is None:
        init_net, clean, _ = train_clean(cfg, train_set)
    else:
        init_net = None
    states = []
    for scenario in cfg.scenarios:
        if trojaned_models and scenario.scenario_id in trojaned_models:
            trojaned = trojaned_models[scenario.scenario_id]
        else:
            if init_net is None:
                raise RunError("pre-trained run is missing a scenario model")
            trojaned = train_scenario(cfg, scenario, init_net, train_set)
        mr, ca = scenario_metrics(cfg, scenario, trojaned, test_set)
        cases, excluded, pool = select_cases(cfg, scenario, trojaned, test_set)
        states.append(ScenarioState(scenario, trojaned, mr, ca, cases, excluded, pool))
    if out_dir is not None:
        models_dir = os.path.join(out_dir, "models")
        os.makedirs(models_dir, exist_ok=True)
        save_model(clean, os.path.join(models_dir, "clean.txm"))
        for st in states:
            save_model(st.trojaned, os.path.join(models_dir, f"{st.config.scenario_id}.txm"))
    return states, clean


def export_trigger_previews(cfg: ExperimentConfig, out_dir: str, dims) -> None:
    from .imaging import image_to_rgb

    trig_dir = os.path.join(out_dir, "triggers")
    os.makedirs(trig_dir, exist_ok=True)
    rng = np.random.default_rng(derive_seed(cfg.seed, "preview"))
    for scenario in cfg.scenarios:
        for k, entry in enumerate(scenario.poison.entries):
            trig = materialize(entry.trigger, dims, rng)
            canvas = stamp(np.zeros(dims), trig)
            write_ppm(
                os.path.join(trig_dir, f"{scenario.scenario_id}_entry{k}.ppm"),
                image_to_rgb(canvas),
            )


def run_experiment(cfg: ExperimentConfig, config_text: str, force: bool = False) -> RunResult:
    """Execute the whole pipeline and write reports plus a run manifest.

    On failure, whatever records exist are still written and the manifest is
    marked incomplete before the error propagates.
    """
    out_dir = cfg.out_dir
    guard_output_dir(out_dir, force)
    records: list[EvalRecord] = []
    scenario_map = {s.scenario_id: s for s in cfg.scenarios}
    scenario_info: dict = {}
    try:
        train_set, test_set = load_dataset(cfg)
        export_trigger_previews(cfg, out_dir, train_set.image_dims)
        states, _clean = prepare_scenarios(cfg, train_set, test_set, out_dir=out_dir)
        for st in states:
            sid = st.config.scenario_id
            scenario_info[sid] = {
                "mr": st.mr,
                "ca": st.ca,
                "eval_count": len(st.cases),
                "excluded_not_misclassified": st.excluded_not_flipped,
                "candidate_pool": st.pool_size,
            }
            if not st.cases:
                raise RunError(
                    f"scenario {sid}: no stamped test image flips to the target "
                    f"(mr={st.mr:.3f}); cannot evaluate explanations"
                )
            for method in cfg.methods:
                art_dir = os.path.join(out_dir, "maps", sid, method)
                results = evaluate_method(cfg, st.trojaned, method, st.cases, art_dir)
                records.append(EvalRecord(
                    model_id=cfg.arch_id,
                    scenario_id=sid,
                    method=method,
                    images=results,
                    mr=st.mr,
                    ca=st.ca,
                ))
    except Exception as exc:
        csv_path, json_path = write_reports(out_dir, records, scenario_map)
        write_manifest(out_dir, cfg, config_text, scenario_info, complete=False, error=str(exc))
        raise
    csv_path, json_path = write_reports(out_dir, records, scenario_map)
    write_manifest(out_dir, cfg, config_text, scenario_info, complete=True)
    return RunResult(records, csv_path, json_path, scenario_info)


def load_models(cfg: ExperimentConfig) -> tuple[Network, dict[str, Network]]:
    models_dir = os.path.join(cfg.out_dir, "models")
    clean_path = os.path.join(models_dir, "clean.txm")
    if not os.path.exists(clean_path):
        raise RunError(f"no trained models under {models_dir}; run the train/trojan stages first")
    clean = load_model(clean_path)
    trojaned = {}
    for scenario in cfg.scenarios:
        path = os.path.join(models_dir, f"{scenario.scenario_id}.txm")
        if not os.path.exists(path):
            raise RunError(f"missing trojaned model {path}; run the trojan stage first")
        trojaned[scenario.scenario_id] = load_model(path)
    return clean, trojaned
