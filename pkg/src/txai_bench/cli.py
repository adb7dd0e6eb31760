"""Command-line entry point.

Subcommands mirror the pipeline stages; ``run`` executes everything. All
stages read the same config file; --seed/--out/--methods override the
corresponding config keys.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import (
    ConfigError,
    ExperimentConfig,
    experiment_from_mapping,
    format_config,
    parse_config_text,
)
from .runner import (
    RunError,
    evaluate_method,
    load_dataset,
    load_models,
    prepare_scenarios,
    run_experiment,
    train_clean,
    train_scenario,
    write_manifest,
    write_reports,
)


def _load_config(args) -> tuple[ExperimentConfig, str]:
    with open(args.config, "r", encoding="utf-8") as f:
        text = f.read()
    flat = parse_config_text(text)
    if args.out is not None:
        flat["out.dir"] = args.out
    if args.seed is not None:
        flat["seed"] = str(args.seed)
    if args.methods is not None:
        flat["eval.methods"] = args.methods
    cfg = experiment_from_mapping(flat, base_dir=os.path.dirname(os.path.abspath(args.config)))
    return cfg, format_config(flat)


def _guard_stage(cfg: ExperimentConfig, force: bool) -> None:
    """Stages refuse to write into a directory holding a completed run."""
    if os.path.exists(os.path.join(cfg.out_dir, "run_manifest.json")) and not force:
        raise RunError(f"{cfg.out_dir} already holds a run (use --force to overwrite)")


def _cmd_train(args) -> int:
    cfg, _ = _load_config(args)
    _guard_stage(cfg, args.force)
    os.makedirs(os.path.join(cfg.out_dir, "models"), exist_ok=True)
    train_set, test_set = load_dataset(cfg)
    _, clean, history = train_clean(cfg, train_set)
    from .nn import save_model
    from .trojan import classification_accuracy

    path = os.path.join(cfg.out_dir, "models", "clean.txm")
    save_model(clean, path)
    acc = classification_accuracy(clean, test_set.images, test_set.labels)
    print(f"clean model -> {path} (test accuracy {acc:.4f})")
    for h in history:
        print(f"  epoch {h.epoch}: loss {h.loss:.4f} acc {h.accuracy:.4f}")
    return 0


def _cmd_trojan(args) -> int:
    cfg, _ = _load_config(args)
    _guard_stage(cfg, args.force)
    os.makedirs(os.path.join(cfg.out_dir, "models"), exist_ok=True)
    train_set, test_set = load_dataset(cfg)
    init_net, clean, _ = train_clean(cfg, train_set)
    from .nn import save_model
    from .runner import scenario_metrics

    save_model(clean, os.path.join(cfg.out_dir, "models", "clean.txm"))
    for scenario in cfg.scenarios:
        trojaned = train_scenario(cfg, scenario, init_net, train_set)
        mr, ca = scenario_metrics(cfg, scenario, trojaned, test_set)
        path = os.path.join(cfg.out_dir, "models", f"{scenario.scenario_id}.txm")
        save_model(trojaned, path)
        print(f"scenario {scenario.scenario_id}: mr {mr:.4f} ca {ca:.4f} -> {path}")
    return 0


def _cmd_explain(args) -> int:
    cfg, _ = _load_config(args)
    _guard_stage(cfg, args.force)
    clean, trojaned = load_models(cfg)
    train_set, test_set = load_dataset(cfg)
    states, _ = prepare_scenarios(cfg, train_set, test_set, trojaned_models=trojaned, clean=clean)
    for st in states:
        sid = st.config.scenario_id
        for method in cfg.methods:
            art_dir = os.path.join(cfg.out_dir, "maps", sid, method)
            evaluate_method(cfg, st.trojaned, method, st.cases, art_dir)
            print(f"{sid}/{method}: {len(st.cases)} maps -> {art_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg, text = _load_config(args)
    _guard_stage(cfg, args.force)
    clean, trojaned = load_models(cfg)
    train_set, test_set = load_dataset(cfg)
    states, _ = prepare_scenarios(cfg, train_set, test_set, trojaned_models=trojaned, clean=clean)
    from .metrics import EvalRecord

    records = []
    scenario_info = {}
    scenario_map = {s.scenario_id: s for s in cfg.scenarios}
    for st in states:
        sid = st.config.scenario_id
        scenario_info[sid] = {
            "mr": st.mr, "ca": st.ca, "eval_count": len(st.cases),
            "excluded_not_misclassified": st.excluded_not_flipped,
            "candidate_pool": st.pool_size,
        }
        for method in cfg.methods:
            art_dir = os.path.join(cfg.out_dir, "maps", sid, method)
            results = evaluate_method(cfg, st.trojaned, method, st.cases, art_dir)
            records.append(EvalRecord(cfg.arch_id, sid, method, results, st.mr, st.ca))
    csv_path, json_path = write_reports(cfg.out_dir, records, scenario_map)
    write_manifest(cfg.out_dir, cfg, text, scenario_info, complete=True)
    print(f"reports: {csv_path}, {json_path}")
    return 0


def _cmd_run(args) -> int:
    cfg, text = _load_config(args)
    try:
        result = run_experiment(cfg, text, force=args.force)
    except Exception as exc:  # any stage failure: partial results are on disk
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    print(f"{len(result.records)} records -> {result.csv_path}")
    for sid, info in result.scenario_info.items():
        print(f"  {sid}: mr {info['mr']:.4f} ca {info['ca']:.4f} "
              f"eval {info['eval_count']} excluded {info['excluded_not_misclassified']}")
    return 0


def _cmd_report(args) -> int:
    cfg, _ = _load_config(args)
    path = os.path.join(cfg.out_dir, "records.json")
    if not os.path.exists(path):
        print(f"no records at {path}; run evaluate first", file=sys.stderr)
        return 1
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    from .runner import CSV_COLUMNS, _fmt

    lines = [",".join(CSV_COLUMNS)]
    for rec in payload:
        lines.append(",".join([
            rec["model"], rec["scenario"], rec["location"], rec["pattern"],
            str(rec["size"]), rec["target_mode"], rec["method"],
            _fmt(rec["iou_mean"]), _fmt(rec["rr"]), _fmt(rec["rd"]),
            _fmt(rec["cc_mean"]), _fmt(rec["mr"]), _fmt(rec["ca"]),
        ]))
    csv_path = os.path.join(cfg.out_dir, "report.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="txai-bench",
        description="Score saliency methods by how well they localize known backdoor triggers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, doc in (
        ("train", _cmd_train, "train the clean model"),
        ("trojan", _cmd_trojan, "train backdoored models for every scenario"),
        ("explain", _cmd_explain, "write saliency maps and overlays for trained models"),
        ("evaluate", _cmd_evaluate, "score trained models and write reports"),
        ("run", _cmd_run, "full pipeline: train, trojan, explain, evaluate, report"),
        ("report", _cmd_report, "rewrite the CSV report from records.json"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default=None, help="output directory (overrides out.dir)")
        p.add_argument("--seed", type=int, default=None, help="global seed (overrides seed)")
        p.add_argument("--methods", default=None, help="comma-separated method list override")
        p.add_argument("--force", action="store_true", help="allow overwriting an existing run")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, RunError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
