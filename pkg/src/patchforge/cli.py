"""patchforge command line: attack runs, ablation sweeps, demo data, reports.

Exit codes: 0 = completed (attack failure is a result, not an error),
2 = usage/config/dataset error, 3 = tasks failed to execute (for example
an unreachable remote detector); completed per-task results are always
preserved on disk.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .attack import AttackTask
from .config import (
    ORACLE_REMOTE,
    ORACLE_TOY,
    ConfigError,
    RunConfig,
    apply_cli_overrides,
    config_echo,
    load_run_config,
)
from .dataset import DatasetError, generate_demo, load_dataset
from .evaluation import (
    K_SWEEP_DEFAULT,
    MODES,
    SHAPE_SWEEP_DEFAULT,
    EvalRecord,
    UndefinedAsrError,
    ablate_k,
    ablate_shape,
    ablation_to_csv,
    asr,
    emit_report,
    run_task,
    task_seed,
)
from .fusion import export_patch_rgba, save_png
from .geometry import rasterize_mask
from .oracle import RemoteOracle, ToyInfraredOracle, ToyVisibleOracle

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_TASK_FAILURE = 3


def make_oracle_factory(cfg: RunConfig):
    """Per-task oracle constructor; every task gets fresh query counters."""
    ocfg = cfg.oracle
    if ocfg.kind == ORACLE_TOY:

        def factory(task: AttackTask):
            return (
                ToyInfraredOracle(
                    task.box,
                    class_label=task.class_label,
                    dark_threshold=ocfg.dark_threshold,
                    saturation=ocfg.infrared_saturation,
                ),
                ToyVisibleOracle(
                    task.box,
                    reference_color=ocfg.reference_color,
                    class_label=task.class_label,
                    color_threshold=ocfg.color_threshold,
                    saturation=ocfg.visible_saturation,
                ),
            )

        return factory
    if ocfg.kind == ORACLE_REMOTE:
        if not ocfg.endpoint:
            raise ConfigError("remote oracle requires an endpoint (flag, env, or config)")

        def factory(task: AttackTask):
            return (
                RemoteOracle(ocfg.endpoint, "infrared", timeout=ocfg.timeout, retries=ocfg.retries),
                RemoteOracle(ocfg.endpoint, "visible", timeout=ocfg.timeout, retries=ocfg.retries),
            )

        return factory
    raise ConfigError(f"unknown oracle kind {ocfg.kind!r}")


def _load_tasks(cfg: RunConfig):
    if not cfg.dataset.annotations:
        raise ConfigError("no dataset.annotations configured")
    tasks, issues = load_dataset(cfg.dataset.annotations, cfg.dataset.image_root, delta=cfg.delta)
    for issue in issues:
        print(f"[dataset] line {issue.line}: {issue.kind}: {issue.reason}", file=sys.stderr)
    return tasks


def _export_patches(out: Path, record: EvalRecord, task: AttackTask) -> None:
    if record.outcome is None:
        return
    patch_dir = out / "patches"
    patch_dir.mkdir(parents=True, exist_ok=True)
    rgba = export_patch_rgba(record.outcome.patch, task.box.w, task.box.h)
    save_png(patch_dir / f"{record.task_id}_visible.png", rgba)
    mask = rasterize_mask(record.outcome.patch.shape, task.box.w, task.box.h)
    save_png(patch_dir / f"{record.task_id}_infrared_mask.png", mask.astype(float))


def cmd_attack(args: argparse.Namespace) -> int:
    try:
        cfg = _resolve_config(args)
        tasks = _load_tasks(cfg)
    except (ConfigError, DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.dry_run:
        print(f"dry run: config OK, {len(tasks)} task(s) ready, 0 oracle queries")
        return EXIT_OK

    try:
        factory = make_oracle_factory(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    echo = config_echo(cfg)
    attack_cfg = cfg.attack_config()

    records: list[EvalRecord] = []
    failures: list[tuple[str, str]] = []

    def run_one(index: int, task: AttackTask):
        seed = task_seed(cfg.seed, index)
        record = run_task(task, factory, replace(attack_cfg, seed=seed))
        return seed, record

    workers = cfg.worker_count()
    if workers > 1 and len(tasks) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_one, i, t) for i, t in enumerate(tasks)]
            results = []
            for task, fut in zip(tasks, futures):
                try:
                    results.append((task, *fut.result()))
                except Exception as exc:
                    failures.append((task.task_id, str(exc)))
    else:
        results = []
        for i, task in enumerate(tasks):
            try:
                results.append((task, *run_one(i, task)))
            except Exception as exc:
                failures.append((task.task_id, str(exc)))

    for task, seed, record in results:
        records.append(record)
        _write_task_outputs_json(out, record, echo, seed)
        _export_patches(out, record, task)

    if records:
        summaries = []
        for mode in MODES:
            try:
                summaries.append(asr(records, cfg.delta, mode))
            except UndefinedAsrError as exc:
                print(f"[summary] {mode}: {exc}", file=sys.stderr)
        for summary in summaries:
            emit_report([summary], out / f"{summary.mode}_summary.csv")
        emit_report(summaries, out / "summary.csv", out / "records.json", records)
        for summary in summaries:
            print(
                f"{summary.mode}: N={summary.n_counted} "
                f"ASR={summary.asr:.4f} mean_queries={summary.mean_queries:.2f}"
            )

    for task_id, reason in failures:
        print(f"[failed] {task_id}: {reason}", file=sys.stderr)
    if failures:
        print(f"error: {len(failures)} of {len(tasks)} task(s) failed to execute", file=sys.stderr)
        return EXIT_TASK_FAILURE
    return EXIT_OK


def _write_task_outputs_json(out: Path, record: EvalRecord, echo: dict, seed: int) -> None:
    outcome_dir = out / "outcomes"
    outcome_dir.mkdir(parents=True, exist_ok=True)
    payload = dict(record.to_dict())
    payload["seed"] = seed
    payload["config"] = echo
    (outcome_dir / f"{record.task_id}.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8"
    )


def cmd_ablate(args: argparse.Namespace) -> int:
    if args.sweep not in ("shape", "k"):
        print(f"error: unknown sweep {args.sweep!r} (use 'shape' or 'k')", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _resolve_config(args)
        tasks = _load_tasks(cfg)
        factory = make_oracle_factory(cfg)
    except (ConfigError, DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    attack_cfg = cfg.attack_config()
    try:
        if args.sweep == "shape":
            rows = ablate_shape(tasks, factory, attack_cfg, delta=cfg.delta, jobs=cfg.worker_count())
        else:
            rows = ablate_k(tasks, factory, attack_cfg, delta=cfg.delta, jobs=cfg.worker_count())
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TASK_FAILURE
    csv_text = ablation_to_csv(rows)
    (out / f"ablation_{args.sweep}.csv").write_text(csv_text, encoding="utf-8")
    print(csv_text, end="")
    return EXIT_OK


def cmd_demo(args: argparse.Namespace) -> int:
    try:
        annotations = generate_demo(args.out, args.count, args.seed)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"wrote {args.count} demo pair(s) under {args.out} ({annotations.name})")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    records_path = run_dir / "records.json"
    if not records_path.exists():
        print(f"error: {records_path} not found", file=sys.stderr)
        return EXIT_USAGE
    from .evaluation import summaries_from_json

    _, records = summaries_from_json(records_path)
    if not records:
        print("error: records.json holds no task records", file=sys.stderr)
        return EXIT_USAGE
    summaries = []
    for mode in MODES:
        try:
            summaries.append(asr(records, args.delta, mode))
        except UndefinedAsrError:
            continue
    for summary in summaries:
        emit_report([summary], run_dir / f"{summary.mode}_summary.csv")
    emit_report(summaries, run_dir / "summary.csv")
    print(f"rebuilt {len(summaries)} summary file(s) in {run_dir}")
    return EXIT_OK


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_run_config(args.config)
    return apply_cli_overrides(
        cfg,
        seed=args.seed,
        jobs=args.jobs,
        delta=args.delta,
        out_dir=args.out,
        oracle_kind=args.oracle,
        endpoint=args.endpoint,
        n_vertices=args.vertices,
        grid_k=args.grid_k,
    )


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="TOML run configuration")
    p.add_argument("--seed", type=int, default=None, help="global seed (overrides config)")
    p.add_argument("--jobs", type=int, default=None, help="task-level worker count")
    p.add_argument("--delta", type=float, default=None, help="confidence threshold")
    p.add_argument("--out", default=None, help="output (run) directory")
    p.add_argument("--oracle", choices=(ORACLE_TOY, ORACLE_REMOTE), default=None)
    p.add_argument("--endpoint", default=None, help="remote detector URL")
    p.add_argument("--vertices", type=int, default=None, help="polygon vertex count")
    p.add_argument("--grid-k", dest="grid_k", type=int, default=None, help="color grid dimension")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patchforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_attack = sub.add_parser("attack", help="run the two-stage attack over a dataset")
    _add_run_flags(p_attack)
    p_attack.add_argument("--dry-run", action="store_true", help="validate config and dataset only")
    p_attack.set_defaults(func=cmd_attack)

    p_ablate = sub.add_parser("ablate", help="sweep vertex count or grid dimension")
    p_ablate.add_argument("sweep", choices=("shape", "k"))
    _add_run_flags(p_ablate)
    p_ablate.set_defaults(func=cmd_ablate)

    p_demo = sub.add_parser("demo", help="generate synthetic paired scenes for the toy oracles")
    p_demo.add_argument("--out", required=True, help="output directory")
    p_demo.add_argument("--count", type=int, default=5)
    p_demo.add_argument("--seed", type=int, default=0)
    p_demo.set_defaults(func=cmd_demo)

    p_report = sub.add_parser("report", help="rebuild summary files from a run directory")
    p_report.add_argument("--run-dir", required=True)
    p_report.add_argument("--delta", type=float, default=0.5)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
