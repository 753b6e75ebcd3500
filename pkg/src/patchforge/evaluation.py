"""Attack-success-rate aggregation and shape / grid-size ablation sweeps.

A task counts toward N for a mode only when the clean image was detected
in that mode's modality (both, for cross).  ASR is the success fraction
over counted tasks: re-measured confidence below the threshold, in both
modalities for cross mode.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .attack import AttackConfig, AttackOutcome, AttackTask, attack
from .geometry import MAX_VERTICES, MIN_VERTICES
from .oracle import DetectorOracle, target_confidence

MODES = ("infrared", "visible", "cross")
SHAPE_SWEEP_DEFAULT = (3, 4, 5, 6, 7, 8)
K_SWEEP_DEFAULT = (1, 6, 12, 18, 24, 30)

OracleFactory = Callable[[AttackTask], tuple[DetectorOracle, DetectorOracle]]


class UndefinedAsrError(ValueError):
    """No task in the record set counts toward N for the requested mode."""


@dataclass
class EvalRecord:
    task_id: str
    clean_detected_infrared: bool
    clean_detected_visible: bool
    outcome: AttackOutcome | None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "clean_detected_infrared": self.clean_detected_infrared,
            "clean_detected_visible": self.clean_detected_visible,
            "outcome": self.outcome.to_dict() if self.outcome is not None else None,
        }

    @staticmethod
    def from_dict(data: dict) -> "EvalRecord":
        outcome = data["outcome"]
        return EvalRecord(
            task_id=data["task_id"],
            clean_detected_infrared=data["clean_detected_infrared"],
            clean_detected_visible=data["clean_detected_visible"],
            outcome=AttackOutcome.from_dict(outcome) if outcome is not None else None,
        )


@dataclass
class EvalSummary:
    mode: str
    n_counted: int
    successes: int
    asr: float
    mean_queries: float
    mean_queries_infrared: float
    mean_queries_visible: float


@dataclass
class AblationRow:
    param: int
    n_counted: int
    asr: float
    mean_queries: float


def _counted(record: EvalRecord, mode: str) -> bool:
    if mode == "infrared":
        return record.clean_detected_infrared
    if mode == "visible":
        return record.clean_detected_visible
    return record.clean_detected_infrared and record.clean_detected_visible


def _succeeded(outcome: AttackOutcome, delta: float, mode: str) -> bool:
    inf_ok = outcome.infrared_final_confidence < delta
    vis_ok = outcome.visible_final_confidence < delta
    if mode == "infrared":
        return inf_ok
    if mode == "visible":
        return vis_ok
    return inf_ok and vis_ok


def asr(records: Sequence[EvalRecord], delta: float, mode: str) -> EvalSummary:
    """Success fraction over the tasks counted for this mode.

    mean_queries averages the mode's query counts over counted tasks;
    cross mode sums both modalities per task.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    counted = [r for r in records if _counted(r, mode)]
    if not counted:
        raise UndefinedAsrError(f"no task counts toward N in {mode} mode")
    if any(r.outcome is None for r in counted):
        raise ValueError("counted record without an attack outcome")
    successes = sum(_succeeded(r.outcome, delta, mode) for r in counted)
    queries_inf = [r.outcome.queries_infrared for r in counted]
    queries_vis = [r.outcome.queries_visible for r in counted]
    if mode == "infrared":
        per_task = queries_inf
    elif mode == "visible":
        per_task = queries_vis
    else:
        per_task = [qi + qv for qi, qv in zip(queries_inf, queries_vis)]
    n = len(counted)
    return EvalSummary(
        mode=mode,
        n_counted=n,
        successes=successes,
        asr=successes / n,
        mean_queries=sum(per_task) / n,
        mean_queries_infrared=sum(queries_inf) / n,
        mean_queries_visible=sum(queries_vis) / n,
    )


def task_seed(base_seed: int, index: int) -> int:
    """Per-task seed derived from (run seed, task index) only, so ablation
    cells over the same task set share seeds and stay comparable."""
    return int(np.random.SeedSequence((base_seed, index)).generate_state(1, dtype=np.uint64)[0])


def run_task(task: AttackTask, make_oracles: OracleFactory, cfg: AttackConfig) -> EvalRecord:
    """Clean-detection check, then the full two-stage attack.

    The clean check costs one query per modality on the task's fresh
    oracles and is included in the reported query counts.  Tasks that are
    undetected in both clean modalities are not attacked (outcome None).
    """
    infrared_oracle, visible_oracle = make_oracles(task)
    clean_inf = target_confidence(infrared_oracle, task.infrared_image, task.box, task.class_label) >= task.delta
    clean_vis = target_confidence(visible_oracle, task.visible_image, task.box, task.class_label) >= task.delta
    outcome = None
    if clean_inf or clean_vis:
        outcome = attack(task, infrared_oracle, visible_oracle, cfg)
    return EvalRecord(task.task_id, clean_inf, clean_vis, outcome)


def run_tasks(
    tasks: Sequence[AttackTask],
    make_oracles: OracleFactory,
    cfg: AttackConfig,
    jobs: int = 1,
) -> list[EvalRecord]:
    """Run every task with its derived seed; results in task order."""

    def one(pair: tuple[int, AttackTask]) -> EvalRecord:
        index, task = pair
        return run_task(task, make_oracles, replace(cfg, seed=task_seed(cfg.seed, index)))

    if jobs <= 1:
        return [one(pair) for pair in enumerate(tasks)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, enumerate(tasks)))


def ablate_shape(
    tasks: Sequence[AttackTask],
    make_oracles: OracleFactory,
    cfg: AttackConfig,
    delta: float = 0.5,
    n_values: Iterable[int] = SHAPE_SWEEP_DEFAULT,
    jobs: int = 1,
) -> list[AblationRow]:
    """Full attack per task per vertex count; identical seeds per cell."""
    rows = []
    for n in n_values:
        if not MIN_VERTICES <= n <= MAX_VERTICES:
            raise ValueError(f"vertex count must be in [{MIN_VERTICES}, {MAX_VERTICES}], got {n}")
        records = run_tasks(tasks, make_oracles, replace(cfg, n_vertices=n), jobs=jobs)
        summary = asr(records, delta, "cross")
        rows.append(AblationRow(param=n, n_counted=summary.n_counted, asr=summary.asr, mean_queries=summary.mean_queries))
    return rows


def ablate_k(
    tasks: Sequence[AttackTask],
    make_oracles: OracleFactory,
    cfg: AttackConfig,
    delta: float = 0.5,
    k_values: Iterable[int] = K_SWEEP_DEFAULT,
    jobs: int = 1,
) -> list[AblationRow]:
    """Full attack per task per grid dimension; identical seeds per cell."""
    rows = []
    for k in k_values:
        if k < 1:
            raise ValueError(f"grid dimension must be >= 1, got {k}")
        records = run_tasks(tasks, make_oracles, replace(cfg, grid_k=k), jobs=jobs)
        summary = asr(records, delta, "cross")
        rows.append(AblationRow(param=k, n_counted=summary.n_counted, asr=summary.asr, mean_queries=summary.mean_queries))
    return rows


def summaries_to_csv(summaries: Sequence[EvalSummary]) -> str:
    lines = ["mode,n_counted,asr,mean_queries"]
    for s in summaries:
        lines.append(f"{s.mode},{s.n_counted},{s.asr!r},{s.mean_queries!r}")
    return "\n".join(lines) + "\n"


def ablation_to_csv(rows: Sequence[AblationRow]) -> str:
    lines = ["param,n_counted,asr,mean_queries"]
    for r in rows:
        lines.append(f"{r.param},{r.n_counted},{r.asr!r},{r.mean_queries!r}")
    return "\n".join(lines) + "\n"


def emit_report(
    summaries: Sequence[EvalSummary],
    csv_path: str | Path,
    json_path: str | Path | None = None,
    records: Sequence[EvalRecord] | None = None,
) -> None:
    """Write the summary CSV and, optionally, a JSON mirror with the full
    per-task records.  Identical inputs always produce identical bytes."""
    Path(csv_path).write_text(summaries_to_csv(summaries), encoding="utf-8")
    if json_path is not None:
        payload = {
            "summaries": [asdict(s) for s in summaries],
            "records": [r.to_dict() for r in (records or [])],
        }
        Path(json_path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def summaries_from_json(path: str | Path) -> tuple[list[EvalSummary], list[EvalRecord]]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    summaries = [EvalSummary(**s) for s in payload["summaries"]]
    records = [EvalRecord.from_dict(r) for r in payload["records"]]
    return summaries, records
