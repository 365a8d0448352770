"""Resumable grid search over pipeline hyperparameters.

Space files are JSON objects mapping config keys to value lists, plus an
optional ``"base"`` object of fixed config values. ``guidance_scale`` may
also be given as ``{"start": 3.0, "stop": 13.0, "num": 6}``.

Completed points are recorded in a ledger directory next to the output CSV,
one ``<point_id>.json`` per point, written atomically. A point is claimed by
creating ``<point_id>.claim`` with ``O_EXCL`` so concurrent processes never
compute the same point; claims left by dead processes are taken over.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import shutil
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from gridswitch.harness.config import SCHEMA, ConfigError, RunConfig, build_config
from gridswitch.harness.rundir import run_generate
from gridswitch.metrics.loss import combined_loss
from gridswitch.metrics.report import evaluate_video, write_csv

DEFAULT_AXES = {
    "batch_size": [1, 2, 3],
    "intersection_strategy": ["First", "Previous"],
    "guidance_scale": [3.0, 5.0, 7.0, 9.0, 11.0, 13.0],
    "multi_prompt_strategy": ["PreviousFrame", "BaseFrame", "VideoText"],
    "falloff": [1.0, 2.0, 3.0],
}

METRIC_COLUMNS = [
    "ms_ssim_mean",
    "ms_ssim_std",
    "lpips_mean",
    "lpips_std",
    "tc_mean",
    "tc_std",
    "clip_mean",
    "clip_std",
]


@dataclass
class GridSearchSpace:
    axes: dict[str, list[Any]]
    base: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "GridSearchSpace":
        obj = dict(obj)
        base = dict(obj.pop("base", {}) or {})
        axes = {}
        problems = []
        for key, values in obj.items():
            if key not in SCHEMA:
                problems.append(f"{key}: not a config key")
                continue
            if isinstance(values, Mapping):
                try:
                    values = np.linspace(float(values["start"]), float(values["stop"]), int(values["num"])).tolist()
                except (KeyError, TypeError, ValueError):
                    problems.append(f"{key}: range needs numeric start, stop and num")
                    continue
            if not isinstance(values, list):
                problems.append(f"{key}: expected a list of values")
                continue
            axes[key] = values
        if problems:
            raise ConfigError(problems)
        return cls(axes, base)

    @classmethod
    def load(cls, path: str | Path) -> "GridSearchSpace":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"{path}: {exc}"]) from exc
        if not isinstance(obj, dict):
            raise ConfigError([f"{path}: expected a JSON object"])
        return cls.from_json(obj)

    @property
    def empty(self) -> bool:
        return not self.axes or any(len(v) == 0 for v in self.axes.values())

    def points(self) -> list[dict[str, Any]]:
        if self.empty:
            return []
        keys = list(self.axes)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.axes[k] for k in keys))]

    def validate(self, base_values: Mapping[str, Any] | None = None) -> None:
        if self.empty:
            raise ConfigError(["grid search space is empty"])
        problems = []
        for p in self.points():
            try:
                build_config({**(base_values or {}), **self.base, **p}, environ={})
            except ConfigError as exc:
                problems.append(f"{point_id(p)} {p}: {exc}")
        if problems:
            raise ConfigError(problems)


def point_id(point: Mapping[str, Any]) -> str:
    canon = json.dumps(point, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


class Ledger:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def result_path(self, pid: str) -> Path:
        return self.root / f"{pid}.json"

    def done(self, pid: str) -> bool:
        return self.result_path(pid).is_file()

    def load(self, pid: str) -> dict[str, Any]:
        return json.loads(self.result_path(pid).read_text(encoding="utf-8"))

    def claim(self, pid: str) -> bool:
        path = self.root / f"{pid}.claim"
        for _ in range(2):
            try:
                fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                try:
                    owner = int(path.read_text() or "0")
                except (OSError, ValueError):
                    owner = 0
                if owner and owner != os.getpid() and _pid_alive(owner):
                    return False
                path.unlink(missing_ok=True)
                continue
            with os.fdopen(fd, "w") as fh:
                fh.write(str(os.getpid()))
            return True
        return False

    def release(self, pid: str) -> None:
        (self.root / f"{pid}.claim").unlink(missing_ok=True)

    def record(self, pid: str, result: Mapping[str, Any]) -> None:
        tmp = self.root / f".{pid}.{os.getpid()}.tmp"
        tmp.write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, self.result_path(pid))


def _mean_std(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    return float(np.mean(vals)), float(np.std(vals))


def evaluate_point(
    cfg: RunConfig,
    prompts: Sequence[tuple[int, str]],
    work_dir: Path,
    keep_runs: bool = False,
) -> dict[str, Any]:
    """Generate and score every prompt under one configuration."""
    backends = cfg.backends()
    per_video = []
    for prompt_id, text in prompts:
        run_dir = work_dir / f"prompt_{prompt_id:03d}"
        seq = run_generate(text, cfg, run_dir, backends=backends)
        m = evaluate_video(
            f"prompt_{prompt_id:03d}",
            seq.images,
            perceptual=backends.perceptual,
            embedding=backends.embedding,
            text=text,
        )
        per_video.append(m)
        if not keep_runs:
            shutil.rmtree(run_dir, ignore_errors=True)
    out: dict[str, Any] = {}
    for col, attr in (("ms_ssim", "ms_ssim"), ("lpips", "lpips"), ("tc", "temporal_consistency"), ("clip", "clip_score")):
        out[f"{col}_mean"], out[f"{col}_std"] = _mean_std([getattr(v, attr) for v in per_video])
    out["videos"] = [v.video_id for v in per_video]
    return out


@dataclass
class GridSearchResult:
    rows: list[dict[str, Any]]
    computed: list[str]
    skipped: list[str]
    csv_path: Path


PointEvaluator = Callable[[RunConfig, Sequence[tuple[int, str]], Path], Mapping[str, Any]]


def run_gridsearch(
    space: GridSearchSpace,
    prompts: Sequence[tuple[int, str]],
    out_csv: str | Path,
    *,
    base_values: Mapping[str, Any] | None = None,
    ledger_dir: str | Path | None = None,
    work_dir: str | Path | None = None,
    limit: int | None = None,
    evaluator: PointEvaluator | None = None,
) -> GridSearchResult:
    """Evaluate every point not yet in the ledger, then rank all completed points.

    ``limit`` caps the number of new computations in this invocation.
    """
    space.validate(base_values)
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    ledger = Ledger(ledger_dir or out_csv.with_name(out_csv.stem + ".ledger"))
    work = Path(work_dir) if work_dir else ledger.root / "runs"
    evaluator = evaluator or evaluate_point

    computed, skipped = [], []
    for point in space.points():
        pid = point_id(point)
        if ledger.done(pid):
            continue
        if limit is not None and len(computed) >= limit:
            break
        if not ledger.claim(pid):
            skipped.append(pid)
            continue
        try:
            if ledger.done(pid):
                continue
            cfg = build_config({**(base_values or {}), **space.base, **point})
            metrics = dict(evaluator(cfg, prompts, work / pid))
            ledger.record(pid, {"config_id": pid, "point": point, "metrics": metrics})
            computed.append(pid)
        finally:
            ledger.release(pid)

    rows = []
    for point in space.points():
        pid = point_id(point)
        if ledger.done(pid):
            rec = ledger.load(pid)
            rows.append({"config_id": pid, **point, **{k: rec["metrics"].get(k) for k in METRIC_COLUMNS}})
    if rows:
        ranked = combined_loss(
            [
                {"config_id": r["config_id"], "ms_ssim": r["ms_ssim_mean"], "lpips": r["lpips_mean"],
                 "temporal_consistency": r["tc_mean"]}
                for r in rows
            ]
        )
        order = {r.config_id: (k + 1, r.loss) for k, r in enumerate(ranked)}
        for r in rows:
            r["rank"], r["combined_loss"] = order[r["config_id"]]
        rows.sort(key=lambda r: r["rank"])
    columns = ["rank", "config_id", *space.axes.keys(), *METRIC_COLUMNS, "combined_loss"]
    write_csv(out_csv, rows, columns)
    return GridSearchResult(rows, computed, skipped, out_csv)
