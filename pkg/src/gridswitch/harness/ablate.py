"""Four-arm ablation: external vs LLM framewise prompts, each with and without grid switching."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from gridswitch.harness.config import ConfigError, RunConfig, build_config
from gridswitch.harness.evaluate import evaluate_dirs
from gridswitch.harness.rundir import run_generate
from gridswitch.metrics.report import CSV_COLUMNS, write_csv
from gridswitch.text.prompts import PromptPlan, enforce_token_budget

# arm directory -> (uses external prompts, grid switching on)
ARMS: dict[str, tuple[bool, bool]] = {
    "cg": (True, False),
    "ofp": (False, False),
    "cg_grps": (True, True),
    "ofp_grps": (False, True),
}

ARM_LABELS = {"cg": "CG", "ofp": "OFP", "cg_grps": "CG + GrPS", "ofp_grps": "OFP + GrPS"}


def load_external_prompts(path: str | Path, tokenizer, user_text: str = "") -> PromptPlan:
    """Read ``{"fixed": str, "dynamics": [str, ...]}``; token counts are recomputed and budget-checked."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"external prompts file not found: {path}"])
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
        fixed, dynamics = obj["fixed"], obj["dynamics"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError([f"{path}: expected an object with 'fixed' and 'dynamics' ({exc})"]) from exc
    if not isinstance(fixed, str) or not isinstance(dynamics, list) or not all(isinstance(d, str) for d in dynamics):
        raise ConfigError([f"{path}: 'fixed' must be a string and 'dynamics' a list of strings"])
    frames = [enforce_token_budget(fixed, d, tokenizer) for d in dynamics]
    return PromptPlan(obj.get("user_text") or user_text, frames, [])


@dataclass
class AblationResult:
    arm_dirs: dict[str, Path]
    csv_path: Path


def run_ablation(
    user_text: str,
    cfg: RunConfig,
    external_prompts: str | Path,
    out_dir: str | Path,
) -> AblationResult:
    out = Path(out_dir)
    backends = cfg.backends()
    external = load_external_prompts(external_prompts, backends.tokenizer, user_text)
    if len(external.frames) != cfg["num_frames"]:
        raise ConfigError(
            [f"external prompts have {len(external.frames)} frames, num_frames is {cfg['num_frames']}"]
        )
    arm_dirs = {}
    for arm, (use_external, grps) in ARMS.items():
        arm_cfg = build_config({**cfg.values, "grps": grps}, environ={})
        arm_dirs[arm] = out / arm
        run_generate(user_text, arm_cfg, arm_dirs[arm], plan=external if use_external else None, backends=backends)

    report = evaluate_dirs(list(arm_dirs.values()), perceptual=backends.perceptual, embedding=backends.embedding)
    report.write(out / "reports")
    rows = []
    for arm, row in zip(ARMS, report.rows()):
        rows.append({"arm": ARM_LABELS[arm], **row})
    csv_path = out / "ablation.csv"
    write_csv(csv_path, rows, ["arm", *[c for c in CSV_COLUMNS if c != "config_id"]])
    return AblationResult(arm_dirs, csv_path)
