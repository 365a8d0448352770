"""Per-video metrics and the across-video summary written by ``evaluate``."""

from __future__ import annotations

import csv
import json
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from gridswitch.backends.base import EmbeddingBackend, PerceptualBackend
from gridswitch.metrics.flow import FarnebackParams, warp_error
from gridswitch.metrics.loss import combined_loss
from gridswitch.metrics.scores import clip_score, lpips
from gridswitch.metrics.ssim import ms_ssim, msssim_scale_count

CSV_COLUMNS = [
    "config_id",
    "ms_ssim_mean",
    "ms_ssim_std",
    "lpips_mean",
    "lpips_std",
    "tc_mean",
    "tc_std",
    "clip_mean",
    "clip_std",
    "combined_loss",
]


@dataclass
class VideoMetrics:
    video_id: str
    n_frames: int
    ms_ssim: float
    lpips: float | None
    temporal_consistency: float
    clip_score: float | None = None
    ms_ssim_scales: int = 5
    pairs: dict[str, list[float]] = field(default_factory=dict)


def evaluate_video(
    video_id: str,
    frames: Sequence[np.ndarray],
    *,
    perceptual: PerceptualBackend | None = None,
    embedding: EmbeddingBackend | None = None,
    text: str | None = None,
    flow_params: FarnebackParams = FarnebackParams(),
) -> VideoMetrics:
    """Score consecutive-frame pairs and average them."""
    if len(frames) < 2:
        raise ValueError(f"{video_id}: need >= 2 frames, got {len(frames)}")
    pairs = list(zip(frames[:-1], frames[1:]))
    ssim_vals = [ms_ssim(a, b) for a, b in pairs]
    tc_vals = [warp_error(a, b, flow_params) for a, b in pairs]
    per_pair = {"ms_ssim": ssim_vals, "temporal_consistency": tc_vals}
    lp = None
    if perceptual is not None:
        per_pair["lpips"] = [lpips(a, b, perceptual) for a, b in pairs]
        lp = float(np.mean(per_pair["lpips"]))
    cs = None
    if embedding is not None and text:
        cs = clip_score(frames, text, embedding)
    return VideoMetrics(
        video_id=video_id,
        n_frames=len(frames),
        ms_ssim=float(np.mean(ssim_vals)),
        lpips=lp,
        temporal_consistency=float(np.mean(tc_vals)),
        clip_score=cs,
        ms_ssim_scales=msssim_scale_count(np.shape(frames[0])),
        pairs=per_pair,
    )


def _mean_std(values: list[float | None]) -> tuple[float | None, float | None]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    # std across videos, population form
    return float(np.mean(vals)), float(np.std(vals))


@dataclass
class MetricsReport:
    videos: list[VideoMetrics]
    skipped: dict[str, str] = field(default_factory=dict)

    def summary(self) -> dict[str, float | None]:
        out = {}
        for key, attr in (
            ("ms_ssim", "ms_ssim"),
            ("lpips", "lpips"),
            ("tc", "temporal_consistency"),
            ("clip", "clip_score"),
        ):
            m, s = _mean_std([getattr(v, attr) for v in self.videos])
            out[f"{key}_mean"], out[f"{key}_std"] = m, s
        return out

    def rows(self) -> list[dict]:
        """One CSV row per video plus an aggregate row; loss ranks the video rows."""
        rows = []
        for v in self.videos:
            rows.append(
                {
                    "config_id": v.video_id,
                    "ms_ssim_mean": v.ms_ssim,
                    "ms_ssim_std": float(np.std(v.pairs.get("ms_ssim", [v.ms_ssim]))),
                    "lpips_mean": v.lpips,
                    "lpips_std": float(np.std(v.pairs["lpips"])) if "lpips" in v.pairs else None,
                    "tc_mean": v.temporal_consistency,
                    "tc_std": float(np.std(v.pairs.get("temporal_consistency", [v.temporal_consistency]))),
                    "clip_mean": v.clip_score,
                    "clip_std": 0.0 if v.clip_score is not None else None,
                    "combined_loss": None,
                }
            )
        if rows and all(r["lpips_mean"] is not None for r in rows):
            ranked = combined_loss(
                [
                    {
                        "config_id": r["config_id"],
                        "ms_ssim": r["ms_ssim_mean"],
                        "lpips": r["lpips_mean"],
                        "temporal_consistency": r["tc_mean"],
                    }
                    for r in rows
                ]
            )
            losses = {r.config_id: r.loss for r in ranked}
            for r in rows:
                r["combined_loss"] = losses[r["config_id"]]
        agg = {"config_id": "aggregate", **self.summary(), "combined_loss": None}
        rows.append(agg)
        return rows

    def write(self, out_dir: str | Path, csv_name: str = "summary.csv") -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for v in self.videos:
            (out_dir / f"{v.video_id}.json").write_text(json.dumps(asdict(v), indent=2) + "\n")
        if self.skipped:
            (out_dir / "skipped.json").write_text(json.dumps(self.skipped, indent=2) + "\n")
        csv_path = out_dir / csv_name
        write_csv(csv_path, self.rows(), CSV_COLUMNS)
        return csv_path


def write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in columns})
