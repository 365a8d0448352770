"""Run-directory layout.

::

    config.json          flat run configuration
    prompts.json         prompt plan
    stm_NNN.bin(.json)   switch-time matrix of member frame NNN
    frame_NNN.png        decoded frames
    animation.gif        looping animation
    run_manifest.json    seeds, backends, schedule, timings, status
    llm_audit.json       every LLM exchange

Frames and STMs are written as they are produced, so a failed run keeps
everything generated before the failure.
"""

from __future__ import annotations

import json
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image

from gridswitch.harness.config import RunConfig
from gridswitch.harness.gif import encode_gif, to_uint8
from gridswitch.latent_grid import save_stm
from gridswitch.orchestrator import FrameRecord, FrameSequence, generate_video
from gridswitch.text.prompts import PromptPlan, audit_to_json

# manifest keys that legitimately differ between identical runs
VOLATILE_KEYS = ("created_at", "timings")


def _dump(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def save_png(path: Path, image: np.ndarray) -> None:
    Image.fromarray(to_uint8(image)).save(path, format="PNG")


def load_png(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=float) / 255.0


def frame_paths(run_dir: str | Path) -> list[Path]:
    run_dir = Path(run_dir)
    paths = sorted(run_dir.glob("frame_*.png"))
    return paths or sorted(run_dir.glob("*.png"))


class RunWriter:
    def __init__(self, out_dir: str | Path, cfg: RunConfig, user_text: str):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.user_text = user_text
        self.records: list[FrameRecord] = []
        self.t0 = time.perf_counter()
        self.frame_times: list[float] = []
        _dump(self.out / "config.json", cfg.to_json())

    def on_frame(self, rec: FrameRecord) -> None:
        save_png(self.out / f"frame_{rec.index:03d}.png", rec.image)
        if rec.stm is not None:
            save_stm(rec.stm, self.out / f"stm_{rec.index:03d}.bin")
        self.records.append(rec)
        self.frame_times.append(round(time.perf_counter() - self.t0, 6))

    def _manifest(self, status: str, seq: FrameSequence | None, backends, error: str | None) -> dict:
        manifest = {
            "status": status,
            "user_text": self.user_text,
            "seed": self.cfg["seed"],
            "num_frames_written": len(self.records),
            "frames": [
                {
                    "index": r.index,
                    "file": f"frame_{r.index:03d}.png",
                    "prompt": r.prompt,
                    "secondary_prompt": r.secondary,
                    "seed": r.seed,
                    "anchor": r.anchor,
                    "stm": None if r.stm is None else f"stm_{r.index:03d}.bin",
                    "differences": list(r.differences),
                }
                for r in self.records
            ],
            "backends": backends.describe() if backends is not None else self.cfg.backend_names(),
            "diffusion": backends.diffusion.describe() if backends is not None else None,
            "fps": self.cfg["fps"],
            "created_at": datetime.now(timezone.utc).isoformat(),
            "timings": {"frames_s": self.frame_times, "total_s": round(time.perf_counter() - self.t0, 6)},
        }
        if seq is not None:
            manifest["schedule"] = [{"anchor": b.anchor, "members": list(b.members)} for b in seq.schedule]
        if error is not None:
            manifest["error"] = error
        return manifest

    def finish(self, seq: FrameSequence, backends) -> None:
        seq.plan.save(self.out / "prompts.json")
        _dump(self.out / "llm_audit.json", audit_to_json(seq.audit))
        (self.out / "animation.gif").write_bytes(encode_gif(seq.images, self.cfg["fps"]))
        _dump(self.out / "run_manifest.json", self._manifest("complete", seq, backends, None))

    def fail(self, backends, error: BaseException) -> None:
        if self.records:
            frames = [r.image for r in self.records]
            (self.out / "animation.gif").write_bytes(encode_gif(frames, self.cfg["fps"]))
        _dump(self.out / "run_manifest.json", self._manifest("failed", None, backends, str(error)))


def run_generate(
    user_text: str,
    cfg: RunConfig,
    out_dir: str | Path,
    *,
    plan: PromptPlan | None = None,
    backends=None,
) -> FrameSequence:
    """Generate one video into ``out_dir``. Re-raises pipeline errors after saving partial output."""
    backends = backends or cfg.backends()
    writer = RunWriter(out_dir, cfg, user_text)
    try:
        seq = generate_video(user_text, cfg.pipeline(), backends, plan=plan, sink=writer.on_frame)
    except Exception as exc:
        writer.fail(backends, exc)
        raise
    writer.finish(seq, backends)
    return seq


def load_run_frames(run_dir: str | Path) -> list[np.ndarray]:
    return [load_png(p) for p in frame_paths(run_dir)]


def run_text(run_dir: str | Path) -> str | None:
    p = Path(run_dir) / "prompts.json"
    if p.is_file():
        return json.loads(p.read_text(encoding="utf-8")).get("user_text")
    return None


def stable_manifest(run_dir: str | Path) -> dict:
    """Manifest with the volatile keys removed, for run-to-run comparison."""
    m = json.loads((Path(run_dir) / "run_manifest.json").read_text(encoding="utf-8"))
    for k in VOLATILE_KEYS:
        m.pop(k, None)
    return m
