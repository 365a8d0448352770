from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

from gridswitch.harness.rundir import frame_paths, load_png, run_text
from gridswitch.metrics.report import MetricsReport, evaluate_video


class UnreadableFrames(RuntimeError):
    def __init__(self, offenders: dict[str, str]):
        lines = [f"{p}: {why}" for p, why in offenders.items()]
        super().__init__("unreadable frames:\n  " + "\n  ".join(lines))
        self.offenders = offenders


def _video_id(path: Path, taken: set[str]) -> str:
    base = path.name or "video"
    vid, n = base, 1
    while vid in taken:
        n += 1
        vid = f"{base}_{n}"
    taken.add(vid)
    return vid


def evaluate_dirs(dirs: Sequence[str | Path], *, perceptual=None, embedding=None) -> MetricsReport:
    """Score every frame directory; directories with fewer than two frames are skipped."""
    videos, skipped, offenders = [], {}, {}
    loaded = []
    taken: set[str] = set()
    for d in dirs:
        d = Path(d)
        vid = _video_id(d, taken)
        if not d.is_dir():
            offenders[str(d)] = "not a directory"
            continue
        frames = []
        for p in frame_paths(d):
            try:
                frames.append(load_png(p))
            except Exception as exc:  # PIL raises several unrelated types
                offenders[str(p)] = f"{type(exc).__name__}: {exc}"
        if len({f.shape for f in frames}) > 1:
            offenders[str(d)] = "frames have mixed sizes"
            continue
        loaded.append((vid, d, frames))
    if offenders:
        raise UnreadableFrames(offenders)
    for vid, d, frames in loaded:
        if len(frames) < 2:
            skipped[vid] = f"needs >= 2 frames, found {len(frames)}"
            continue
        videos.append(
            evaluate_video(vid, frames, perceptual=perceptual, embedding=embedding, text=run_text(d))
        )
    return MetricsReport(videos, skipped)
