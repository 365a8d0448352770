"""From a decoded anchor frame and a list of textual differences to a switch-time matrix.

Order of operations: segment each phrase, min-max normalize each map,
combine by pixelwise max, raise to the falloff power, resize to the latent
grid, then map linearly into the switch window. High attention gives a
large switch time, i.e. the cell leaves the anchor trajectory earlier in
the T -> 0 pass.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from gridswitch.backends.base import SegmentationBackend
from gridswitch.errors import BackendError, ContractViolation
from gridswitch.latent_grid import SwitchTimeMatrix, resize_map


@dataclass(frozen=True)
class AttentionMap:
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        if np.asarray(self.values).ndim != 2:
            raise ContractViolation(f"attention map must be 2-D, got {np.shape(self.values)}")
        if not np.all(np.isfinite(self.values)):
            raise ContractViolation("attention map has non-finite entries")


@dataclass(frozen=True)
class DifferenceList:
    phrases: tuple[str, ...] = ()

    @classmethod
    def from_iterable(cls, phrases: Iterable[str]) -> "DifferenceList":
        seen: set[str] = set()
        kept = []
        for p in phrases:
            p = p.strip()
            if p and p.casefold() not in seen:
                seen.add(p.casefold())
                kept.append(p)
        return cls(tuple(kept))

    def __len__(self) -> int:
        return len(self.phrases)

    def __iter__(self):
        return iter(self.phrases)


@dataclass(frozen=True)
class SwitchWindow:
    t_min: float
    t_max: float

    @classmethod
    def default(cls, total_steps: int) -> "SwitchWindow":
        return cls(0.15 * total_steps, 0.85 * total_steps)

    def validate(self, total_steps: int) -> None:
        if not 0 <= self.t_min <= self.t_max <= total_steps:
            raise ContractViolation(
                f"switch window ({self.t_min}, {self.t_max}) not within [0, {total_steps}]"
            )


def segment_attention(image: np.ndarray, phrase: str, backend: SegmentationBackend) -> AttentionMap:
    if not phrase or not phrase.strip():
        raise ValueError("phrase must be non-empty")
    image = np.asarray(image)
    if image.size == 0:
        raise ValueError("image is empty")
    try:
        values = np.asarray(backend.segment(image, phrase), dtype=float)
    except Exception as exc:
        raise BackendError(f"segmentation failed for {phrase!r}: {exc}", phrase=phrase) from exc
    if values.shape != image.shape[:2]:
        raise BackendError(
            f"segmentation for {phrase!r} returned shape {values.shape}, expected {image.shape[:2]}",
            phrase=phrase,
        )
    return AttentionMap(values, normalized=False)


def normalize_map(amap: AttentionMap) -> AttentionMap:
    v = np.asarray(amap.values, dtype=float)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return AttentionMap(np.zeros_like(v), normalized=True)
    return AttentionMap((v - lo) / (hi - lo), normalized=True)


def apply_falloff(amap: AttentionMap, falloff: float) -> AttentionMap:
    if not falloff > 0:
        raise ValueError(f"falloff must be > 0, got {falloff}")
    if not amap.normalized:
        raise ContractViolation("falloff expects a normalized map")
    return AttentionMap(np.power(amap.values, falloff), normalized=True)


def combine_maps(maps: Sequence[AttentionMap]) -> AttentionMap:
    if not maps:
        raise ValueError("need at least one attention map")
    shape = maps[0].values.shape
    for m in maps[1:]:
        if m.values.shape != shape:
            raise ContractViolation(f"attention map shapes differ: {shape} vs {m.values.shape}")
    out = maps[0].values
    for m in maps[1:]:
        out = np.maximum(out, m.values)
    return AttentionMap(np.array(out, dtype=float), normalized=all(m.normalized for m in maps))


def stm_from_attention(
    amap: AttentionMap,
    falloff: float,
    window: SwitchWindow,
    latent_shape: tuple[int, int],
    total_steps: int,
) -> SwitchTimeMatrix:
    window.validate(total_steps)
    a = amap if amap.normalized else normalize_map(amap)
    a = apply_falloff(a, falloff)
    grid = resize_map(a.values, tuple(latent_shape))
    times = window.t_min + grid * (window.t_max - window.t_min)
    # keep rounding from pushing a cell outside the window
    return SwitchTimeMatrix(np.clip(times, window.t_min, window.t_max), total_steps)


def attention_for_differences(
    image: np.ndarray,
    differences: DifferenceList | Sequence[str],
    backend: SegmentationBackend,
    max_workers: int = 1,
) -> AttentionMap:
    """Normalized, max-combined attention over every phrase.

    No phrases gives the all-zero map, i.e. every cell keeps the anchor as
    long as the switch window allows.
    """
    phrases = list(differences)
    if not phrases:
        return AttentionMap(np.zeros(np.asarray(image).shape[:2]), normalized=True)
    if max_workers > 1 and backend.reentrant and len(phrases) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            maps = list(pool.map(lambda p: segment_attention(image, p, backend), phrases))
    else:
        maps = [segment_attention(image, p, backend) for p in phrases]
    return combine_maps([normalize_map(m) for m in maps])
