"""The video loop: anchors, batches, prompt switching on cached trajectories.

Every frame starts from the same initial latent ``x_T``. The first frame is
denoised in full and its trajectory cached. Each member frame replays that
trajectory and, cell by cell, leaves it for the member's own prompt once the
diffusion step reaches the cell's switch time. Under the ``Previous``
strategy the last member of a batch becomes the anchor of the next one.
"""

from __future__ import annotations

import threading
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from gridswitch.attention import (
    DifferenceList,
    SwitchWindow,
    attention_for_differences,
    stm_from_attention,
)
from gridswitch.backends.base import (
    DiffusionBackend,
    EmbeddingBackend,
    LLMBackend,
    PerceptualBackend,
    SegmentationBackend,
    Tokenizer,
)
from gridswitch.errors import BackendError, ContractViolation, PipelineError
from gridswitch.latent_grid import LatentTensor, SwitchTimeMatrix, build_mask, composite_latents
from gridswitch.text.prompts import (
    FramePrompt,
    LLMExchange,
    PromptPlan,
    detect_differences,
    generate_framewise_prompts,
    plan_differences,
)


class IntersectionStrategy(str, Enum):
    FIRST = "First"
    PREVIOUS = "Previous"


class MultiPromptStrategy(str, Enum):
    PREVIOUS_FRAME = "PreviousFrame"
    BASE_FRAME = "BaseFrame"
    VIDEO_TEXT = "VideoText"
    NONE = "None"


@dataclass
class PipelineConfig:
    num_frames: int = 24
    num_steps: int = 50
    guidance_scale: float = 11.0
    batch_size: int = 3
    intersection_strategy: IntersectionStrategy = IntersectionStrategy.PREVIOUS
    multi_prompt_strategy: MultiPromptStrategy = MultiPromptStrategy.VIDEO_TEXT
    falloff: float = 2.0
    switch_window: SwitchWindow | None = None
    latent_shape: tuple[int, int, int] = (4, 8, 8)
    seed: int = 0
    grps: bool = True
    # forces a uniform switch-time matrix for every member frame
    stm_override: float | None = None
    max_workers: int = 1

    def __post_init__(self):
        self.intersection_strategy = IntersectionStrategy(self.intersection_strategy)
        self.multi_prompt_strategy = MultiPromptStrategy(self.multi_prompt_strategy)
        self.latent_shape = tuple(int(v) for v in self.latent_shape)
        self.validate()

    def validate(self) -> None:
        if self.num_frames < 1:
            raise ValueError("num_frames must be >= 1")
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.guidance_scale < 0:
            raise ValueError("guidance_scale must be >= 0")
        if not self.falloff > 0:
            raise ValueError("falloff must be > 0")
        if len(self.latent_shape) != 3 or min(self.latent_shape) < 1:
            raise ValueError(f"latent_shape must be three positive ints, got {self.latent_shape}")
        self.window.validate(self.num_steps)
        if self.stm_override is not None and not 0 <= self.stm_override <= self.num_steps:
            raise ValueError(f"stm_override must lie in [0, {self.num_steps}]")

    @property
    def window(self) -> SwitchWindow:
        return self.switch_window or SwitchWindow.default(self.num_steps)


@dataclass(frozen=True)
class Batch:
    anchor: int
    members: tuple[int, ...]


BatchSchedule = list[Batch]


def plan_batches(num_frames: int, batch_size: int, strategy: IntersectionStrategy | str) -> BatchSchedule:
    if num_frames < 1:
        raise ValueError("num_frames must be >= 1")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    strategy = IntersectionStrategy(strategy)
    if num_frames == 1:
        return [Batch(0, ())]
    if strategy is IntersectionStrategy.FIRST:
        return [Batch(0, tuple(range(1, num_frames)))]
    schedule = []
    anchor = 0
    for start in range(1, num_frames, batch_size):
        members = tuple(range(start, min(start + batch_size, num_frames)))
        schedule.append(Batch(anchor, members))
        anchor = members[-1]
    return schedule


def select_secondary_prompt(
    strategy: MultiPromptStrategy | str,
    base_prompt: str | None,
    prev_prompt: str | None,
    user_text: str | None,
) -> str | None:
    strategy = MultiPromptStrategy(strategy)
    if strategy is MultiPromptStrategy.PREVIOUS_FRAME:
        return prev_prompt
    if strategy is MultiPromptStrategy.BASE_FRAME:
        return base_prompt
    if strategy is MultiPromptStrategy.VIDEO_TEXT:
        return user_text
    return None


@dataclass(frozen=True)
class TrajectoryCache:
    """Latents of one denoising pass; ``latents[t]`` is the latent at step ``t``."""

    latents: tuple[LatentTensor, ...]

    def __post_init__(self):
        shapes = {x.data.shape for x in self.latents}
        if len(shapes) != 1:
            raise ContractViolation(f"trajectory latents have mixed shapes {shapes}")
        for t, x in enumerate(self.latents):
            if x.step != t:
                raise ContractViolation(f"cache entry {t} holds step {x.step}")

    @property
    def num_steps(self) -> int:
        return len(self.latents) - 1

    @property
    def x0(self) -> LatentTensor:
        return self.latents[0]

    def __getitem__(self, t: int) -> LatentTensor:
        return self.latents[t]

    def __len__(self) -> int:
        return len(self.latents)


class _Serialized:
    """Funnels calls into a non-reentrant backend through one lock."""

    def __init__(self, backend):
        self._backend = backend
        self._lock = threading.Lock()

    def __getattr__(self, name):
        attr = getattr(self._backend, name)
        if not callable(attr):
            return attr

        def call(*args, **kwargs):
            with self._lock:
                return attr(*args, **kwargs)

        return call


def _step(backend: DiffusionBackend, x: LatentTensor, t: int, prompt: str, secondary, gamma) -> LatentTensor:
    try:
        return backend.denoise_step(x, t, prompt, secondary, gamma)
    except ContractViolation:
        raise
    except Exception as exc:
        raise BackendError(f"denoise step {t} failed: {exc}", step=t) from exc


def denoise_anchor(
    x_T: LatentTensor,
    prompt: FramePrompt | str,
    cfg: PipelineConfig,
    backend: DiffusionBackend,
    secondary: str | None = None,
) -> tuple[LatentTensor, TrajectoryCache]:
    text = prompt.text if isinstance(prompt, FramePrompt) else prompt
    T = cfg.num_steps
    if x_T.step != T:
        raise ContractViolation(f"initial latent is at step {x_T.step}, expected {T}")
    latents = [x_T]
    x = x_T
    for t in range(T, 0, -1):
        x = _step(backend, x, t, text, secondary, cfg.guidance_scale)
        latents.append(x)
    cache = TrajectoryCache(tuple(reversed(latents)))
    return cache.x0, cache


def denoise_with_switch(
    cache: TrajectoryCache,
    new_prompt: FramePrompt | str,
    secondary: str | None,
    stm: SwitchTimeMatrix,
    cfg: PipelineConfig,
    backend: DiffusionBackend,
) -> tuple[LatentTensor, TrajectoryCache]:
    """Replay ``cache`` and switch each cell to ``new_prompt`` at its own time.

    The step from ``t`` to ``t - 1`` takes the new-prompt update on the
    current composite latent and blends it against the anchor's cached
    latent at ``t - 1`` through the mask built at ``t``. Cells with
    ``t_s = 0`` therefore never leave the anchor, and cells with ``t_s = T``
    follow the new prompt from the shared ``x_T`` onwards.
    """
    text = new_prompt.text if isinstance(new_prompt, FramePrompt) else new_prompt
    T = cache.num_steps
    if T != cfg.num_steps:
        raise ContractViolation(f"cache covers {T} steps, config says {cfg.num_steps}")
    if stm.total_steps != T:
        raise ContractViolation(f"STM total_steps {stm.total_steps} != {T}")
    if stm.shape != cache[T].spatial_shape:
        raise ContractViolation(f"STM shape {stm.shape} != latent spatial shape {cache[T].spatial_shape}")

    x = cache[T]
    latents = [x]
    for t in range(T, 0, -1):
        mask = build_mask(stm, t)
        if not mask.mask.any():
            # nothing has switched yet, the composite is the anchor latent
            x = cache[t - 1]
        else:
            x_b = _step(backend, x, t, text, secondary, cfg.guidance_scale)
            x = composite_latents(mask, cache[t - 1], x_b)
        latents.append(x)
    out = TrajectoryCache(tuple(reversed(latents)))
    return out.x0, out


@dataclass
class Backends:
    diffusion: DiffusionBackend
    segmentation: SegmentationBackend
    llm: LLMBackend
    tokenizer: Tokenizer
    perceptual: PerceptualBackend | None = None
    embedding: EmbeddingBackend | None = None

    def describe(self) -> dict[str, str]:
        out = {}
        for kind in ("diffusion", "segmentation", "llm", "tokenizer", "perceptual", "embedding"):
            b = getattr(self, kind)
            if b is not None:
                out[kind] = getattr(b, "name", type(b).__name__)
        return out


@dataclass
class FrameRecord:
    index: int
    image: np.ndarray
    latent: LatentTensor
    prompt: str
    secondary: str | None
    seed: int
    anchor: int | None = None
    stm: SwitchTimeMatrix | None = None
    differences: DifferenceList = field(default_factory=DifferenceList)


@dataclass
class FrameSequence:
    frames: list[FrameRecord]
    plan: PromptPlan
    schedule: BatchSchedule
    audit: list[LLMExchange] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def images(self) -> list[np.ndarray]:
        return [f.image for f in self.frames]


def frame_seed(run_seed: int, index: int) -> int:
    """Counter-based per-frame seed: Philox keyed on the run seed, counter = frame index."""
    bits = np.random.Philox(key=run_seed, counter=index)
    return int(bits.random_raw() >> np.uint64(1))


def build_plan(
    user_text: str,
    cfg: PipelineConfig,
    backends: Backends,
    audit: list[LLMExchange],
    external: PromptPlan | None = None,
) -> PromptPlan:
    if external is not None:
        if len(external.frames) != cfg.num_frames:
            raise ValueError(
                f"external prompts have {len(external.frames)} frames, config wants {cfg.num_frames}"
            )
        plan = PromptPlan(external.user_text or user_text, list(external.frames), [])
    else:
        plan = generate_framewise_prompts(user_text, cfg.num_frames, backends.llm, backends.tokenizer, audit=audit)
    return plan_differences(plan, backends.llm, audit=audit)


FrameSink = Callable[[FrameRecord], None]


def generate_video(
    user_text: str,
    cfg: PipelineConfig,
    backends: Backends,
    *,
    plan: PromptPlan | None = None,
    sink: FrameSink | None = None,
) -> FrameSequence:
    """Text module, then anchor and member generation.

    ``plan`` substitutes externally written framewise prompts for the LLM.
    ``sink`` receives every finished frame in index order, so callers can
    persist partial output before a later frame fails.
    """
    audit: list[LLMExchange] = []
    try:
        plan = build_plan(user_text, cfg, backends, audit, external=plan)
    except Exception as exc:
        raise PipelineError(None, exc) from exc

    diffusion = backends.diffusion
    if tuple(diffusion.latent_shape) != cfg.latent_shape or diffusion.num_steps != cfg.num_steps:
        raise ContractViolation(
            f"backend runs {diffusion.latent_shape} x {diffusion.num_steps} steps, "
            f"config wants {cfg.latent_shape} x {cfg.num_steps}"
        )
    prompts = [f.text for f in plan.frames]
    supports_secondary = getattr(diffusion, "supports_secondary", False)

    def secondary_for(i: int) -> str | None:
        if not supports_secondary:
            return None
        return select_secondary_prompt(
            cfg.multi_prompt_strategy, prompts[0], prompts[i - 1] if i > 0 else None, plan.user_text
        )

    emitted: dict[int, FrameRecord] = {}
    next_out = 0

    def emit(rec: FrameRecord) -> None:
        nonlocal next_out
        emitted[rec.index] = rec
        while next_out in emitted and sink is not None:
            sink(emitted[next_out])
            next_out += 1

    if not cfg.grps:
        schedule = [Batch(i, ()) for i in range(cfg.num_frames)]
        for i in range(cfg.num_frames):
            try:
                seed = frame_seed(cfg.seed, i)
                x0, _ = denoise_anchor(diffusion.init_noise(seed), prompts[i], cfg, diffusion, secondary_for(i))
                emit(FrameRecord(i, diffusion.decode(x0), x0, prompts[i], secondary_for(i), seed))
            except Exception as exc:
                raise PipelineError(i, exc) from exc
        return FrameSequence([emitted[i] for i in range(cfg.num_frames)], plan, schedule, audit)

    schedule = plan_batches(cfg.num_frames, cfg.batch_size, cfg.intersection_strategy)
    parallel = cfg.max_workers > 1
    if parallel and not diffusion.reentrant:
        diffusion = _Serialized(diffusion)
    segmentation = backends.segmentation
    if parallel and not segmentation.reentrant:
        segmentation = _Serialized(segmentation)
    future_anchors = {b.anchor for b in schedule}
    caches: dict[int, TrajectoryCache] = {}

    try:
        x_T = diffusion.init_noise(cfg.seed)
        x0, cache = denoise_anchor(x_T, prompts[0], cfg, diffusion, secondary_for(0))
    except Exception as exc:
        raise PipelineError(0, exc) from exc
    caches[0] = cache
    emit(FrameRecord(0, diffusion.decode(x0), x0, prompts[0], secondary_for(0), cfg.seed))

    consecutive = {i + 1: d for i, d in enumerate(plan.differences)}
    diff_lock = threading.Lock()

    def member(anchor: int, anchor_image: np.ndarray, i: int) -> tuple[FrameRecord, TrajectoryCache]:
        try:
            if anchor == i - 1:
                diffs = consecutive[i]
            else:
                with diff_lock:
                    diffs = detect_differences(plan.frames[anchor], plan.frames[i], backends.llm, audit=audit)
            if cfg.stm_override is not None:
                stm = SwitchTimeMatrix.uniform(cfg.latent_shape[1:], cfg.stm_override, cfg.num_steps)
            else:
                amap = attention_for_differences(anchor_image, diffs, segmentation)
                stm = stm_from_attention(amap, cfg.falloff, cfg.window, cfg.latent_shape[1:], cfg.num_steps)
            sec = secondary_for(i)
            x0, member_cache = denoise_with_switch(caches[anchor], prompts[i], sec, stm, cfg, diffusion)
            rec = FrameRecord(i, diffusion.decode(x0), x0, prompts[i], sec, cfg.seed, anchor, stm, diffs)
            return rec, member_cache
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(i, exc) from exc

    pool = ThreadPoolExecutor(max_workers=cfg.max_workers) if parallel else None
    try:
        for k, batch in enumerate(schedule):
            anchor_image = emitted[batch.anchor].image
            if pool is not None:
                results = list(pool.map(lambda i: member(batch.anchor, anchor_image, i), batch.members))
            else:
                results = [member(batch.anchor, anchor_image, i) for i in batch.members]
            for rec, member_cache in results:
                if rec.index in future_anchors:
                    caches[rec.index] = member_cache
                emit(rec)
            if all(b.anchor != batch.anchor for b in schedule[k + 1 :]):
                caches.pop(batch.anchor, None)
    finally:
        if pool is not None:
            pool.shutdown()

    return FrameSequence([emitted[i] for i in range(cfg.num_frames)], plan, schedule, audit)


def generate_independent(prompts: Sequence[str], cfg: PipelineConfig, backend: DiffusionBackend, secondaries=None):
    """Each prompt denoised from its own per-frame seed; the reference for the no-switching arm."""
    out = []
    for i, p in enumerate(prompts):
        sec = None if secondaries is None else secondaries[i]
        x0, _ = denoise_anchor(backend.init_noise(frame_seed(cfg.seed, i)), p, cfg, backend, sec)
        out.append(backend.decode(x0))
    return out
