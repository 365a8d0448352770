"""Analytic toy diffusion world.

Every prompt owns a destination vector; the conditional flow is the straight
line ``(target(prompt) - x) / t`` integrated from ``t = 1`` down to ``t = 0``
with explicit Euler steps of size ``1 / T``. The field is elementwise, so
each latent cell evolves independently of its neighbours, and it is
Lipschitz on ``t >= dt / 2``. Both properties are what the trajectory tests
rely on.
"""

from __future__ import annotations

import hashlib

import numpy as np

from gridswitch.backends.base import DiffusionBackend
from gridswitch.latent_grid import LatentTensor, resize_map

# mixing weights for a secondary prompt; arbitrary fixed plumbing
PRIMARY_WEIGHT = 0.7
SECONDARY_WEIGHT = 0.3


def _stable_seed(*parts: object) -> int:
    digest = hashlib.sha256("\x1f".join(map(str, parts)).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def toy_target(prompt_text: str, dim: tuple[int, ...] | int, seed: int = 0) -> np.ndarray:
    """Deterministic destination in [-1, 1]^dim; the empty prompt maps to zero."""
    shape = (dim,) if isinstance(dim, int) else tuple(dim)
    if prompt_text == "":
        return np.zeros(shape)
    rng = np.random.default_rng(_stable_seed("toy-target", seed, prompt_text))
    return rng.uniform(-1.0, 1.0, size=shape)


def _effective_target(x_shape, primary: str, secondary: str | None, seed: int) -> np.ndarray:
    target = toy_target(primary, x_shape, seed)
    if secondary is not None:
        target = PRIMARY_WEIGHT * target + SECONDARY_WEIGHT * toy_target(secondary, x_shape, seed)
    return target


def toy_score(x: np.ndarray, t: float, prompt: str, seed: int = 0) -> np.ndarray:
    if t <= 0:
        raise ValueError(f"score undefined at t={t}; need t > 0")
    return (toy_target(prompt, x.shape, seed) - x) / t


def guided_score(
    x: np.ndarray,
    t: float,
    primary: str,
    guidance_scale: float,
    secondary: str | None = None,
    seed: int = 0,
) -> np.ndarray:
    """``s(y) + gamma * (s(y) - s(null))`` with the straight-line toy scores."""
    if t <= 0:
        raise ValueError(f"score undefined at t={t}; need t > 0")
    cond = (_effective_target(x.shape, primary, secondary, seed) - x) / t
    uncond = toy_score(x, t, "", seed)
    return cond + guidance_scale * (cond - uncond)


def toy_denoise_step(
    x: np.ndarray,
    t: float,
    primary: str,
    secondary: str | None,
    guidance_scale: float,
    dt: float,
    seed: int = 0,
) -> np.ndarray:
    if not (dt > 0 and t >= dt):
        raise ValueError(f"need t >= dt > 0, got t={t}, dt={dt}")
    t_eff = max(t, dt / 2)
    # Every score here points at a fixed destination, so the guided score is
    # (dest - x) / t with dest = cond + g * (cond - uncond). The Euler update
    # x + dt * (dest - x) / t is evaluated as a convex combination: identical
    # algebra, but the last step (dt == t) lands on dest bit-exactly.
    cond = _effective_target(x.shape, primary, secondary, seed)
    uncond = toy_target("", x.shape, seed)
    dest = cond + guidance_scale * (cond - uncond)
    r = dt / t_eff
    return (1.0 - r) * x + r * dest


class ToyDiffusion(DiffusionBackend):
    name = "toy"
    reentrant = True
    supports_secondary = True

    def __init__(
        self,
        latent_shape: tuple[int, int, int] = (4, 8, 8),
        num_steps: int = 50,
        world_seed: int = 0,
        upscale: int = 8,
    ):
        if num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        self.latent_shape = tuple(latent_shape)
        self.num_steps = int(num_steps)
        self.world_seed = world_seed
        self.upscale = upscale
        self.dt = 1.0 / self.num_steps

    def init_noise(self, seed: int) -> LatentTensor:
        rng = np.random.default_rng(_stable_seed("toy-noise", seed))
        return LatentTensor(rng.standard_normal(self.latent_shape), self.num_steps)

    def denoise_step(self, x, t, primary, secondary, guidance_scale):
        if not 1 <= t <= self.num_steps:
            raise ValueError(f"step {t} outside [1, {self.num_steps}]")
        data = toy_denoise_step(
            x.data, t * self.dt, primary, secondary, guidance_scale, self.dt, self.world_seed
        )
        return LatentTensor(data, t - 1)

    def target(self, prompt: str, secondary: str | None = None, guidance_scale: float = 0.0) -> np.ndarray:
        """Closed-form endpoint of a full trajectory under guidance."""
        eff = _effective_target(self.latent_shape, prompt, secondary, self.world_seed)
        return eff + guidance_scale * (eff - toy_target("", self.latent_shape, self.world_seed))

    def decode(self, x0: LatentTensor) -> np.ndarray:
        rgb = 0.5 + 0.5 * np.tanh(x0.data[:3] / 6.0)
        if rgb.shape[0] < 3:
            rgb = np.concatenate([rgb] + [rgb[-1:]] * (3 - rgb.shape[0]))
        h, w = x0.spatial_shape
        size = (h * self.upscale, w * self.upscale)
        return np.stack([resize_map(c, size) for c in rgb], axis=-1)
