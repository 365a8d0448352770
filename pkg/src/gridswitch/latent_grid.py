"""Switch-time matrices, binary masks and composite latents.

Diffusion time runs from ``T`` down to ``0``. A cell whose switch time is
``t_s`` follows the anchor trajectory while ``t > t_s`` and the new-prompt
trajectory once ``t <= t_s``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gridswitch.errors import ContractViolation


@dataclass(frozen=True)
class LatentTensor:
    data: np.ndarray  # [channels, height, width]
    step: int

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ContractViolation(f"latent must be [C, H, W], got shape {self.data.shape}")
        if self.step < 0:
            raise ContractViolation(f"latent step must be >= 0, got {self.step}")
        if not np.all(np.isfinite(self.data)):
            raise ContractViolation(f"latent at step {self.step} has non-finite entries")

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]


@dataclass(frozen=True)
class SwitchTimeMatrix:
    times: np.ndarray  # [height, width], in step-index units
    total_steps: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.times.shape

    @classmethod
    def uniform(cls, shape: tuple[int, int], t_s: float, total_steps: int) -> "SwitchTimeMatrix":
        return cls(np.full(shape, float(t_s)), total_steps)


@dataclass(frozen=True)
class BinaryMask:
    mask: np.ndarray  # uint8 [height, width]
    step: int


@dataclass(frozen=True)
class GridSpec:
    """An ``cell_rows x cell_cols`` grid laid over a latent of the given size.

    When the cell counts do not divide the latent dimensions the grid is
    resampled with nearest-cell lookup; ``exact`` says whether that happens.
    """

    latent_height: int
    latent_width: int
    cell_rows: int
    cell_cols: int

    def __post_init__(self):
        dims = (self.latent_height, self.latent_width, self.cell_rows, self.cell_cols)
        if min(dims) < 1:
            raise ContractViolation(f"grid dimensions must be positive, got {dims}")

    @property
    def exact(self) -> bool:
        return self.latent_height % self.cell_rows == 0 and self.latent_width % self.cell_cols == 0

    def expand(self, cell_times: np.ndarray) -> np.ndarray:
        """Spread per-cell values over the latent raster."""
        cell_times = np.asarray(cell_times, dtype=float)
        if cell_times.shape != (self.cell_rows, self.cell_cols):
            raise ContractViolation(
                f"cell values have shape {cell_times.shape}, grid is {(self.cell_rows, self.cell_cols)}"
            )
        rows = (np.arange(self.latent_height) * self.cell_rows) // self.latent_height
        cols = (np.arange(self.latent_width) * self.cell_cols) // self.latent_width
        return cell_times[np.ix_(rows, cols)]


def build_mask(stm: SwitchTimeMatrix, t: int) -> BinaryMask:
    if not 0 <= t <= stm.total_steps:
        raise ContractViolation(f"step {t} outside [0, {stm.total_steps}]")
    return BinaryMask((t <= stm.times).astype(np.uint8), int(t))


def composite_latents(mask: BinaryMask, x_a: LatentTensor, x_b: LatentTensor) -> LatentTensor:
    """Blend two latents cellwise: ``mask * x_b + (1 - mask) * x_a``.

    One spatial mask is shared by every channel.
    """
    if x_a.data.shape != x_b.data.shape:
        raise ContractViolation(f"latent shapes differ: {x_a.data.shape} vs {x_b.data.shape}")
    if x_a.step != x_b.step:
        raise ContractViolation(f"latent steps differ: {x_a.step} vs {x_b.step}")
    if mask.mask.shape != x_a.spatial_shape:
        raise ContractViolation(f"mask shape {mask.mask.shape} != latent spatial shape {x_a.spatial_shape}")
    m = mask.mask.astype(x_a.data.dtype)[None, :, :]
    return LatentTensor(m * x_b.data + (1 - m) * x_a.data, x_a.step)


def _bilinear_weights(n_in: int, n_out: int) -> np.ndarray:
    # half-pixel centres, edges clamped
    w = np.zeros((n_out, n_in))
    if n_in == 1:
        w[:, 0] = 1.0
        return w
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.minimum(np.floor(src).astype(int), n_in - 2)
    frac = src - lo
    rows = np.arange(n_out)
    w[rows, lo] = 1.0 - frac
    w[rows, lo + 1] += frac
    return w


def resize_map(values: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Bilinear resize of a 2-D map to ``target`` (height, width)."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.size == 0:
        raise ContractViolation(f"expected a non-empty 2-D map, got shape {values.shape}")
    H, W = target
    if H < 1 or W < 1:
        raise ContractViolation(f"target size must be positive, got {target}")
    if not np.all(np.isfinite(values)):
        raise ContractViolation("map has non-finite entries")
    if values.shape == (H, W):
        return values.copy()
    wy = _bilinear_weights(values.shape[0], H)
    wx = _bilinear_weights(values.shape[1], W)
    out = wy @ values @ wx.T
    # guard the range contract against rounding in the weighted sums
    return np.clip(out, values.min(), values.max())


@dataclass
class StmReport:
    ok: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def validate_stm(stm: SwitchTimeMatrix, latent_shape: tuple[int, int] | None = None) -> StmReport:
    problems: list[str] = []
    times = np.asarray(stm.times)
    if times.ndim != 2:
        return StmReport(False, [f"times must be 2-D, got shape {times.shape}"])
    if stm.total_steps < 1:
        problems.append(f"total_steps must be >= 1, got {stm.total_steps}")
    if latent_shape is not None and times.shape != tuple(latent_shape):
        problems.append(f"shape {times.shape} != latent shape {tuple(latent_shape)}")
    for i, j in np.argwhere(~np.isfinite(times)):
        problems.append(f"cell ({i}, {j}) is not finite: {times[i, j]}")
    with np.errstate(invalid="ignore"):
        bad = np.isfinite(times) & ((times < 0) | (times > stm.total_steps))
    for i, j in np.argwhere(bad):
        problems.append(f"cell ({i}, {j}) = {times[i, j]:g} outside [0, {stm.total_steps}]")
    return StmReport(not problems, problems)


def save_stm(stm: SwitchTimeMatrix, path: str | Path) -> Path:
    """Write ``<path>`` as little-endian float32 row-major plus a ``.json`` sidecar."""
    path = Path(path)
    h, w = stm.shape
    path.write_bytes(np.ascontiguousarray(stm.times, dtype="<f4").tobytes())
    sidecar = {"height": int(h), "width": int(w), "total_steps": int(stm.total_steps)}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")
    return path


def load_stm(path: str | Path) -> SwitchTimeMatrix:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    h, w = meta["height"], meta["width"]
    if raw.size != h * w:
        raise ContractViolation(f"{path}: {raw.size} values, sidecar says {h}x{w}")
    return SwitchTimeMatrix(raw.reshape(h, w).astype(float), int(meta["total_steps"]))
