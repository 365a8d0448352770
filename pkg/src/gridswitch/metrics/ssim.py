"""Multi-scale structural similarity between two frames."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from gridswitch.errors import ContractViolation

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def gaussian_window(size: int = WINDOW_SIZE, sigma: float = WINDOW_SIGMA) -> np.ndarray:
    coords = np.arange(size) - size // 2
    g = np.exp(-(coords**2) / (2 * sigma**2))
    return g / g.sum()


def msssim_scale_count(shape: tuple[int, ...], max_scales: int = len(MS_SSIM_WEIGHTS)) -> int:
    """Largest scale count whose coarsest level still fits one window (176 px for 5 scales)."""
    side = min(shape[:2])
    if side < WINDOW_SIZE:
        raise ContractViolation(f"frames need at least {WINDOW_SIZE} px per side, got {shape[:2]}")
    n = 1
    while n < max_scales and side >= WINDOW_SIZE * 2**n:
        n += 1
    return n


def _filter_valid(x: np.ndarray, win: np.ndarray) -> np.ndarray:
    r = len(win) // 2
    y = correlate1d(x, win, axis=0, mode="constant")
    y = correlate1d(y, win, axis=1, mode="constant")
    return y[r:-r, r:-r]


def _ssim_terms(x: np.ndarray, y: np.ndarray, win: np.ndarray) -> tuple[float, float]:
    """(mean SSIM, mean contrast-structure) over all valid windows."""
    c1, c2 = K1**2, K2**2
    mu_x = _filter_valid(x, win)
    mu_y = _filter_valid(y, win)
    sxx = _filter_valid(x * x, win) - mu_x * mu_x
    syy = _filter_valid(y * y, win) - mu_y * mu_y
    sxy = _filter_valid(x * y, win) - mu_x * mu_y
    cs = (2 * sxy + c2) / (sxx + syy + c2)
    lum = (2 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    return float((lum * cs).mean()), float(cs.mean())


def _halve(x: np.ndarray) -> np.ndarray:
    h, w = x.shape[0] // 2 * 2, x.shape[1] // 2 * 2
    return x[:h, :w].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def _ms_ssim_channel(x: np.ndarray, y: np.ndarray, weights: np.ndarray, win: np.ndarray) -> float:
    value = 1.0
    for j, w in enumerate(weights):
        ssim, cs = _ssim_terms(x, y, win)
        if j == len(weights) - 1:
            value *= max(ssim, 0.0) ** w
        else:
            value *= max(cs, 0.0) ** w
            x, y = _halve(x), _halve(y)
    return value


def ms_ssim(a: np.ndarray, b: np.ndarray, scales: int | None = None) -> float:
    """MS-SSIM of two gray ``[H, W]`` or colour ``[H, W, C]`` images in [0, 1].

    Colour images are scored per channel and averaged. With fewer scales
    than five the leading weights are renormalized to sum to one; pass
    ``scales`` to force a count, otherwise it is the largest that fits.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ContractViolation(f"frame shapes differ: {a.shape} vs {b.shape}")
    n = msssim_scale_count(a.shape) if scales is None else int(scales)
    if not 1 <= n <= len(MS_SSIM_WEIGHTS) or min(a.shape[:2]) < WINDOW_SIZE * 2 ** (n - 1):
        raise ContractViolation(f"{n} scales do not fit frames of shape {a.shape[:2]}")
    weights = np.asarray(MS_SSIM_WEIGHTS[:n])
    weights = weights / weights.sum()
    win = gaussian_window()
    if a.ndim == 2:
        return _ms_ssim_channel(a, b, weights, win)
    return float(np.mean([_ms_ssim_channel(a[..., c], b[..., c], weights, win) for c in range(a.shape[2])]))
