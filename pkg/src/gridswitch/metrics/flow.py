"""Dense Farneback flow and the warp-error temporal consistency loss."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import cv2
import numpy as np
from scipy.ndimage import map_coordinates

from gridswitch.errors import ContractViolation

BT601 = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class FarnebackParams:
    levels: int = 3
    pyr_scale: float = 0.5
    winsize: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.2


@dataclass(frozen=True)
class FlowField:
    u: np.ndarray  # horizontal displacement, pixels
    v: np.ndarray  # vertical displacement, pixels

    @property
    def mean(self) -> tuple[float, float]:
        return float(self.u.mean()), float(self.v.mean())


def to_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] >= 3:
        return img[..., :3] @ BT601
    if img.ndim == 3 and img.shape[2] == 1:
        return img[..., 0]
    raise ContractViolation(f"cannot read {img.shape} as an image")


def farneback_flow(a: np.ndarray, b: np.ndarray, params: FarnebackParams = FarnebackParams()) -> FlowField:
    """Flow from ``a`` to ``b``: ``b(y + v, x + u) ~ a(y, x)``.

    Bitwise-identical frames short-circuit to zero flow; the polynomial
    fit otherwise returns sub-pixel noise on static content.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ContractViolation(f"frame shapes differ: {a.shape} vs {b.shape}")
    ga, gb = to_gray(a), to_gray(b)
    if min(ga.shape) < params.winsize:
        raise ValueError(f"frames of {ga.shape} are smaller than the {params.winsize}px flow window")
    if np.array_equal(ga, gb):
        zero = np.zeros(ga.shape)
        return FlowField(zero, zero.copy())
    # the solver's regularization assumes 8-bit intensity scale
    flow = cv2.calcOpticalFlowFarneback(
        (ga * 255.0).astype(np.float32),
        (gb * 255.0).astype(np.float32),
        None,
        params.pyr_scale,
        params.levels,
        params.winsize,
        params.iterations,
        params.poly_n,
        params.poly_sigma,
        0,
    )
    return FlowField(flow[..., 0].astype(float), flow[..., 1].astype(float))


def warp_forward(a: np.ndarray, flow: FlowField) -> np.ndarray:
    """Predict the next frame from ``a``: bilinear sample of ``a`` at ``p - flow(p)``."""
    a = np.asarray(a, dtype=float)
    h, w = a.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    coords = [yy - flow.v, xx - flow.u]
    if a.ndim == 2:
        return map_coordinates(a, coords, order=1, mode="nearest")
    return np.stack(
        [map_coordinates(a[..., c], coords, order=1, mode="nearest") for c in range(a.shape[2])], axis=-1
    )


def warp_error(a: np.ndarray, b: np.ndarray, params: FarnebackParams = FarnebackParams()) -> float:
    flow = farneback_flow(a, b, params)
    if not flow.u.any() and not flow.v.any():
        return float(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)).mean())
    return float(np.abs(warp_forward(a, flow) - np.asarray(b, dtype=float)).mean())


def temporal_consistency(frames: Sequence[np.ndarray], params: FarnebackParams = FarnebackParams()) -> float:
    """Mean absolute warp error over consecutive pairs; lower is smoother."""
    if len(frames) < 2:
        raise ValueError(f"temporal consistency needs >= 2 frames, got {len(frames)}")
    errors = [warp_error(frames[i], frames[i + 1], params) for i in range(len(frames) - 1)]
    return float(np.mean(errors))
