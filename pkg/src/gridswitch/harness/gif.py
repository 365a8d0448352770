"""Animated GIF encoding that keeps every frame.

``Image.save(save_all=True)`` folds identical consecutive frames into one,
which changes the frame count of static clips. Frames are therefore written
one by one through Pillow's GIF block helpers, each with its own palette.
"""

from __future__ import annotations

import io
from collections.abc import Sequence

import numpy as np
from PIL import GifImagePlugin, Image

DEFAULT_FPS = 8


def to_uint8(frame: np.ndarray) -> np.ndarray:
    arr = np.asarray(frame)
    if arr.dtype == np.uint8:
        return arr
    return np.clip(np.rint(np.asarray(arr, dtype=float) * 255.0), 0, 255).astype(np.uint8)


def _palettized(frame: np.ndarray) -> Image.Image:
    arr = to_uint8(frame)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=-1)
    return Image.fromarray(arr[..., :3], "RGB").quantize(colors=256, method=Image.Quantize.MEDIANCUT, dither=Image.Dither.NONE)


def encode_gif(frames: Sequence[np.ndarray], fps: float = DEFAULT_FPS) -> bytes:
    """Looping animated GIF, one image block per input frame, in order."""
    if len(frames) == 0:
        raise ValueError("need at least one frame")
    if fps <= 0:
        raise ValueError("fps must be positive")
    sizes = {np.shape(f)[:2] for f in frames}
    if len(sizes) != 1:
        raise ValueError(f"frames have mixed sizes: {sorted(sizes)}")
    duration = int(round(1000.0 / fps))
    images = [_palettized(f) for f in frames]

    buf = io.BytesIO()
    header, _ = GifImagePlugin.getheader(images[0].copy(), None, {"loop": 0, "duration": duration})
    for block in header:
        buf.write(block)
    for im in images:
        for block in GifImagePlugin.getdata(im, (0, 0), duration=duration, include_color_table=True):
            buf.write(block)
    buf.write(b";")
    return buf.getvalue()


def decode_gif(data: bytes) -> list[np.ndarray]:
    im = Image.open(io.BytesIO(data))
    frames = []
    for i in range(getattr(im, "n_frames", 1)):
        im.seek(i)
        frames.append(np.asarray(im.convert("RGB")))
    return frames
