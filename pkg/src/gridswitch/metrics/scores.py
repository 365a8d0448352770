"""Backend-driven scores: perceptual distance and text-image alignment."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from gridswitch.backends.base import EmbeddingBackend, PerceptualBackend
from gridswitch.errors import ContractViolation


def lpips(a: np.ndarray, b: np.ndarray, perceptual: PerceptualBackend) -> float:
    if np.shape(a) != np.shape(b):
        raise ContractViolation(f"frame shapes differ: {np.shape(a)} vs {np.shape(b)}")
    return float(perceptual.distance(a, b))


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))


def clip_score(frames: Sequence[np.ndarray], text: str, embed: EmbeddingBackend) -> float:
    """Mean cosine similarity between each frame embedding and the text embedding."""
    if not frames:
        raise ValueError("need at least one frame")
    t = np.asarray(embed.embed_text(text), dtype=float)
    return float(np.mean([_cosine(np.asarray(embed.embed_image(f), dtype=float), t) for f in frames]))
