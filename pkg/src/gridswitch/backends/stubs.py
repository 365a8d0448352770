"""Deterministic offline stand-ins for the model-backed services.

All stubs are pure functions of their inputs and a fixed seed.
"""

from __future__ import annotations

import json
import re
from collections.abc import Mapping
from typing import Any

import numpy as np
from scipy.ndimage import convolve, zoom

from gridswitch.backends.base import (
    EmbeddingBackend,
    LLMBackend,
    PerceptualBackend,
    SegmentationBackend,
    Tokenizer,
)
from gridswitch.backends.toy import _stable_seed


def soft_box_params(phrase: str, seed: int = 0) -> tuple[float, float, float, float, float]:
    """(centre_y, centre_x, half_h, half_w, softness) in unit image coordinates."""
    rng = np.random.default_rng(_stable_seed("stub-segment", seed, phrase))
    cy, cx = rng.uniform(0.25, 0.75, size=2)
    hh, hw = rng.uniform(0.1, 0.3, size=2)
    softness = rng.uniform(0.02, 0.08)
    return float(cy), float(cx), float(hh), float(hw), float(softness)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class StubSegmenter(SegmentationBackend):
    """Renders a soft box whose placement is keyed on the phrase hash."""

    name = "stub"
    reentrant = True

    def __init__(self, seed: int = 0):
        self.seed = seed

    def segment(self, image, phrase):
        if not phrase:
            raise ValueError("phrase must be non-empty")
        h, w = np.asarray(image).shape[:2]
        cy, cx, hh, hw, s = soft_box_params(phrase, self.seed)
        y = (np.arange(h) + 0.5) / h
        x = (np.arange(w) + 0.5) / w
        fy = _sigmoid((hh - np.abs(y - cy)) / s)
        fx = _sigmoid((hw - np.abs(x - cx)) / s)
        return np.outer(fy, fx)


class WhitespaceTokenizer(Tokenizer):
    name = "whitespace"

    def count(self, text):
        return len(text.split())


_WORD = re.compile(r"[\w/'-]+")


class StubLLM(LLMBackend):
    """Rule-based responder keyed on ``template_id``.

    * ``framewise``: one fixed descriptor built from the user text and the
      dynamics ``phase i/n``.
    * ``differences``: the words of the new dynamic part absent from the old.
    * ``shorten``: keeps the first ``limit`` words.
    """

    name = "stub"
    reentrant = True

    def complete(self, prompt: str, *, template_id: str, inputs: Mapping[str, Any]) -> str:
        if template_id == "framewise":
            subject = str(inputs["user_text"]).strip().rstrip(".")
            n = int(inputs["n_frames"])
            payload = {
                "fixed": f"Scene: {subject}. Style: plain background, steady camera.",
                "dynamics": [f"phase {i}/{n}" for i in range(1, n + 1)],
            }
            return json.dumps(payload)
        if template_id == "differences":
            old = {w.lower() for w in _WORD.findall(str(inputs["previous"]))}
            new = [w for w in _WORD.findall(str(inputs["next"])) if w.lower() not in old]
            return json.dumps([" ".join(new)] if new else ["motion"])
        if template_id == "shorten":
            words = str(inputs["text"]).split()
            return " ".join(words[: int(inputs["limit"])])
        raise ValueError(f"stub LLM has no rule for template {template_id!r}")


class StubEmbedder(EmbeddingBackend):
    """Text: hash-seeded Gaussian direction. Image: fixed random projection of an 8x8 thumbnail."""

    name = "stub"
    reentrant = True

    def __init__(self, dim: int = 64, seed: int = 0):
        self.dim = dim
        self.seed = seed
        rng = np.random.default_rng(_stable_seed("stub-embed-proj", seed))
        self._proj = rng.standard_normal((dim, 8 * 8 * 3))

    @staticmethod
    def _unit(v: np.ndarray) -> np.ndarray:
        n = np.linalg.norm(v)
        if n == 0:
            v = np.ones_like(v)
            n = np.linalg.norm(v)
        return v / n

    def embed_text(self, text):
        rng = np.random.default_rng(_stable_seed("stub-embed-text", self.seed, text))
        return self._unit(rng.standard_normal(self.dim))

    def embed_image(self, image):
        img = np.asarray(image, dtype=float)
        if img.ndim == 2:
            img = np.repeat(img[..., None], 3, axis=-1)
        h, w = img.shape[:2]
        thumb = zoom(img[..., :3], (8 / h, 8 / w, 1), order=1, grid_mode=True, mode="nearest")
        return self._unit(self._proj @ (thumb.ravel() - 0.5))


class StubPerceptual(PerceptualBackend):
    """LPIPS-shaped distance over fixed random convolutions.

    Two scales of eight seeded 5x5 filters, ReLU, unit-normalized across the
    channel axis at every pixel, squared difference averaged over space and
    summed over scales.
    """

    name = "stub"
    reentrant = True

    def __init__(self, n_filters: int = 8, seed: int = 0):
        rng = np.random.default_rng(_stable_seed("stub-perceptual", seed))
        filters = rng.standard_normal((n_filters, 5, 5))
        self.filters = filters - filters.mean(axis=(1, 2), keepdims=True)

    def _features(self, img: np.ndarray) -> list[np.ndarray]:
        gray = img if img.ndim == 2 else img[..., :3].mean(axis=-1)
        feats = []
        for level in range(2):
            if level:
                gray = gray[: gray.shape[0] // 2 * 2, : gray.shape[1] // 2 * 2]
                gray = gray.reshape(gray.shape[0] // 2, 2, gray.shape[1] // 2, 2).mean(axis=(1, 3))
            f = np.stack([np.maximum(convolve(gray, k, mode="reflect"), 0.0) for k in self.filters])
            f = f / (np.sqrt((f**2).sum(axis=0, keepdims=True)) + 1e-10)
            feats.append(f)
        return feats

    def distance(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.shape != b.shape:
            raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
        total = 0.0
        for fa, fb in zip(self._features(a), self._features(b)):
            total += float(((fa - fb) ** 2).sum(axis=0).mean())
        return total


def stub_segment(image: np.ndarray, phrase: str) -> np.ndarray:
    return StubSegmenter().segment(image, phrase)


def stub_llm(template_id: str, inputs: Mapping[str, Any]) -> str:
    return StubLLM().complete("", template_id=template_id, inputs=inputs)


def stub_tokenize(text: str) -> int:
    return WhitespaceTokenizer().count(text)


def stub_embed(item: str | np.ndarray) -> np.ndarray:
    e = StubEmbedder()
    return e.embed_text(item) if isinstance(item, str) else e.embed_image(item)


def stub_perceptual(a: np.ndarray, b: np.ndarray) -> float:
    return StubPerceptual().distance(a, b)
