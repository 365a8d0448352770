"""Backend contracts.

Real-model adapters live out of tree and subclass these. Every backend
declares ``reentrant``; the orchestrator serializes calls into backends that
leave it False.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Mapping
from typing import Any

import numpy as np

from gridswitch.latent_grid import LatentTensor


class DiffusionBackend(ABC):
    name: str = "abstract"
    reentrant: bool = False
    supports_secondary: bool = False

    latent_shape: tuple[int, int, int]
    num_steps: int

    @abstractmethod
    def init_noise(self, seed: int) -> LatentTensor:
        """Initial latent ``x_T`` for ``seed``."""

    @abstractmethod
    def denoise_step(
        self,
        x: LatentTensor,
        t: int,
        primary: str,
        secondary: str | None,
        guidance_scale: float,
    ) -> LatentTensor:
        """Advance ``x`` from step ``t`` to step ``t - 1`` under classifier-free guidance.

        Must be deterministic in all of its arguments.
        """

    @abstractmethod
    def decode(self, x0: LatentTensor) -> np.ndarray:
        """Map a final latent to an ``[H, W, 3]`` image in [0, 1]."""

    def describe(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "latent_shape": list(self.latent_shape),
            "num_steps": self.num_steps,
            "supports_secondary": self.supports_secondary,
            "reentrant": self.reentrant,
        }


class SegmentationBackend(ABC):
    name: str = "abstract"
    reentrant: bool = False

    @abstractmethod
    def segment(self, image: np.ndarray, phrase: str) -> np.ndarray:
        """Unnormalized per-pixel relevance of ``phrase``, shape ``image.shape[:2]``."""


class LLMBackend(ABC):
    name: str = "abstract"
    reentrant: bool = False

    @abstractmethod
    def complete(self, prompt: str, *, template_id: str, inputs: Mapping[str, Any]) -> str:
        """Return raw completion text for a rendered prompt.

        ``template_id`` and ``inputs`` are what the prompt was rendered from;
        hosted models can ignore them.
        """


class Tokenizer(ABC):
    name: str = "abstract"
    reentrant: bool = True

    @abstractmethod
    def count(self, text: str) -> int:
        ...


class PerceptualBackend(ABC):
    name: str = "abstract"
    reentrant: bool = False

    @abstractmethod
    def distance(self, a: np.ndarray, b: np.ndarray) -> float:
        """Symmetric perceptual distance with ``distance(a, a) == 0``."""


class EmbeddingBackend(ABC):
    name: str = "abstract"
    reentrant: bool = False

    @abstractmethod
    def embed_text(self, text: str) -> np.ndarray:
        ...

    @abstractmethod
    def embed_image(self, image: np.ndarray) -> np.ndarray:
        ...
