from gridswitch.backends.base import (
    DiffusionBackend,
    EmbeddingBackend,
    LLMBackend,
    PerceptualBackend,
    SegmentationBackend,
    Tokenizer,
)
from gridswitch.backends.stubs import (
    StubEmbedder,
    StubLLM,
    StubPerceptual,
    StubSegmenter,
    WhitespaceTokenizer,
)
from gridswitch.backends.toy import ToyDiffusion, guided_score, toy_denoise_step, toy_score, toy_target

__all__ = [
    "DiffusionBackend",
    "EmbeddingBackend",
    "LLMBackend",
    "PerceptualBackend",
    "SegmentationBackend",
    "StubEmbedder",
    "StubLLM",
    "StubPerceptual",
    "StubSegmenter",
    "Tokenizer",
    "ToyDiffusion",
    "WhitespaceTokenizer",
    "guided_score",
    "toy_denoise_step",
    "toy_score",
    "toy_target",
]
