"""Prompt corpus files: one prompt per line, ``#`` comments, 1-based ids."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path


@dataclass(frozen=True)
class PromptCorpus:
    prompts: tuple[str, ...]
    source: str = ""

    def __len__(self) -> int:
        return len(self.prompts)

    def __getitem__(self, prompt_id: int) -> str:
        if not 1 <= prompt_id <= len(self.prompts):
            raise KeyError(f"corpus id {prompt_id} outside 1..{len(self.prompts)}")
        return self.prompts[prompt_id - 1]

    def items(self):
        return list(enumerate(self.prompts, start=1))


def parse_corpus(text: str, source: str = "") -> PromptCorpus:
    prompts = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            prompts.append(line)
    if not prompts:
        raise ValueError(f"prompt corpus {source or '<text>'} is empty")
    return PromptCorpus(tuple(prompts), source)


def load_prompt_corpus(path: str | Path | None = None) -> PromptCorpus:
    """Load ``path``, or the bundled 50-prompt evaluation corpus when None."""
    if path is None:
        res = resources.files("gridswitch.data").joinpath("corpus.txt")
        return parse_corpus(res.read_text(encoding="utf-8"), "bundled")
    path = Path(path)
    return parse_corpus(path.read_text(encoding="utf-8"), str(path))
