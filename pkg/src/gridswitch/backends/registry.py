"""Backend lookup by ``(kind, name)``.

Built-in toys and stubs are registered here. Out-of-tree adapters either
call :func:`register` or publish an entry point in the
``gridswitch.<kind>`` group whose object is a factory accepting keyword
arguments.
"""

from __future__ import annotations

from collections.abc import Callable
from importlib.metadata import entry_points
from typing import Any

from gridswitch.backends import stubs
from gridswitch.backends.toy import ToyDiffusion

KINDS = ("diffusion", "segmentation", "llm", "tokenizer", "perceptual", "embedding")

_FACTORIES: dict[str, dict[str, Callable[..., Any]]] = {k: {} for k in KINDS}


class UnknownBackend(KeyError):
    def __init__(self, kind: str, name: str):
        super().__init__(f"backend.{kind}: no backend registered as {name!r}")
        self.key = f"backend.{kind}"
        self.name = name

    def __str__(self) -> str:
        return self.args[0]


def register(kind: str, name: str, factory: Callable[..., Any]) -> None:
    if kind not in KINDS:
        raise ValueError(f"unknown backend kind {kind!r}; expected one of {KINDS}")
    _FACTORIES[kind][name] = factory


def available(kind: str) -> list[str]:
    names = set(_FACTORIES[kind])
    names.update(ep.name for ep in entry_points(group=f"gridswitch.{kind}"))
    return sorted(names)


def _lookup(kind: str, name: str) -> Callable[..., Any]:
    if kind not in KINDS:
        raise ValueError(f"unknown backend kind {kind!r}; expected one of {KINDS}")
    if name in _FACTORIES[kind]:
        return _FACTORIES[kind][name]
    for ep in entry_points(group=f"gridswitch.{kind}"):
        if ep.name == name:
            factory = ep.load()
            _FACTORIES[kind][name] = factory
            return factory
    raise UnknownBackend(kind, name)


def create(kind: str, name: str, **kwargs: Any) -> Any:
    return _lookup(kind, name)(**kwargs)


def exists(kind: str, name: str) -> bool:
    try:
        _lookup(kind, name)
    except UnknownBackend:
        return False
    return True


def _toy_diffusion(latent_shape=(4, 8, 8), num_steps=50, world_seed=0, **_):
    return ToyDiffusion(latent_shape=tuple(latent_shape), num_steps=num_steps, world_seed=world_seed)


register("diffusion", "toy", _toy_diffusion)
register("segmentation", "stub", lambda **_: stubs.StubSegmenter())
register("llm", "stub", lambda **_: stubs.StubLLM())
register("tokenizer", "whitespace", lambda **_: stubs.WhitespaceTokenizer())
register("perceptual", "stub", lambda **_: stubs.StubPerceptual())
register("embedding", "stub", lambda **_: stubs.StubEmbedder())
