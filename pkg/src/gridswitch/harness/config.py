"""Flat, strictly validated run configuration.

A config file is one JSON object of ``key: value`` pairs. Every key can be
overridden from the environment as ``GRIDSWITCH_<KEY>`` with dots replaced
by underscores, e.g. ``GRIDSWITCH_BACKEND_DIFFUSION=toy``. Precedence:
defaults < file < environment < command-line flags.
"""

from __future__ import annotations

import json
import os
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from gridswitch.attention import SwitchWindow
from gridswitch.backends import registry
from gridswitch.orchestrator import Backends, IntersectionStrategy, MultiPromptStrategy, PipelineConfig

ENV_PREFIX = "GRIDSWITCH_"

_INT, _FLOAT, _STR, _BOOL = "int", "float", "str", "bool"

# key -> (type, nullable, default)
SCHEMA: dict[str, tuple[str, bool, Any]] = {
    "num_frames": (_INT, False, 24),
    "num_steps": (_INT, False, 50),
    "guidance_scale": (_FLOAT, False, 11.0),
    "batch_size": (_INT, False, 3),
    "intersection_strategy": (_STR, False, "Previous"),
    "multi_prompt_strategy": (_STR, False, "VideoText"),
    "falloff": (_FLOAT, False, 2.0),
    "switch_t_min": (_FLOAT, True, None),
    "switch_t_max": (_FLOAT, True, None),
    "latent_channels": (_INT, False, 4),
    "latent_height": (_INT, False, 8),
    "latent_width": (_INT, False, 8),
    "seed": (_INT, False, 0),
    "world_seed": (_INT, False, 0),
    "grps": (_BOOL, False, True),
    "stm_override": (_FLOAT, True, None),
    "max_workers": (_INT, False, 1),
    "fps": (_FLOAT, False, 8.0),
    "backend.diffusion": (_STR, False, "toy"),
    "backend.segmentation": (_STR, False, "stub"),
    "backend.llm": (_STR, False, "stub"),
    "backend.tokenizer": (_STR, False, "whitespace"),
    "backend.perceptual": (_STR, False, "stub"),
    "backend.embedding": (_STR, False, "stub"),
}

_CHOICES = {
    "intersection_strategy": [s.value for s in IntersectionStrategy],
    "multi_prompt_strategy": [s.value for s in MultiPromptStrategy],
}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


def env_name(key: str) -> str:
    return ENV_PREFIX + key.upper().replace(".", "_")


def _coerce(key: str, value: Any) -> Any:
    kind, nullable, _ = SCHEMA[key]
    if value is None:
        if nullable:
            return None
        raise ValueError("may not be null")
    if kind == _BOOL:
        if isinstance(value, bool):
            return value
        raise ValueError(f"expected a boolean, got {value!r}")
    if kind == _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"expected an integer, got {value!r}")
        return value
    if kind == _FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"expected a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a string, got {value!r}")
    if key in _CHOICES and value not in _CHOICES[key]:
        raise ValueError(f"expected one of {_CHOICES[key]}, got {value!r}")
    return value


def _parse_env(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


@dataclass
class RunConfig:
    values: dict[str, Any] = field(default_factory=lambda: {k: v[2] for k, v in SCHEMA.items()})

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def to_json(self) -> dict[str, Any]:
        return dict(sorted(self.values.items()))

    def pipeline(self) -> PipelineConfig:
        v = self.values
        window = None
        if v["switch_t_min"] is not None or v["switch_t_max"] is not None:
            default = SwitchWindow.default(v["num_steps"])
            window = SwitchWindow(
                default.t_min if v["switch_t_min"] is None else v["switch_t_min"],
                default.t_max if v["switch_t_max"] is None else v["switch_t_max"],
            )
        return PipelineConfig(
            num_frames=v["num_frames"],
            num_steps=v["num_steps"],
            guidance_scale=v["guidance_scale"],
            batch_size=v["batch_size"],
            intersection_strategy=v["intersection_strategy"],
            multi_prompt_strategy=v["multi_prompt_strategy"],
            falloff=v["falloff"],
            switch_window=window,
            latent_shape=(v["latent_channels"], v["latent_height"], v["latent_width"]),
            seed=v["seed"],
            grps=v["grps"],
            stm_override=v["stm_override"],
            max_workers=v["max_workers"],
        )

    def backend_names(self) -> dict[str, str]:
        return {kind: self.values[f"backend.{kind}"] for kind in registry.KINDS}

    def backends(self) -> Backends:
        """Instantiate every configured backend; raises UnknownBackend naming the key."""
        names = self.backend_names()
        for kind, name in names.items():
            if not registry.exists(kind, name):
                raise registry.UnknownBackend(kind, name)
        v = self.values
        made = {
            kind: registry.create(
                kind,
                name,
                latent_shape=(v["latent_channels"], v["latent_height"], v["latent_width"]),
                num_steps=v["num_steps"],
                world_seed=v["world_seed"],
            )
            for kind, name in names.items()
        }
        return Backends(**made)


def build_config(
    file_values: Mapping[str, Any] | None = None,
    overrides: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    """Merge defaults, file values, environment and overrides; validate everything."""
    environ = os.environ if environ is None else environ
    problems = []
    merged = {k: v[2] for k, v in SCHEMA.items()}
    layers = [("config file", dict(file_values or {}))]
    env_layer = {k: _parse_env(environ[env_name(k)]) for k in SCHEMA if env_name(k) in environ}
    layers.append(("environment", env_layer))
    layers.append(("command line", {k: v for k, v in (overrides or {}).items() if v is not None}))
    for origin, layer in layers:
        for key, value in layer.items():
            if key not in SCHEMA:
                problems.append(f"{key}: unknown key ({origin})")
                continue
            if origin == "environment" and SCHEMA[key][0] == _STR and not isinstance(value, str):
                value = str(value)
            try:
                merged[key] = _coerce(key, value)
            except ValueError as exc:
                problems.append(f"{key}: {exc} ({origin})")
    if problems:
        raise ConfigError(problems)
    cfg = RunConfig(merged)
    try:
        cfg.pipeline()
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc
    return cfg


def load_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    file_values: dict[str, Any] = {}
    if path is not None:
        try:
            file_values = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: invalid JSON ({exc})"]) from exc
        if not isinstance(file_values, dict):
            raise ConfigError([f"{path}: expected a JSON object of key/value pairs"])
    return build_config(file_values, overrides, environ)
