"""In-context templates stored as versioned text files.

Lookup order for ``name`` and ``version``: ``<root>/<model>/<name>.<version>.txt``,
``<root>/default/...``, then the bundled ``default`` set. Leading ``#`` lines are
comments. Placeholders use ``$name`` syntax.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from string import Template


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    version: str
    body: str

    def render(self, **values) -> str:
        return Template(self.body).substitute({k: str(v) for k, v in values.items()})


def _read(model: str, name: str, version: str, root: Path | None) -> str | None:
    filename = f"{name}.{version}.txt"
    if root is not None:
        p = Path(root) / model / filename
        return p.read_text(encoding="utf-8") if p.is_file() else None
    res = resources.files("gridswitch.text").joinpath("templates", model, filename)
    return res.read_text(encoding="utf-8") if res.is_file() else None


def load_template(name: str, version: str = "v1", model: str = "default", root: Path | None = None) -> PromptTemplate:
    text = _read(model, name, version, root)
    if text is None and model != "default":
        text = _read("default", name, version, root)
    if text is None and root is not None:
        text = _read("default", name, version, None)
    if text is None:
        raise FileNotFoundError(f"no template {name}.{version} for model {model!r}")
    lines = text.splitlines()
    while lines and lines[0].startswith("#"):
        lines.pop(0)
    return PromptTemplate(name, version, "\n".join(lines).strip() + "\n")
