"""Pull lists and prompt plans out of free-form LLM replies."""

from __future__ import annotations

import ast
import json
import re

from gridswitch.errors import ParseError

_SMART_QUOTES = str.maketrans({"“": '"', "”": '"', "‘": "'", "’": "'"})
_BRACKETED = re.compile(r"\[[^\[\]]*\]", re.DOTALL)
_ITEM = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s+(.+?)\s*$")
_QUOTES = "\"'` "


def _clean(items) -> list[str]:
    out = []
    for item in items:
        s = str(item).strip().strip(_QUOTES).strip()
        if s:
            out.append(s)
    return out


def parse_structured_list(raw: str) -> list[str]:
    """Extract a bracketed or line-itemized list of strings.

    Raises ParseError when neither form is present.
    """
    text = raw.translate(_SMART_QUOTES)
    for match in _BRACKETED.finditer(text):
        chunk = match.group(0)
        for loader in (json.loads, ast.literal_eval):
            try:
                value = loader(chunk)
            except (ValueError, SyntaxError):
                continue
            if isinstance(value, list) and all(isinstance(v, str) for v in value):
                return _clean(value)
        inner = chunk[1:-1].strip()
        if inner and not any(c in inner for c in "[]{}"):
            return _clean(inner.split(","))
    items = [m.group(1) for line in text.splitlines() if (m := _ITEM.match(line))]
    if items:
        return _clean(items)
    raise ParseError(f"no list found in reply: {raw[:80]!r}")


def parse_framewise(raw: str, n_frames: int) -> tuple[str, list[str]]:
    """Read ``{"fixed": ..., "dynamics": [...]}`` out of a reply.

    Falls back to a ``Fixed: ...`` line followed by an itemized list.
    """
    text = raw.translate(_SMART_QUOTES)
    fixed = dynamics = None
    start, end = text.find("{"), text.rfind("}")
    if 0 <= start < end:
        try:
            obj = json.loads(text[start : end + 1])
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict) and isinstance(obj.get("fixed"), str) and isinstance(obj.get("dynamics"), list):
            fixed = obj["fixed"].strip()
            dynamics = _clean(obj["dynamics"])
    if fixed is None:
        m = re.search(r"^\s*fixed\s*:\s*(.+)$", text, re.IGNORECASE | re.MULTILINE)
        if m is None:
            raise ParseError("reply has neither a JSON plan nor a 'Fixed:' line")
        fixed = m.group(1).strip().strip(_QUOTES)
        dynamics = parse_structured_list(text[m.end() :])
    if not fixed:
        raise ParseError("fixed scene descriptor is empty")
    if len(dynamics) != n_frames:
        raise ParseError(f"expected {n_frames} dynamic parts, got {len(dynamics)}")
    if len({d.casefold() for d in dynamics}) != len(dynamics):
        raise ParseError("dynamic parts are not distinct")
    return fixed, dynamics
