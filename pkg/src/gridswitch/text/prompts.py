"""Framewise prompt generation and difference detection on top of an LLM backend."""

from __future__ import annotations

import json
from collections.abc import Callable, Mapping
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, TypeVar

from gridswitch.attention import DifferenceList
from gridswitch.backends.base import LLMBackend, Tokenizer
from gridswitch.errors import BudgetError, GenerationError, ParseError
from gridswitch.text.parsing import parse_framewise, parse_structured_list
from gridswitch.text.templates import PromptTemplate, load_template

FIXED_TOKENS = 60
DYNAMIC_TOKENS = 15
CONTEXT_TOKENS = 77
BUFFER_TOKENS = 2
RETRY_LIMIT = 3

T = TypeVar("T")


@dataclass(frozen=True)
class FramePrompt:
    fixed: str
    dynamic: str
    fixed_tokens: int
    dynamic_tokens: int

    @property
    def text(self) -> str:
        if not self.dynamic:
            return self.fixed
        if not self.fixed:
            return self.dynamic
        return f"{self.fixed} {self.dynamic}"

    def within_budget(self) -> bool:
        return (
            self.fixed_tokens <= FIXED_TOKENS
            and self.dynamic_tokens <= DYNAMIC_TOKENS
            and self.fixed_tokens + self.dynamic_tokens <= CONTEXT_TOKENS - BUFFER_TOKENS
        )


@dataclass
class LLMExchange:
    template_id: str
    rendered_prompt: str
    raw_response: str
    parse_status: str
    attempt: int


@dataclass
class PromptPlan:
    user_text: str
    frames: list[FramePrompt]
    differences: list[DifferenceList] = field(default_factory=list)

    @property
    def fixed(self) -> str:
        return self.frames[0].fixed if self.frames else ""

    def to_json(self) -> dict[str, Any]:
        return {
            "user_text": self.user_text,
            "fixed": self.fixed,
            "dynamics": [f.dynamic for f in self.frames],
            "differences": [list(d.phrases) for d in self.differences],
            "token_counts": [
                {"fixed": f.fixed_tokens, "dynamic": f.dynamic_tokens} for f in self.frames
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "PromptPlan":
        counts = obj.get("token_counts") or [{"fixed": 0, "dynamic": 0}] * len(obj["dynamics"])
        frames = [
            FramePrompt(obj["fixed"], d, int(c["fixed"]), int(c["dynamic"]))
            for d, c in zip(obj["dynamics"], counts)
        ]
        diffs = [DifferenceList.from_iterable(d) for d in obj.get("differences", [])]
        return cls(obj.get("user_text", ""), frames, diffs)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PromptPlan":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def enforce_token_budget(fixed: str, dynamic: str, tokenizer: Tokenizer) -> FramePrompt:
    nf = tokenizer.count(fixed)
    nd = tokenizer.count(dynamic) if dynamic else 0
    if nf > FIXED_TOKENS:
        raise BudgetError("fixed", nf, FIXED_TOKENS)
    if nd > DYNAMIC_TOKENS:
        raise BudgetError("dynamic", nd, DYNAMIC_TOKENS)
    if nf + nd > CONTEXT_TOKENS - BUFFER_TOKENS:
        raise BudgetError("total", nf + nd, CONTEXT_TOKENS - BUFFER_TOKENS)
    return FramePrompt(fixed, dynamic, nf, nd)


def _ask(
    llm: LLMBackend,
    template: PromptTemplate,
    inputs: Mapping[str, Any],
    parse: Callable[[str], T],
    audit: list[LLMExchange],
    retries: int = RETRY_LIMIT,
) -> T:
    """Call the LLM until ``parse`` accepts the reply, at most ``retries`` times."""
    base = template.render(**inputs)
    reask = load_template("reask")
    prompt = base
    last_error = None
    exchanges: list[LLMExchange] = []
    for attempt in range(1, retries + 1):
        raw = llm.complete(prompt, template_id=template.template_id, inputs=inputs)
        try:
            value = parse(raw)
        except ParseError as exc:
            exchanges.append(LLMExchange(template.template_id, prompt, raw, f"error: {exc}", attempt))
            audit.append(exchanges[-1])
            last_error = exc
            prompt = base + "\n" + reask.render(error=exc)
            continue
        audit.append(LLMExchange(template.template_id, prompt, raw, "ok", attempt))
        return value
    raise GenerationError(
        f"{template.template_id}: no usable reply after {retries} attempts ({last_error})",
        audit=exchanges,
    )


def _shorten(llm: LLMBackend, text: str, limit: int, audit: list[LLMExchange], model: str) -> str:
    template = load_template("shorten", model=model)
    inputs = {"text": text, "limit": limit}
    prompt = template.render(**inputs)
    raw = llm.complete(prompt, template_id="shorten", inputs=inputs)
    audit.append(LLMExchange("shorten", prompt, raw, "ok", 1))
    return raw.strip().strip("\"'")


def generate_framewise_prompts(
    user_text: str,
    n_frames: int,
    llm: LLMBackend,
    tokenizer: Tokenizer,
    *,
    audit: list[LLMExchange] | None = None,
    model: str = "default",
) -> PromptPlan:
    """Ask for one shared scene descriptor and ``n_frames`` dynamic parts.

    Parts over budget get one shortening request each; if still over, a
    BudgetError is raised. Differences are left empty; see
    :func:`plan_differences`.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if not user_text.strip():
        raise ValueError("user_text must be non-empty")
    audit = [] if audit is None else audit
    template = load_template("framewise", model=model)
    inputs = {
        "user_text": user_text,
        "n_frames": n_frames,
        "fixed_limit": FIXED_TOKENS,
        "dynamic_limit": DYNAMIC_TOKENS,
    }
    fixed, dynamics = _ask(llm, template, inputs, lambda raw: parse_framewise(raw, n_frames), audit)

    if tokenizer.count(fixed) > FIXED_TOKENS:
        fixed = _shorten(llm, fixed, FIXED_TOKENS, audit, model)
    dynamics = [
        _shorten(llm, d, DYNAMIC_TOKENS, audit, model) if tokenizer.count(d) > DYNAMIC_TOKENS else d
        for d in dynamics
    ]
    frames = [enforce_token_budget(fixed, d, tokenizer) for d in dynamics]
    return PromptPlan(user_text, frames, [])


def _nonempty_list(raw: str) -> list[str]:
    items = parse_structured_list(raw)
    if not items:
        raise ParseError("empty difference list")
    return items


def detect_differences(
    y: FramePrompt,
    y_next: FramePrompt,
    llm: LLMBackend,
    *,
    audit: list[LLMExchange] | None = None,
    model: str = "default",
) -> DifferenceList:
    if y.text == y_next.text:
        return DifferenceList()
    audit = [] if audit is None else audit
    template = load_template("differences", model=model)
    items = _ask(llm, template, {"previous": y.text, "next": y_next.text}, _nonempty_list, audit)
    return DifferenceList.from_iterable(items)


def plan_differences(
    plan: PromptPlan,
    llm: LLMBackend,
    *,
    audit: list[LLMExchange] | None = None,
    model: str = "default",
) -> PromptPlan:
    """Fill ``plan.differences`` for every consecutive frame pair."""
    plan.differences = [
        detect_differences(a, b, llm, audit=audit, model=model)
        for a, b in zip(plan.frames, plan.frames[1:])
    ]
    return plan


def audit_to_json(audit: list[LLMExchange]) -> list[dict[str, Any]]:
    return [asdict(a) for a in audit]
