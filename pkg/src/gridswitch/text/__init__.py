from gridswitch.text.parsing import parse_framewise, parse_structured_list
from gridswitch.text.prompts import (
    FramePrompt,
    LLMExchange,
    PromptPlan,
    detect_differences,
    enforce_token_budget,
    generate_framewise_prompts,
    plan_differences,
)

__all__ = [
    "FramePrompt",
    "LLMExchange",
    "PromptPlan",
    "detect_differences",
    "enforce_token_budget",
    "generate_framewise_prompts",
    "parse_framewise",
    "parse_structured_list",
    "plan_differences",
]
