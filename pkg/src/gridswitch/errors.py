"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class ContractViolation(ValueError):
    """An input broke a shape, range or finiteness contract."""


class BackendError(RuntimeError):
    """A backend call failed; carries whatever context the caller attached."""

    def __init__(self, message: str, *, step: int | None = None, phrase: str | None = None):
        super().__init__(message)
        self.step = step
        self.phrase = phrase


class ParseError(ValueError):
    """LLM output did not contain a recognizable structure."""


class BudgetError(ValueError):
    """A prompt part exceeded its token allocation."""

    def __init__(self, part: str, count: int, limit: int):
        super().__init__(f"{part}: {count} > {limit}")
        self.part = part
        self.count = count
        self.limit = limit


class GenerationError(RuntimeError):
    """LLM generation gave up after retries. ``audit`` holds every exchange."""

    def __init__(self, message: str, audit: list | None = None):
        super().__init__(message)
        self.audit = list(audit or [])


class PipelineError(RuntimeError):
    """Wraps a module error with the frame index it occurred at."""

    def __init__(self, frame_index: int | None, cause: BaseException):
        where = "prompt planning" if frame_index is None else f"frame {frame_index}"
        super().__init__(f"{where}: {type(cause).__name__}: {cause}")
        self.frame_index = frame_index
        self.cause = cause
