"""Training-free text-to-video generation by grid prompt switching on diffusion latents."""

from gridswitch.errors import (
    BackendError,
    BudgetError,
    ContractViolation,
    GenerationError,
    ParseError,
    PipelineError,
)

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "BudgetError",
    "ContractViolation",
    "GenerationError",
    "ParseError",
    "PipelineError",
    "__version__",
]
