"""
Error types raised by the toolkit.

Verification routines report inequality failures in their returned reports;
the exceptions below signal misuse, unmet preconditions, or configurations
that cannot be run.
"""

from typing import Dict, List, Optional


class AlgostabError(Exception):
    """Base class for all toolkit errors."""


class InputError(AlgostabError, ValueError):
    """Invalid argument: dimension mismatch, out-of-range parameter, short sequence."""


class HorizonNotFoundError(AlgostabError):
    """No attainment horizon K <= K_max satisfies the rate inequality on the samples."""

    def __init__(self, message: str, worst_ratio: float, K_max: int):
        super().__init__(message)
        self.worst_ratio = worst_ratio
        self.K_max = K_max

    def to_dict(self) -> Dict[str, float]:
        """Convert to dictionary format."""
        return {"error_type": "horizon_not_found", "worst_ratio": self.worst_ratio, "K_max": self.K_max}


class ContractViolationError(AlgostabError):
    """A theorem's precondition does not hold for the supplied objects."""


class ConfigError(AlgostabError):
    """Experiment configuration could not be loaded or validated."""

    def __init__(self, message: str, diagnostics: Optional[List[str]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
