"""Common result type for analytic evaluators.

Every quadrature-backed or series-backed evaluator in this package returns an
EvalResult: a complex value together with a nonnegative absolute-error
estimate.  The estimate is meant to be honest but cheap; it accumulates
linearly under addition and scaling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class EvalResult:
    """A complex value with a nonnegative absolute-error estimate."""

    value: complex
    err: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.err) or self.err < 0:
            raise ValueError(f"error estimate must be finite and >= 0, got {self.err}")
        v = complex(self.value)
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ValueError(f"value must be finite, got {v}")

    @property
    def real(self) -> float:
        return complex(self.value).real

    @property
    def imag(self) -> float:
        return complex(self.value).imag

    def __add__(self, other: "EvalResult | complex | float") -> "EvalResult":
        if isinstance(other, EvalResult):
            return EvalResult(complex(self.value) + complex(other.value), self.err + other.err)
        return EvalResult(complex(self.value) + complex(other), self.err)

    __radd__ = __add__

    def __sub__(self, other: "EvalResult | complex | float") -> "EvalResult":
        if isinstance(other, EvalResult):
            return EvalResult(complex(self.value) - complex(other.value), self.err + other.err)
        return EvalResult(complex(self.value) - complex(other), self.err)

    def __mul__(self, c: "EvalResult | complex | float") -> "EvalResult":
        if isinstance(c, EvalResult):
            a, b = complex(self.value), complex(c.value)
            return EvalResult(a * b, abs(a) * c.err + abs(b) * self.err + self.err * c.err)
        return EvalResult(complex(self.value) * complex(c), self.err * abs(complex(c)))

    __rmul__ = __mul__

    def scaled_err(self, extra: float) -> "EvalResult":
        """Same value with `extra` added to the error budget."""
        return EvalResult(self.value, self.err + abs(extra))
