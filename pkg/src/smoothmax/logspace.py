"""Signed log-magnitude numbers.

Quantities such as ``exp(lambda * M)`` reach ``e^500`` and beyond, so every
accumulation in the package is carried out on logarithms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


@dataclass(frozen=True)
class LogValue:
    """A real number stored as ``sign * exp(log_magnitude)``.

    Zero is represented exactly as ``sign == 0`` with ``log_magnitude == -inf``.
    """

    log_magnitude: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign}")
        if self.sign == 0 or self.log_magnitude == -math.inf:
            object.__setattr__(self, "sign", 0)
            object.__setattr__(self, "log_magnitude", -math.inf)
        elif math.isnan(self.log_magnitude):
            raise ValueError("log_magnitude is NaN")

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(-math.inf, 0)

    @classmethod
    def from_float(cls, x: float) -> "LogValue":
        if x == 0:
            return cls.zero()
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    @classmethod
    def from_logs(cls, logs, signs=None) -> "LogValue":
        """Sum of ``signs[i] * exp(logs[i])`` without leaving log space."""
        logs = np.asarray(logs, dtype=float)
        if logs.size == 0:
            return cls.zero()
        # sorted order makes the reduction independent of input order
        order = np.argsort(logs, kind="stable")
        logs = logs[order]
        if signs is None:
            val = float(logsumexp(logs))
            return cls(val, 1) if val > -math.inf else cls.zero()
        signs = np.asarray(signs, dtype=float)[order]
        val, sgn = logsumexp(logs, b=signs, return_sign=True)
        if sgn == 0 or not np.isfinite(val):
            return cls.zero()
        return cls(float(val), int(sgn))

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def __float__(self):
        if self.sign == 0:
            return 0.0
        with np.errstate(over="ignore"):
            return float(self.sign * np.exp(self.log_magnitude))

    def __neg__(self):
        return LogValue(self.log_magnitude, -self.sign)

    def __add__(self, other):
        other = _coerce(other)
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        return LogValue.from_logs([self.log_magnitude, other.log_magnitude],
                                  [self.sign, other.sign])

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __mul__(self, other):
        other = _coerce(other)
        if self.sign == 0 or other.sign == 0:
            return LogValue.zero()
        return LogValue(self.log_magnitude + other.log_magnitude, self.sign * other.sign)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("division by LogValue zero")
        if self.sign == 0:
            return LogValue.zero()
        return LogValue(self.log_magnitude - other.log_magnitude, self.sign * other.sign)

    def scale_log(self, log_factor: float) -> "LogValue":
        """Multiply by ``exp(log_factor)``."""
        if self.sign == 0:
            return self
        return LogValue(self.log_magnitude + log_factor, self.sign)

    def ratio_to(self, other: "LogValue") -> float:
        """``self / other`` as an ordinary float (assumed representable)."""
        return float(self / other)


def _coerce(x) -> LogValue:
    if isinstance(x, LogValue):
        return x
    return LogValue.from_float(float(x))


def leave_one_out_logsumexp(logs) -> np.ndarray:
    """``log sum_{j != i} exp(logs[j])`` for every ``i``.

    Built from prefix and suffix accumulations, so no cancellation occurs even
    when a single term dominates the total.
    """
    logs = np.asarray(logs, dtype=float)
    n = logs.size
    prefix = np.full(n + 1, -np.inf)
    suffix = np.full(n + 1, -np.inf)
    np.logaddexp.accumulate(logs, out=prefix[1:])
    suffix[:n] = np.logaddexp.accumulate(logs[::-1])[::-1]
    return np.logaddexp(prefix[:n], suffix[1:])
