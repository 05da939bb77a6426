"""Signed log-magnitude scalars.

Configuration integrals grow factorially with particle number, so tables
keep every value as (sign, log|value|) next to the raw float.  The raw
float is used whenever it is representable; the log form is authoritative
for storage and for ratios that would overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class SLog:
    """A real number stored as sign and natural log of its magnitude."""

    sign: int  # -1, 0, +1
    log_mag: float  # log|x|; -inf when sign == 0

    @staticmethod
    def from_value(x: float) -> "SLog":
        if x == 0.0:
            return SLog(0, float("-inf"))
        return SLog(1 if x > 0 else -1, math.log(abs(x)))

    @staticmethod
    def from_log(sign: int, log_mag: float) -> "SLog":
        if sign == 0 or log_mag == float("-inf"):
            return SLog(0, float("-inf"))
        return SLog(1 if sign > 0 else -1, float(log_mag))

    @property
    def value(self) -> float:
        """Raw float; overflows to +-inf when the magnitude is not representable."""
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.log_mag)
        except OverflowError:
            return self.sign * float("inf")

    def is_representable(self) -> bool:
        return self.sign == 0 or abs(self.log_mag) < 700.0

    def mul(self, other: "SLog") -> "SLog":
        if self.sign == 0 or other.sign == 0:
            return SLog(0, float("-inf"))
        return SLog(self.sign * other.sign, self.log_mag + other.log_mag)

    def div(self, other: "SLog") -> "SLog":
        if other.sign == 0:
            raise ZeroDivisionError("SLog division by zero")
        if self.sign == 0:
            return SLog(0, float("-inf"))
        return SLog(self.sign * other.sign, self.log_mag - other.log_mag)

    def scaled(self, factor_log: float) -> "SLog":
        """Multiply by exp(factor_log) without leaving log space."""
        if self.sign == 0:
            return self
        return SLog(self.sign, self.log_mag + factor_log)


def slog_sum(terms) -> SLog:
    """Signed logsumexp over an iterable of SLog values."""
    terms = [t for t in terms if t.sign != 0]
    if not terms:
        return SLog(0, float("-inf"))
    top = max(t.log_mag for t in terms)
    acc = 0.0
    for t in terms:
        acc += t.sign * math.exp(t.log_mag - top)
    if acc == 0.0:
        # exact cancellation at this precision
        return SLog(0, float("-inf"))
    return SLog(1 if acc > 0 else -1, top + math.log(abs(acc)))
