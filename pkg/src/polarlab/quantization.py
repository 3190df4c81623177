"""Fixed-point arithmetic model for the list decoders.

Channel LLRs, internal LLRs and path metrics each have their own format
Q(total, frac): ``total`` bits of which ``frac`` are fractional. LLR formats
are signed and symmetric, path metrics unsigned. In ``float`` mode every
operation is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

QuantMode = Literal["float", "fixed"]
ValueClass = Literal["channel_llr", "internal_llr", "pm"]

VALUE_CLASSES: tuple[str, ...] = ("channel_llr", "internal_llr", "pm")


@dataclass(frozen=True)
class FixedFormat:
    total_bits: int
    frac_bits: int

    @property
    def step(self) -> float:
        return 2.0 ** -self.frac_bits


@dataclass(frozen=True)
class Quantizer:
    """Saturating fixed-point model (or the float identity)."""

    mode: QuantMode = "float"
    channel_llr: FixedFormat = FixedFormat(4, 2)
    internal_llr: FixedFormat = FixedFormat(6, 2)
    pm: FixedFormat = FixedFormat(8, 2)

    def format_of(self, value_class: ValueClass) -> FixedFormat:
        if value_class not in VALUE_CLASSES:
            raise ValueError(f"unknown value class {value_class!r}")
        return getattr(self, value_class)

    @property
    def fixed(self) -> bool:
        return self.mode == "fixed"

    def limits(self, value_class: ValueClass) -> tuple[float, float]:
        """Return the representable (low, high) range of a value class."""
        fmt = self.format_of(value_class)
        if value_class == "pm":
            return 0.0, (2**fmt.total_bits - 1) * fmt.step
        high = (2 ** (fmt.total_bits - 1) - 1) * fmt.step
        return -high, high

    def __call__(self, values, value_class: ValueClass):
        return quantize(values, self, value_class)

    def saturate(self, values: np.ndarray, value_class: ValueClass) -> np.ndarray:
        """Clip values already on the grid (results of saturating adds)."""
        if not self.fixed:
            return values
        low, high = self.limits(value_class)
        return np.clip(values, low, high)


FLOAT = Quantizer("float")
FIXED = Quantizer("fixed")


def quantize(values, quantizer: Quantizer, value_class: ValueClass):
    """Round to the class grid (half away from zero) and saturate.

    Args:
        values: Scalar or array of real values
        quantizer: Arithmetic model
        value_class: One of ``channel_llr``, ``internal_llr``, ``pm``

    Returns:
        Values of the same shape; unchanged in float mode
    """
    if value_class not in VALUE_CLASSES:
        raise ValueError(f"unknown value class {value_class!r}")
    if not quantizer.fixed:
        return values
    step = quantizer.format_of(value_class).step
    array = np.asarray(values, dtype=np.float64)
    rounded = np.sign(array) * np.floor(np.abs(array) / step + 0.5) * step
    low, high = quantizer.limits(value_class)
    result = np.clip(rounded, low, high)
    if np.ndim(values) == 0:
        return float(result)
    return result
