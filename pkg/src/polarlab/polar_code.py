"""Polar code construction, encoding and CRC handling.

A polar code of length N = 2^n is described by its reliability order (bit
channels sorted from least to most reliable) and the frozen mask derived from
it: the N - K least reliable positions are frozen to zero and the remaining K
carry payload bits followed by CRC bits.

Bit vectors are numpy ``uint8`` arrays holding 0/1 values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Literal

import numpy as np
from scipy.optimize import brentq

from polarlab.exceptions import CodeParameterError, ConstructionError, ContractError

logger = logging.getLogger(__name__)

ConstructionMethod = Literal["bhattacharyya", "gaussian_approximation", "from_file"]

CONSTRUCTION_METHODS: tuple[str, ...] = ("bhattacharyya", "gaussian_approximation", "from_file")

# Low-order coefficients; the leading x^width term is implicit.
DEFAULT_CRC_POLYNOMIALS: dict[int, int] = {
    4: 0x3,  # x^4 + x + 1
    8: 0x07,  # x^8 + x^2 + x + 1
    12: 0x80F,
    16: 0x1021,
    24: 0x864CFB,
}


def as_bits(values: Iterable[int] | np.ndarray | str, length: int | None = None) -> np.ndarray:
    """Convert ``values`` to a 0/1 ``uint8`` vector.

    Strings such as ``"1011"`` are accepted for convenience.

    Args:
        values: Bits as an iterable, array or string of '0'/'1'
        length: Required length, checked when given

    Returns:
        A new ``uint8`` array
    """
    if isinstance(values, str):
        values = [int(c) for c in values.strip() if c in "01"]
    bits = np.asarray(values, dtype=np.int64).reshape(-1)
    if np.any((bits != 0) & (bits != 1)):
        raise ContractError("bit vector contains values other than 0 and 1")
    if length is not None and bits.size != length:
        raise ContractError(f"expected {length} bits, got {bits.size}")
    return bits.astype(np.uint8)


def _frozen_array(values: np.ndarray) -> np.ndarray:
    values = np.array(values)
    values.setflags(write=False)
    return values


def is_power_of_two(value: int) -> bool:
    return value >= 1 and (value & (value - 1)) == 0


# --- CRC -------------------------------------------------------------------


@dataclass(frozen=True)
class CrcSpec:
    """Cyclic redundancy check parameters.

    ``polynomial`` holds the ``width`` low-order coefficients of the divisor
    (the x^width term is implicit); ``initial_value`` preloads the register.
    """

    width: int
    polynomial: int
    initial_value: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.width % 4:
            raise CodeParameterError(f"CRC width must be a positive multiple of 4, got {self.width}")
        if not 0 <= self.polynomial < (1 << self.width):
            raise CodeParameterError(f"CRC polynomial 0x{self.polynomial:x} does not fit {self.width} bits")
        if not self.polynomial & 1:
            raise CodeParameterError(f"CRC polynomial 0x{self.polynomial:x} must have its x^0 term set")
        if not 0 <= self.initial_value < (1 << self.width):
            raise CodeParameterError(f"CRC initial value 0x{self.initial_value:x} does not fit {self.width} bits")

    @classmethod
    def default(cls, width: int) -> CrcSpec:
        """Return the default CRC of the given width."""
        if width not in DEFAULT_CRC_POLYNOMIALS:
            raise CodeParameterError(f"no default CRC polynomial of width {width}")
        return cls(width, DEFAULT_CRC_POLYNOMIALS[width], 0)

    @classmethod
    def from_hex(cls, width: int, poly_hex: str | None = None, init_hex: str | None = None) -> CrcSpec:
        """Build a spec from the hex strings used in code descriptor files."""
        poly = int(poly_hex, 16) if poly_hex else cls.default(width).polynomial
        init = int(init_hex, 16) if init_hex else 0
        return cls(width, poly, init)

    def to_dict(self) -> dict[str, object]:
        return {
            "width": self.width,
            "poly_hex": f"0x{self.polynomial:0{self.width // 4}X}",
            "init_hex": f"0x{self.initial_value:0{self.width // 4}X}",
        }

    @cached_property
    def poly_bits(self) -> np.ndarray:
        """Divisor coefficients x^(width-1) .. x^0."""
        return _frozen_array(_int_to_bits(self.polynomial, self.width))

    @cached_property
    def init_bits(self) -> np.ndarray:
        return _frozen_array(_int_to_bits(self.initial_value, self.width))

    def initial_registers(self, count: int) -> np.ndarray:
        """Return ``count`` CRC registers preloaded with the initial value."""
        return np.tile(self.init_bits, (count, 1))


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def crc_step(spec: CrcSpec, registers: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Shift one message bit into each of a batch of CRC registers.

    Args:
        spec: CRC parameters
        registers: (P, width) registers, most significant coefficient first
        bits: (P,) incoming message bits

    Returns:
        The updated (P, width) registers
    """
    feedback = registers[:, 0] ^ bits
    shifted = np.zeros_like(registers)
    shifted[:, :-1] = registers[:, 1:]
    return shifted ^ (feedback[:, None] & spec.poly_bits[None, :])


def crc_compute(spec: CrcSpec, message: Iterable[int] | np.ndarray) -> np.ndarray:
    """Return the ``spec.width`` CRC bits of ``message``.

    The result is the remainder of message * x^width divided by the
    polynomial over GF(2), with the register preloaded by the initial value.
    """
    bits = as_bits(message)
    registers = spec.initial_registers(1)
    for bit in bits:
        registers = crc_step(spec, registers, np.array([bit], dtype=np.uint8))
    return registers[0].copy()


def crc_check(spec: CrcSpec, message_with_crc: Iterable[int] | np.ndarray) -> bool:
    """Check that the trailing ``spec.width`` bits are the CRC of the prefix."""
    bits = as_bits(message_with_crc)
    if bits.size < spec.width:
        raise ContractError(f"message of {bits.size} bits is shorter than CRC width {spec.width}")
    split = bits.size - spec.width
    return bool(np.array_equal(crc_compute(spec, bits[:split]), bits[split:]))


# --- construction ----------------------------------------------------------

_PHI_ALPHA = 0.4527
_PHI_BETA = 0.86
_PHI_GAMMA = 0.0218
_PHI_SPLIT = 10.0
_LOG_PHI_AT_SPLIT = -_PHI_ALPHA * _PHI_SPLIT**_PHI_BETA + _PHI_GAMMA


def _log_phi(mean: float) -> float:
    """Log of the Chung phi function for an LLR of the given mean."""
    if mean <= 0.0:
        return 0.0
    if mean < _PHI_SPLIT:
        return min(0.0, -_PHI_ALPHA * mean**_PHI_BETA + _PHI_GAMMA)
    return 0.5 * math.log(math.pi / mean) - mean / 4.0 + math.log1p(-10.0 / (7.0 * mean))


def _log_phi_inverse(target: float) -> float:
    if target >= 0.0:
        return 0.0
    if target >= _LOG_PHI_AT_SPLIT:
        return ((_PHI_GAMMA - target) / _PHI_ALPHA) ** (1.0 / _PHI_BETA)
    upper = 2.0 * _PHI_SPLIT
    while _log_phi(upper) > target:
        upper *= 2.0
    return brentq(lambda m: _log_phi(m) - target, _PHI_SPLIT, upper, xtol=1e-12)


def _ga_minus(mean: float) -> float:
    log_p = _log_phi(mean)
    # 1 - (1 - phi)^2 = phi * (2 - phi)
    return _log_phi_inverse(log_p + math.log(2.0 - math.exp(log_p)))


def _expand(values: np.ndarray, minus, plus) -> np.ndarray:
    """Grow the per-channel metric by one polarization stage.

    The most significant index bit is applied first, so after n stages index
    i follows the left (0) / right (1) branches of the decoding tree.
    """
    grown = np.empty(values.size * 2)
    grown[0::2] = minus(values)
    grown[1::2] = plus(values)
    return grown


def construct_reliability(
    N: int,
    design_ebn0_db: float,
    method: ConstructionMethod = "gaussian_approximation",
    *,
    rate: float = 0.5,
    path: str | Path | None = None,
) -> np.ndarray:
    """Return the reliability order of the N bit channels, least reliable first.

    Args:
        N: Code length (power of two)
        design_ebn0_db: Design Eb/N0 in dB
        method: Construction method
        rate: Design code rate used to turn Eb/N0 into a channel parameter
        path: Reliability file, required by ``from_file``

    Returns:
        Read-only permutation of 0..N-1
    """
    if not is_power_of_two(N):
        raise ConstructionError(f"code length {N} is not a power of two")
    if not math.isfinite(design_ebn0_db):
        raise ConstructionError("design Eb/N0 must be finite")
    if not 0.0 < rate <= 1.0:
        raise ConstructionError(f"design rate {rate} outside (0, 1]")
    n = N.bit_length() - 1
    snr = rate * 10.0 ** (design_ebn0_db / 10.0)

    if method == "from_file":
        if path is None:
            raise ConstructionError("from_file construction needs a reliability file")
        return load_reliability_file(path, N)

    if method == "bhattacharyya":
        log_z = np.array([-snr])
        for _ in range(n):
            log_z = _expand(
                log_z,
                lambda lz: lz + np.log(2.0 - np.exp(lz)),
                lambda lz: 2.0 * lz,
            )
        order = np.argsort(-log_z, kind="stable")
    elif method == "gaussian_approximation":
        means = np.array([4.0 * snr])  # 2 / sigma^2 with sigma^2 = 1 / (2 R Eb/N0)
        for _ in range(n):
            means = _expand(
                means,
                lambda m: np.array([_ga_minus(float(v)) for v in m]),
                lambda m: 2.0 * m,
            )
        order = np.argsort(means, kind="stable")
    else:
        raise ConstructionError(f"unknown construction method {method!r}")

    logger.debug("constructed N=%d order with %s at %.2f dB", N, method, design_ebn0_db)
    return _frozen_array(order.astype(np.int64))


def validate_permutation(order: Iterable[int], N: int) -> np.ndarray:
    """Check that ``order`` is a bijection on 0..N-1 and return it read-only."""
    values = np.asarray(list(order), dtype=np.int64)
    if values.size != N:
        raise ConstructionError(f"reliability order has {values.size} entries, expected {N}")
    if not np.array_equal(np.sort(values), np.arange(N)):
        raise ConstructionError("reliability order is not a permutation of 0..N-1")
    return _frozen_array(values)


def load_reliability_file(path: str | Path, N: int) -> np.ndarray:
    """Load a reliability sequence: one decimal index per line, least reliable first."""
    try:
        lines = Path(path).read_text().split()
        values = [int(token) for token in lines]
    except (OSError, ValueError) as e:
        raise ConstructionError(f"cannot read reliability file {path}: {e}") from e
    return validate_permutation(values, N)


def write_reliability_file(path: str | Path, order: np.ndarray) -> None:
    Path(path).write_text("".join(f"{int(i)}\n" for i in order))


# --- codes -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CrcSegment:
    """Message and CRC positions protected by one CRC.

    Positions are natural bit indices in ascending order.
    """

    message_positions: np.ndarray
    crc_positions: np.ndarray
    crc: CrcSpec | None = None

    @property
    def width(self) -> int:
        return self.crc.width if self.crc else 0


@dataclass(frozen=True, eq=False)
class CrcLayout:
    """How payload and CRC bits map onto the non-frozen positions."""

    N: int
    segments: tuple[CrcSegment, ...]

    @cached_property
    def payload_positions(self) -> np.ndarray:
        if not self.segments:
            return _frozen_array(np.zeros(0, dtype=np.int64))
        return _frozen_array(np.concatenate([s.message_positions for s in self.segments]))

    @property
    def payload_length(self) -> int:
        return int(self.payload_positions.size)

    @cached_property
    def message_segment(self) -> np.ndarray:
        """Segment index of every message position that feeds a CRC, -1 elsewhere."""
        table = np.full(self.N, -1, dtype=np.int64)
        for index, segment in enumerate(self.segments):
            if segment.crc is not None:
                table[segment.message_positions] = index
        return _frozen_array(table)

    def place(self, payload: Iterable[int] | np.ndarray) -> np.ndarray:
        """Write payload and CRC bits onto a zeroed length-N vector."""
        bits = as_bits(payload)
        if bits.size != self.payload_length:
            raise ContractError(f"payload must have {self.payload_length} bits, got {bits.size}")
        u = np.zeros(self.N, dtype=np.uint8)
        start = 0
        for segment in self.segments:
            stop = start + segment.message_positions.size
            message = bits[start:stop]
            u[segment.message_positions] = message
            if segment.crc is not None:
                u[segment.crc_positions] = crc_compute(segment.crc, message)
            start = stop
        return u

    def extract(self, u: np.ndarray) -> np.ndarray:
        """Read the payload back out of a length-N vector."""
        return np.asarray(u, dtype=np.uint8)[self.payload_positions]


def layout_for_positions(N: int, info_positions: np.ndarray, crc: CrcSpec | None) -> CrcSegment:
    """Split sorted information positions into message and trailing CRC positions."""
    info_positions = np.sort(np.asarray(info_positions, dtype=np.int64))
    width = crc.width if crc else 0
    split = info_positions.size - width
    return CrcSegment(
        message_positions=_frozen_array(info_positions[:split]),
        crc_positions=_frozen_array(info_positions[split:]),
        crc=crc,
    )


@dataclass(frozen=True, eq=False)
class PolarCode:
    """A polar code ready to be encoded and decoded."""

    n: int
    N: int
    K: int
    frozen_mask: np.ndarray
    reliability_order: np.ndarray
    crc: CrcSpec | None = None
    name: str = field(default="")

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def crc_width(self) -> int:
        return self.crc.width if self.crc else 0

    @property
    def payload_length(self) -> int:
        return self.K - self.crc_width

    @cached_property
    def info_positions(self) -> np.ndarray:
        return _frozen_array(np.flatnonzero(~self.frozen_mask))

    @cached_property
    def frozen_positions(self) -> np.ndarray:
        return _frozen_array(np.flatnonzero(self.frozen_mask))

    @cached_property
    def layout(self) -> CrcLayout:
        return CrcLayout(self.N, (layout_for_positions(self.N, self.info_positions, self.crc),))

    @property
    def label(self) -> str:
        return self.name or f"PC({self.N},{self.K})"


def build_code(
    N: int,
    K: int,
    reliability_order: Iterable[int] | np.ndarray,
    crc: CrcSpec | None = None,
) -> PolarCode:
    """Freeze the N - K least reliable positions of ``reliability_order``."""
    if not is_power_of_two(N):
        raise ConstructionError(f"code length {N} is not a power of two")
    if not 0 < K <= N:
        raise CodeParameterError(f"K={K} must satisfy 0 < K <= N={N}")
    if crc is not None and K <= crc.width:
        raise CodeParameterError(f"K={K} leaves no payload next to a {crc.width}-bit CRC")
    order = validate_permutation(reliability_order, N)
    frozen = np.zeros(N, dtype=bool)
    frozen[order[: N - K]] = True
    return PolarCode(
        n=N.bit_length() - 1,
        N=N,
        K=K,
        frozen_mask=_frozen_array(frozen),
        reliability_order=order,
        crc=crc,
    )


def polar_transform(bits: np.ndarray) -> np.ndarray:
    """Multiply by the n-fold Kronecker power of [[1, 0], [1, 1]] over GF(2).

    Works on the last axis of a batch with an in-place butterfly of n
    stages; the transform is its own inverse.
    """
    x = np.array(bits, dtype=np.uint8, copy=True)
    size = x.shape[-1]
    lead = x.shape[:-1]
    half = 1
    while half < size:
        view = x.reshape(*lead, size // (2 * half), 2, half)
        view[..., 0, :] ^= view[..., 1, :]
        half *= 2
    return x


def encode(code: PolarCode, u: Iterable[int] | np.ndarray) -> np.ndarray:
    """Encode a length-N input vector whose frozen positions are zero."""
    bits = as_bits(u, code.N)
    if np.any(bits[code.frozen_mask]):
        raise ContractError("input vector has a nonzero frozen position")
    return polar_transform(bits)


def place_payload(
    code: PolarCode,
    payload: Iterable[int] | np.ndarray,
    layout: CrcLayout | None = None,
) -> np.ndarray:
    """Build the encoder input u from a payload.

    Payload bits and then their CRC are written onto the non-frozen indices in
    ascending natural order; frozen indices stay zero.
    """
    return (layout or code.layout).place(payload)
