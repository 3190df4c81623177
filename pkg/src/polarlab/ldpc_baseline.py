"""Quasi-cyclic LDPC codes and normalized min-sum layered decoding.

A base matrix entry -1 is an all-zero z x z block; an entry s >= 0 is the
identity cyclically shifted by s, so row r of the block has its one in
column (r + s) mod z. One row block forms one decoding layer.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from importlib import resources
from typing import NamedTuple

import numpy as np
from scipy import sparse

from polarlab.exceptions import BaseMatrixError, ContractError

logger = logging.getLogger(__name__)

DEFAULT_NORM = 0.75
DEFAULT_Z = 24

BASE_MATRIX_FILES: dict[tuple[str, str], str] = {
    ("1/2", "A"): "wimax_1-2A.txt",
    ("2/3", "A"): "wimax_2-3A.txt",
    ("2/3", "B"): "wimax_2-3B.txt",
}

_HEADER = re.compile(r"^z=(\d+)\s+rate=(\d+/\d+)\s+variant=([AB])(?:\s+scaling=(floor|modulo))?\s*$")


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Expanded quasi-cyclic LDPC code.

    ``base_matrix`` holds shifts already scaled to ``z``.
    """

    base_matrix: np.ndarray
    z: int
    name: str = ""
    layer_order: tuple[int, ...] | None = None

    def __post_init__(self):
        base = self.base_matrix
        if base.ndim != 2 or base.size == 0:
            raise BaseMatrixError("base matrix must be a nonempty 2-D array")
        if np.any(base < -1) or np.any(base >= self.z):
            raise BaseMatrixError(f"shift values must lie in -1..{self.z - 1}")
        if np.any((base >= 0).sum(axis=0) == 0):
            raise BaseMatrixError("every base column needs at least one nonzero block")
        if self.layer_order is None:
            object.__setattr__(self, "layer_order", tuple(range(base.shape[0])))
        elif sorted(self.layer_order) != list(range(base.shape[0])):
            raise BaseMatrixError("layer order must be a permutation of the row blocks")

    @property
    def N(self) -> int:
        return self.base_matrix.shape[1] * self.z

    @property
    def M(self) -> int:
        return self.base_matrix.shape[0] * self.z

    @property
    def K(self) -> int:
        return self.N - self.M

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def label(self) -> str:
        return self.name or f"LDPC({self.N},{self.K})"

    @cached_property
    def layers(self) -> tuple[np.ndarray, ...]:
        """Per row block, a (z, degree) array of variable indices."""
        rows = np.arange(self.z)
        layers = []
        for block in self.base_matrix:
            columns = [c * self.z + (rows + s) % self.z for c, s in enumerate(block) if s >= 0]
            layers.append(np.stack(columns, axis=1))
        return tuple(layers)

    @cached_property
    def parity_check(self) -> sparse.csr_matrix:
        row_index, col_index = [], []
        for layer_index, cols in enumerate(self.layers):
            checks = layer_index * self.z + np.arange(self.z)
            row_index.append(np.repeat(checks, cols.shape[1]))
            col_index.append(cols.reshape(-1))
        rows = np.concatenate(row_index)
        cols = np.concatenate(col_index)
        data = np.ones(rows.size, dtype=np.int64)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.M, self.N))

    @classmethod
    def from_dense(cls, H: np.ndarray, name: str = "") -> LdpcCode:
        """Wrap a plain binary parity-check matrix (z = 1)."""
        H = np.asarray(H, dtype=np.int64)
        return cls(np.where(H != 0, 0, -1), 1, name)


def parse_base_matrix(text: str, z: int = DEFAULT_Z) -> tuple[LdpcCode, dict[str, str]]:
    """Parse a base-matrix file and expand it for ``z``.

    The header line ``z=<z0> rate=<r> variant=<v> [scaling=floor|modulo]``
    gives the lifting size the shifts are written for; shifts are scaled to
    ``z`` with floor(s * z / z0) or s mod z.
    """
    lines = [line.strip() for line in text.splitlines()]
    lines = [line for line in lines if line and not line.startswith("#")]
    if not lines:
        raise BaseMatrixError("base matrix file is empty")
    match = _HEADER.match(lines[0])
    if match is None:
        raise BaseMatrixError(f"malformed header line {lines[0]!r}")
    z0, rate, variant, scaling = int(match[1]), match[2], match[3], match[4] or "floor"
    if not 1 <= z <= z0:
        raise BaseMatrixError(f"z={z} outside 1..{z0}")
    try:
        rows = [[int(token) for token in line.split()] for line in lines[1:]]
    except ValueError as e:
        raise BaseMatrixError(f"non-integer base matrix entry: {e}") from e
    if not rows or len({len(row) for row in rows}) != 1:
        raise BaseMatrixError("base matrix rows must be nonempty and of equal length")
    base = np.array(rows, dtype=np.int64)
    if np.any(base < -1) or np.any(base >= z0):
        raise BaseMatrixError(f"shift values must lie in -1..{z0 - 1}")

    if scaling == "modulo":
        scaled = np.where(base >= 0, base % z, -1)
    else:
        scaled = np.where(base >= 0, (base * z) // z0, -1)
    m_b, n_b = base.shape
    if Fraction(n_b - m_b, n_b) != Fraction(rate):
        raise BaseMatrixError(f"{m_b}x{n_b} base matrix does not have rate {rate}")
    code = LdpcCode(scaled, z, name=f"LDPC({n_b * z},{(n_b - m_b) * z})")
    return code, {"rate": rate, "variant": variant, "scaling": scaling, "z0": str(z0)}


def load_base_matrix(rate: str = "1/2", variant: str = "A", z: int = DEFAULT_Z) -> LdpcCode:
    """Load one of the shipped 802.16e base matrices expanded for ``z``."""
    key = (str(rate), str(variant).upper())
    if key not in BASE_MATRIX_FILES:
        known = ", ".join(f"{r}{v}" for r, v in BASE_MATRIX_FILES)
        raise BaseMatrixError(f"no base matrix for rate {rate} variant {variant} (known: {known})")
    text = resources.files("polarlab").joinpath("data", BASE_MATRIX_FILES[key]).read_text()
    code, header = parse_base_matrix(text, z)
    logger.debug("loaded %s rate %s variant %s, z=%d", code.label, header["rate"], header["variant"], z)
    return code


def syndrome_check(code: LdpcCode, hard_bits) -> bool:
    """True iff H x^T = 0 over GF(2)."""
    bits = np.asarray(hard_bits, dtype=np.int64).reshape(-1)
    if bits.size != code.N:
        raise ContractError(f"expected {code.N} bits, got {bits.size}")
    return not np.any(code.parity_check.dot(bits) % 2)


@dataclass
class CheckState:
    """Compressed check-to-variable messages of one layer."""

    min1: np.ndarray
    min2: np.ndarray
    argmin: np.ndarray
    sign_product: np.ndarray
    signs: np.ndarray

    @classmethod
    def from_messages(cls, q: np.ndarray) -> CheckState:
        """Summarize (z, degree) variable-to-check messages."""
        magnitude = np.abs(q)
        rows = np.arange(q.shape[0])
        argmin = np.argmin(magnitude, axis=1)
        min1 = magnitude[rows, argmin]
        magnitude[rows, argmin] = np.inf
        min2 = magnitude.min(axis=1)
        signs = np.where(q < 0, -1.0, 1.0)
        return cls(min1, min2, argmin, np.prod(signs, axis=1), signs)

    def messages(self, norm: float) -> np.ndarray:
        """Check-to-variable messages, each excluding its own input."""
        columns = np.arange(self.signs.shape[1])[None, :]
        magnitude = np.where(columns == self.argmin[:, None], self.min2[:, None], self.min1[:, None])
        return norm * self.sign_product[:, None] * self.signs * magnitude


class LdpcDecodeResult(NamedTuple):
    bits: np.ndarray
    iterations: int
    converged: bool


def nms_layered_decode(
    code: LdpcCode,
    channel_llrs,
    T: int = 20,
    norm: float = DEFAULT_NORM,
    *,
    early_stop: bool = True,
) -> LdpcDecodeResult:
    """Normalized min-sum decoding with layered scheduling.

    Args:
        code: LDPC code
        channel_llrs: N channel LLRs, positive favoring 0
        T: Maximum number of iterations
        norm: Check-message scaling factor in (0, 1]
        early_stop: Stop after the first iteration with a zero syndrome

    Returns:
        (bits, iterations used, converged)
    """
    if T < 1:
        raise ContractError(f"T must be >= 1, got {T}")
    if not 0.0 < norm <= 1.0:
        raise ContractError(f"norm must lie in (0, 1], got {norm}")
    posterior = np.array(channel_llrs, dtype=np.float64)
    if posterior.shape != (code.N,):
        raise ContractError(f"expected {code.N} channel LLRs, got shape {posterior.shape}")

    layers = code.layers
    check_messages = [np.zeros(cols.shape) for cols in layers]
    bits = (posterior < 0).astype(np.uint8)
    converged = False
    iteration = 0
    for iteration in range(1, T + 1):
        for index in code.layer_order:
            cols = layers[index]
            q = posterior[cols] - check_messages[index]
            r = CheckState.from_messages(q).messages(norm)
            check_messages[index] = r
            posterior[cols] = q + r
        bits = (posterior < 0).astype(np.uint8)
        converged = syndrome_check(code, bits)
        if converged and early_stop:
            break
    return LdpcDecodeResult(bits, iteration, converged)
