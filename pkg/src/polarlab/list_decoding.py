"""Successive-cancellation and list decoding of polar codes.

The decoding tree is walked depth first, left to right. A node at stage S
receives 2^S LLRs from its parent, hands f-combined LLRs to its left child and
g-combined LLRs to its right child, and returns the combined hard decisions
(beta) upward.

List decoding keeps up to L paths side by side: every per-node array has one
row per active path. When a leaf prunes the list, the surviving rows are
reported upward as a *lineage* (index of each survivor's row before the
prune) so that every ancestor can reorder its own stage memory. That gives
the same observable result as copying the memories of a path whenever it
splits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any, Callable

import numpy as np

from polarlab.exceptions import ContractError
from polarlab.polar_code import CrcLayout, CrcSegment, PolarCode, crc_step
from polarlab.quantization import FLOAT, Quantizer

logger = logging.getLogger(__name__)

EventCallback = Callable[[dict[str, Any]], None]


# --- kernels ---------------------------------------------------------------


def _signs(values) -> np.ndarray:
    # sign(0) is +1 throughout
    return np.where(np.asarray(values) < 0, -1.0, 1.0)


def f_func(a, b):
    """Min-sum check-node combination: sign(a) sign(b) min(|a|, |b|)."""
    return _signs(a) * _signs(b) * np.minimum(np.abs(a), np.abs(b))


def g_func(a, b, beta_l):
    """Variable-node combination: b + a if the left decision is 0, else b - a."""
    return np.where(np.asarray(beta_l) != 0, np.subtract(b, a), np.add(b, a))


def combine_beta(beta_l: np.ndarray, beta_r: np.ndarray) -> np.ndarray:
    """Merge child decisions: (beta_l XOR beta_r, beta_r) along the last axis."""
    beta_l = np.asarray(beta_l, dtype=np.uint8)
    beta_r = np.asarray(beta_r, dtype=np.uint8)
    if beta_l.shape != beta_r.shape:
        raise ContractError(f"beta halves differ in shape: {beta_l.shape} vs {beta_r.shape}")
    return np.concatenate([beta_l ^ beta_r, beta_r], axis=-1)


def leaf_decide(alpha: float, is_frozen: bool) -> int:
    """Hard decision at a leaf: 0 when frozen or alpha >= 0, else 1."""
    if is_frozen or alpha >= 0:
        return 0
    return 1


def pm_update(pm, alpha, u_hat, quantizer: Quantizer = FLOAT):
    """Add |alpha| to the path metric when u_hat disagrees with sign(alpha)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    disagree = np.asarray(u_hat) != (alpha < 0)
    updated = np.add(pm, np.where(disagree, np.abs(alpha), 0.0))
    return quantizer.saturate(updated, "pm")


# --- SC --------------------------------------------------------------------


def sc_decode(code: PolarCode, channel_llrs, quantizer: Quantizer = FLOAT) -> np.ndarray:
    """Successive-cancellation decoding.

    Returns:
        The length-N vector of leaf decisions u_hat
    """
    llrs = quantizer(np.asarray(channel_llrs, dtype=np.float64), "channel_llr")
    if llrs.shape != (code.N,):
        raise ContractError(f"expected {code.N} channel LLRs, got shape {llrs.shape}")
    u_hat = np.zeros(code.N, dtype=np.uint8)
    frozen = code.frozen_mask

    def descend(alpha: np.ndarray, offset: int) -> np.ndarray:
        if alpha.size == 1:
            u_hat[offset] = leaf_decide(alpha[0], frozen[offset])
            return u_hat[offset : offset + 1].copy()
        half = alpha.size // 2
        left = quantizer.saturate(f_func(alpha[:half], alpha[half:]), "internal_llr")
        beta_l = descend(left, offset)
        right = quantizer.saturate(g_func(alpha[:half], alpha[half:], beta_l), "internal_llr")
        beta_r = descend(right, offset + half)
        return combine_beta(beta_l, beta_r)

    descend(llrs, 0)
    return u_hat


# --- paths -----------------------------------------------------------------


@dataclass
class Path:
    """One candidate decoding path, as read out of a PathSet."""

    index: int
    pm: float
    u_hat: np.ndarray
    crc_state: np.ndarray


@dataclass
class PathSet:
    """Up to ``list_size`` candidate paths stored row-wise.

    ``lineage`` maps every row to the row it descends from before the most
    recent update.
    """

    list_size: int
    pm: np.ndarray
    u_hat: np.ndarray
    crc_state: np.ndarray
    lineage: np.ndarray

    @classmethod
    def initial(cls, N: int, list_size: int, crc_state: np.ndarray | None = None) -> PathSet:
        if crc_state is None:
            crc_state = np.zeros((1, 0), dtype=np.uint8)
        return cls(
            list_size=list_size,
            pm=np.zeros(1),
            u_hat=np.zeros((1, N), dtype=np.uint8),
            crc_state=crc_state,
            lineage=np.zeros(1, dtype=np.int64),
        )

    @property
    def active(self) -> int:
        return int(self.pm.size)

    @property
    def sort_order(self) -> np.ndarray:
        """Rows by ascending metric, lower row first on ties."""
        return np.argsort(self.pm, kind="stable")

    def path(self, index: int) -> Path:
        return Path(index, float(self.pm[index]), self.u_hat[index].copy(), self.crc_state[index].copy())

    def select(self, rows: np.ndarray) -> PathSet:
        """Keep (and duplicate, if repeated) the given rows."""
        rows = np.asarray(rows, dtype=np.int64)
        return replace(
            self,
            pm=self.pm[rows],
            u_hat=self.u_hat[rows],
            crc_state=self.crc_state[rows],
            lineage=rows,
        )


def split_and_prune(
    paths: PathSet,
    alphas,
    is_frozen: bool,
    position: int,
    quantizer: Quantizer = FLOAT,
) -> PathSet:
    """Estimate bit ``position`` on every path.

    A frozen bit appends 0 to every path. An information bit forks each path
    into a 0 and a 1 child; when more than ``list_size`` children exist, the
    ones with the smallest metrics survive, ties going to the lower parent and
    then to bit 0. Survivors are stored by ascending metric.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    if is_frozen:
        return replace(
            paths,
            pm=pm_update(paths.pm, alphas, 0, quantizer),
            lineage=np.arange(paths.active),
        )
    candidates = np.stack(
        [pm_update(paths.pm, alphas, 0, quantizer), pm_update(paths.pm, alphas, 1, quantizer)],
        axis=1,
    ).reshape(-1)
    keep = min(paths.list_size, candidates.size)
    chosen = np.argsort(candidates, kind="stable")[:keep]
    parents = chosen // 2
    survivors = paths.select(parents)
    survivors.pm = candidates[chosen]
    survivors.u_hat[:, position] = (chosen % 2).astype(np.uint8)
    return survivors


def segment_passes(paths: PathSet, segment: CrcSegment | None) -> np.ndarray:
    """Per-path CRC verdict: running register equal to the estimated CRC bits."""
    if segment is None or segment.crc is None:
        return np.ones(paths.active, dtype=bool)
    estimated = paths.u_hat[:, segment.crc_positions]
    return np.all(paths.crc_state == estimated, axis=1)


def select_final(paths: PathSet, crc: CrcSegment | None) -> tuple[Path, bool]:
    """Pick the lowest-metric path among those passing the CRC.

    Falls back to the lowest-metric path overall when no path passes; without
    a CRC the verdict is reported as passing.
    """
    if paths.active < 1:
        raise ContractError("no active path to select from")
    passing = segment_passes(paths, crc)
    if passing.any():
        masked = np.where(passing, paths.pm, np.inf)
        return paths.path(int(np.argmin(masked))), True
    return paths.path(int(np.argmin(paths.pm))), False


# --- list decoder ----------------------------------------------------------


@dataclass
class DecodeResult:
    payload: np.ndarray
    pm: float
    crc_ok: bool
    u_hat: np.ndarray


def compose_lineage(outer: np.ndarray | None, inner: np.ndarray | None) -> np.ndarray | None:
    """Lineage of two successive updates; None stands for the identity."""
    if inner is None:
        return outer
    if outer is None:
        return inner
    return outer[inner]


def _rows(values: np.ndarray, lineage: np.ndarray | None) -> np.ndarray:
    return values if lineage is None else values[lineage]


class ListDecoder:
    """CRC-aided successive-cancellation list decoder.

    Subclasses change how particular subtrees are processed by overriding
    :meth:`_special_node` (node-level shortcuts) or :meth:`_decode_node`
    (partition boundaries).
    """

    algorithm = "scl"

    def __init__(
        self,
        code: PolarCode,
        list_size: int,
        *,
        quantizer: Quantizer = FLOAT,
        layout: CrcLayout | None = None,
        on_event: EventCallback | None = None,
    ):
        """Initialize the decoder.

        Args:
            code: Code to decode
            list_size: Maximum number of paths L (>= 1)
            quantizer: Arithmetic model
            layout: Payload/CRC layout, the code's own by default
            on_event: Optional trace callback receiving one dict per step
        """
        if list_size < 1:
            raise ContractError(f"list size must be >= 1, got {list_size}")
        self.code = code
        self.list_size = list_size
        self.quantizer = quantizer
        self.layout = layout or code.layout
        self.on_event = on_event

    def decode(self, channel_llrs) -> DecodeResult:
        llrs = self.quantizer(np.asarray(channel_llrs, dtype=np.float64), "channel_llr")
        if llrs.shape != (self.code.N,):
            raise ContractError(f"expected {self.code.N} channel LLRs, got shape {llrs.shape}")
        paths = PathSet.initial(self.code.N, self.list_size, self._initial_crc_state(0))
        paths, _, _ = self._decode_node(paths, self.code.n, 0, llrs[None, :])
        return self._finish(paths)

    def _finish(self, paths: PathSet) -> DecodeResult:
        segment = self.layout.segments[0] if self.layout.segments else None
        chosen, crc_ok = select_final(paths, segment)
        return DecodeResult(
            payload=self.layout.extract(chosen.u_hat),
            pm=chosen.pm,
            crc_ok=crc_ok,
            u_hat=chosen.u_hat,
        )

    def _initial_crc_state(self, segment_index: int) -> np.ndarray:
        segments = self.layout.segments
        if segment_index >= len(segments) or segments[segment_index].crc is None:
            return np.zeros((1, 0), dtype=np.uint8)
        return segments[segment_index].crc.initial_registers(1)

    # tree walk

    def _decode_node(
        self, paths: PathSet, stage: int, offset: int, alpha: np.ndarray
    ) -> tuple[PathSet, np.ndarray, np.ndarray | None]:
        """Decode the subtree rooted at (stage, offset).

        Args:
            paths: Path set on entry
            stage: Node stage S (the node spans 2^S leaves)
            offset: Index of the node's first leaf
            alpha: (P, 2^S) LLRs, one row per active path

        Returns:
            (paths, beta, lineage): the updated path set, the (P', 2^S) node
            decisions and the entry row of every surviving path (None when the
            rows did not change)
        """
        special = self._special_node(paths, stage, offset, alpha)
        if special is not None:
            return special
        if stage == 0:
            return self._decode_leaf(paths, offset, alpha[:, 0])

        half = 1 << (stage - 1)
        saturate = self.quantizer.saturate
        left = saturate(f_func(alpha[:, :half], alpha[:, half:]), "internal_llr")
        paths, beta_l, lineage_l = self._decode_node(paths, stage - 1, offset, left)

        alpha = _rows(alpha, lineage_l)
        right = saturate(g_func(alpha[:, :half], alpha[:, half:], beta_l), "internal_llr")
        paths, beta_r, lineage_r = self._decode_node(paths, stage - 1, offset + half, right)

        beta = combine_beta(_rows(beta_l, lineage_r), beta_r)
        return paths, beta, compose_lineage(lineage_l, lineage_r)

    def _special_node(
        self, paths: PathSet, stage: int, offset: int, alpha: np.ndarray
    ) -> tuple[PathSet, np.ndarray, np.ndarray | None] | None:
        return None

    def _decode_leaf(
        self, paths: PathSet, position: int, alpha: np.ndarray
    ) -> tuple[PathSet, np.ndarray, np.ndarray | None]:
        frozen = bool(self.code.frozen_mask[position])
        paths = split_and_prune(paths, alpha, frozen, position, self.quantizer)
        paths = self._feed_crc(paths, position, position + 1)
        if self.on_event:
            self.on_event({
                "event": "leaf",
                "index": position,
                "frozen": frozen,
                "paths": [(float(pm), int(bit)) for pm, bit in zip(paths.pm, paths.u_hat[:, position])],
            })
        beta = paths.u_hat[:, position : position + 1].copy()
        return paths, beta, None if frozen else paths.lineage

    def _feed_crc(self, paths: PathSet, start: int, stop: int) -> PathSet:
        """Shift newly estimated message bits into the running CRC registers."""
        table = self.layout.message_segment
        segments = self.layout.segments
        for position in range(start, stop):
            index = table[position]
            if index >= 0:
                paths.crc_state = crc_step(segments[index].crc, paths.crc_state, paths.u_hat[:, position])
        return paths

    def _commit(self, paths: PathSet, offset: int, u_block: np.ndarray) -> PathSet:
        """Store a block of leaf decisions produced at node level."""
        paths.u_hat[:, offset : offset + u_block.shape[1]] = u_block
        return self._feed_crc(paths, offset, offset + u_block.shape[1])


def scl_decode(
    code: PolarCode,
    channel_llrs,
    L: int,
    *,
    quantizer: Quantizer = FLOAT,
    on_event: EventCallback | None = None,
) -> DecodeResult:
    """CRC-aided SCL decoding with list size L."""
    return ListDecoder(code, L, quantizer=quantizer, on_event=on_event).decode(channel_llrs)
