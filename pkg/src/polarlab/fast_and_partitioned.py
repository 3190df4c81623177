"""Special-node list decoders, partitioned list decoding and the step model.

A node of the decoding tree is *special* when its frozen pattern lets the list
decoder update every path without visiting the node's leaves:

- Rate0: every leaf frozen
- Rate1: no leaf frozen
- Rep: only the last leaf carries information
- SPC: only the first leaf is frozen

Nodes are classified offline, top-down and greedily, into a
:class:`NodeSchedule`. The schedule drives both the simplified decoders and
the time-step count used as the latency model.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from polarlab.exceptions import ConfigurationError
from polarlab.list_decoding import (
    DecodeResult,
    EventCallback,
    ListDecoder,
    PathSet,
    compose_lineage,
    pm_update,
    select_final,
)
from polarlab.polar_code import (
    CrcLayout,
    CrcSegment,
    CrcSpec,
    PolarCode,
    is_power_of_two,
    layout_for_positions,
    polar_transform,
)
from polarlab.quantization import FLOAT, Quantizer

logger = logging.getLogger(__name__)

Algorithm = Literal["scl", "sscl", "fast_sscl"]
ALGORITHMS: tuple[str, ...] = ("scl", "sscl", "fast_sscl")


class NodeClass(str, enum.Enum):
    RATE0 = "Rate0"
    RATE1 = "Rate1"
    REP = "Rep"
    SPC = "SPC"
    OTHER = "Other"


def node_class(frozen: np.ndarray) -> NodeClass:
    """Classify a frozen pattern; Rate0, Rate1, Rep and SPC take precedence in that order."""
    frozen = np.asarray(frozen, dtype=bool)
    if frozen.all():
        return NodeClass.RATE0
    if not frozen.any():
        return NodeClass.RATE1
    if frozen[:-1].all():
        return NodeClass.REP
    if frozen[0] and not frozen[1:].any():
        return NodeClass.SPC
    return NodeClass.OTHER


def other_node_cost(size: int) -> int:
    """Steps of a plain traversal of a subtree with ``size`` leaves."""
    return 3 * size - 2


def rate1_cost(size: int, algorithm: Algorithm, list_size: int) -> int:
    """Steps of a Rate-1 node with ``size`` leaves.

    SSCL splits on every bit. Fast-SSCL splits on the ``min(L - 1, size)`` least
    reliable bits and decides the rest in one extra step; when ``L - 1 >= size``
    nothing is left for that step, so the cost is ``size`` and never exceeds SSCL.
    """
    if algorithm != "fast_sscl":
        return size
    splits = min(list_size - 1, size)
    return splits + (1 if splits < size else 0)


@dataclass(frozen=True)
class ScheduleNode:
    stage: int
    offset: int
    node_class: NodeClass
    info_bits: int
    step_cost: int

    @property
    def size(self) -> int:
        return 1 << self.stage


@dataclass(frozen=True)
class NodeSchedule:
    """Terminal nodes of the pruned decoding tree, in decoding order."""

    algorithm: Algorithm
    n: int
    list_size: int
    nodes: tuple[ScheduleNode, ...] = field(default_factory=tuple)

    @property
    def N(self) -> int:
        return 1 << self.n

    def counts(self) -> dict[str, int]:
        result = {cls.value: 0 for cls in NodeClass}
        for node in self.nodes:
            result[node.node_class.value] += 1
        return result

    def internal_nodes(self) -> set[tuple[int, int]]:
        """(stage, offset) of every strict ancestor of a terminal node."""
        ancestors = set()
        for node in self.nodes:
            for stage in range(node.stage + 1, self.n + 1):
                ancestors.add((stage, node.offset - node.offset % (1 << stage)))
        return ancestors

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["stage", "offset", "class", "step_cost"])
        for node in self.nodes:
            writer.writerow([node.stage, node.offset, node.node_class.value, node.step_cost])
        return buffer.getvalue()


def classify_tree(code: PolarCode, algorithm: Algorithm = "sscl", list_size: int = 8) -> NodeSchedule:
    """Compute the node schedule of ``code`` for ``algorithm``.

    ``scl`` has no special nodes: every leaf is an Other node. The other tags
    stop descending at the first special node met from the root.

    Args:
        code: Polar code
        algorithm: One of ``scl``, ``sscl``, ``fast_sscl``
        list_size: List size, which sets the Fast-SSCL Rate1 cost
    """
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(f"algorithm: unknown schedule tag {algorithm!r}")
    frozen = code.frozen_mask
    nodes: list[ScheduleNode] = []

    def visit(stage: int, offset: int) -> None:
        size = 1 << stage
        mask = frozen[offset : offset + size]
        info = int(size - mask.sum())
        if algorithm == "scl":
            if stage == 0:
                nodes.append(ScheduleNode(0, offset, NodeClass.OTHER, info, 1))
                return
        else:
            cls = node_class(mask)
            if cls is not NodeClass.OTHER:
                nodes.append(ScheduleNode(stage, offset, cls, info, _class_cost(cls, size, algorithm, list_size)))
                return
        half = size // 2
        visit(stage - 1, offset)
        visit(stage - 1, offset + half)

    visit(code.n, 0)
    schedule = NodeSchedule(algorithm, code.n, list_size, tuple(nodes))
    logger.debug("schedule %s for %s: %s", algorithm, code.label, schedule.counts())
    return schedule


def _class_cost(cls: NodeClass, size: int, algorithm: Algorithm, list_size: int) -> int:
    if cls is NodeClass.RATE0:
        return 1
    if cls is NodeClass.REP:
        return 2
    if cls is NodeClass.RATE1:
        return rate1_cost(size, algorithm, list_size)
    return other_node_cost(size)


def _stage_cost(stage: int, pe: int) -> int:
    # one f step and one g step, each over 2^(stage-1) values
    return 2 * math.ceil((1 << (stage - 1)) / pe)


def count_steps(schedule: NodeSchedule, L: int, Pe: int) -> int:
    """Total decoding time steps of one frame.

    Every internal node of the pruned tree costs one f and one g step, each
    taking ceil(width / Pe) steps. Terminal nodes cost their class constant;
    Other and SPC nodes are traversed leaf by leaf and pay one sort step per
    information leaf.
    """
    if not is_power_of_two(Pe):
        raise ConfigurationError(f"pe: must be a power of two, got {Pe}")
    if L < 1:
        raise ConfigurationError(f"L: must be >= 1, got {L}")
    total = sum(_stage_cost(stage, Pe) for stage, _ in schedule.internal_nodes())
    for node in schedule.nodes:
        if node.node_class is NodeClass.RATE0:
            total += 1
        elif node.node_class is NodeClass.REP:
            total += 2
        elif node.node_class is NodeClass.RATE1:
            total += rate1_cost(node.size, schedule.algorithm, L)
        else:
            inner = sum((1 << (node.stage - s)) * _stage_cost(s, Pe) for s in range(1, node.stage + 1))
            total += inner + node.size + node.info_bits
    return total


@dataclass(frozen=True)
class StepReport:
    N: int
    K: int
    L: int
    pe: int
    totals: dict[str, int]

    def reduction(self, algorithm: Algorithm) -> float:
        """Relative step saving of ``algorithm`` against SCL."""
        return 1.0 - self.totals[algorithm] / self.totals["scl"]


def step_report(code: PolarCode, L: int, Pe: int) -> tuple[StepReport, dict[str, NodeSchedule]]:
    schedules = {algorithm: classify_tree(code, algorithm, L) for algorithm in ALGORITHMS}
    totals = {algorithm: count_steps(schedule, L, Pe) for algorithm, schedule in schedules.items()}
    return StepReport(code.N, code.K, L, Pe, totals), schedules


# --- simplified decoders ---------------------------------------------------


class SimplifiedListDecoder(ListDecoder):
    """SSCL: Rate0, Rep and Rate1 nodes are decoded at node level.

    SPC nodes are traversed leaf by leaf.
    """

    algorithm = "sscl"
    _node_level = (NodeClass.RATE0, NodeClass.REP, NodeClass.RATE1)

    def __init__(
        self,
        code: PolarCode,
        list_size: int,
        *,
        quantizer: Quantizer = FLOAT,
        schedule: NodeSchedule | None = None,
        on_event: EventCallback | None = None,
    ):
        super().__init__(code, list_size, quantizer=quantizer, on_event=on_event)
        self.schedule = schedule or classify_tree(code, self.algorithm, list_size)
        self._special = {
            (node.stage, node.offset): node.node_class
            for node in self.schedule.nodes
            if node.node_class in self._node_level
        }

    def _special_node(self, paths, stage, offset, alpha):
        cls = self._special.get((stage, offset))
        if cls is None:
            return None
        if cls is NodeClass.RATE0:
            result = self._rate0(paths, alpha)
        elif cls is NodeClass.REP:
            result = self._rep(paths, offset, alpha)
        else:
            result = self._rate1(paths, offset, alpha)
        if self.on_event:
            self.on_event({
                "event": "node",
                "class": cls.value,
                "stage": stage,
                "offset": offset,
                "paths": [(float(pm),) for pm in result[0].pm],
            })
        return result

    def _rate0(self, paths: PathSet, alpha: np.ndarray):
        penalty = np.where(alpha < 0, -alpha, 0.0).sum(axis=1)
        paths.pm = self.quantizer.saturate(paths.pm + penalty, "pm")
        return paths, np.zeros(alpha.shape, dtype=np.uint8), None

    def _rep(self, paths: PathSet, offset: int, alpha: np.ndarray):
        size = alpha.shape[1]
        saturate = self.quantizer.saturate
        penalty_zero = np.where(alpha < 0, -alpha, 0.0).sum(axis=1)
        penalty_one = np.where(alpha > 0, alpha, 0.0).sum(axis=1)
        candidates = np.stack(
            [saturate(paths.pm + penalty_zero, "pm"), saturate(paths.pm + penalty_one, "pm")],
            axis=1,
        ).reshape(-1)
        chosen = np.argsort(candidates, kind="stable")[: min(self.list_size, candidates.size)]
        parents = chosen // 2
        bits = (chosen % 2).astype(np.uint8)

        paths = paths.select(parents)
        paths.pm = candidates[chosen]
        u_block = np.zeros((parents.size, size), dtype=np.uint8)
        u_block[:, -1] = bits
        paths = self._commit(paths, offset, u_block)
        beta = np.repeat(bits[:, None], size, axis=1)
        return paths, beta, parents

    def _split_positions(self, alpha: np.ndarray) -> np.ndarray:
        """Per-path bit positions to split on, in splitting order."""
        return np.broadcast_to(np.arange(alpha.shape[1]), alpha.shape)

    def _rate1(self, paths: PathSet, offset: int, alpha: np.ndarray):
        beta = (alpha < 0).astype(np.uint8)
        order = self._split_positions(alpha)
        pm = paths.pm
        lineage = np.arange(paths.active)

        for step in range(order.shape[1]):
            rows = np.arange(pm.size)
            positions = order[:, step]
            flip_alpha = alpha[rows, positions]
            candidates = np.stack(
                [pm, pm_update(pm, flip_alpha, 1 - beta[rows, positions], self.quantizer)],
                axis=1,
            ).reshape(-1)
            chosen = np.argsort(candidates, kind="stable")[: min(self.list_size, candidates.size)]
            parents = chosen // 2
            flips = (chosen % 2).astype(np.uint8)
            beta = beta[parents]
            beta[np.arange(parents.size), positions[parents]] ^= flips
            alpha = alpha[parents]
            order = order[parents]
            pm = candidates[chosen]
            lineage = lineage[parents]

        paths = paths.select(lineage)
        paths.pm = pm
        paths = self._commit(paths, offset, polar_transform(beta))
        return paths, beta, lineage


class FastSimplifiedListDecoder(SimplifiedListDecoder):
    """Fast-SSCL: Rate1 nodes split only on the L - 1 least reliable bits.

    The remaining bits of a Rate1 node keep their hard decision, which costs
    nothing on the path metric.
    """

    algorithm = "fast_sscl"

    def _split_positions(self, alpha: np.ndarray) -> np.ndarray:
        splits = min(self.list_size - 1, alpha.shape[1])
        return np.argsort(np.abs(alpha), axis=1, kind="stable")[:, :splits]


def sscl_decode(
    code: PolarCode,
    channel_llrs,
    L: int,
    *,
    quantizer: Quantizer = FLOAT,
    on_event: EventCallback | None = None,
) -> DecodeResult:
    return SimplifiedListDecoder(code, L, quantizer=quantizer, on_event=on_event).decode(channel_llrs)


def fast_sscl_decode(
    code: PolarCode,
    channel_llrs,
    L: int,
    *,
    quantizer: Quantizer = FLOAT,
    on_event: EventCallback | None = None,
) -> DecodeResult:
    return FastSimplifiedListDecoder(code, L, quantizer=quantizer, on_event=on_event).decode(channel_llrs)


# --- partitioned decoding --------------------------------------------------


def _partition_crc(crc: CrcSpec | int | None) -> CrcSpec | None:
    if crc is None or isinstance(crc, CrcSpec):
        return crc
    if crc < 0:
        raise ConfigurationError(f"partition_crcs: width must be >= 0, got {crc}")
    return CrcSpec.default(crc) if crc else None


@dataclass(frozen=True, eq=False)
class PartitionPlan:
    """P equal partitions of the leaves, each protected by its own CRC.

    ``crcs`` holds the CRC actually in use per partition (None when the
    partition carries none); ``layout`` places every partition's message and
    CRC bits.
    """

    P: int
    partition_size: int
    crcs: tuple[CrcSpec | None, ...]
    layout: CrcLayout

    @property
    def boundaries(self) -> list[tuple[int, int]]:
        return [(p * self.partition_size, (p + 1) * self.partition_size) for p in range(self.P)]

    @property
    def crc_widths(self) -> tuple[int, ...]:
        return tuple(crc.width if crc else 0 for crc in self.crcs)

    @property
    def payload_length(self) -> int:
        return self.layout.payload_length

    @classmethod
    def build(cls, code: PolarCode, P: int, crcs: Iterable[CrcSpec | int | None]) -> PartitionPlan:
        """Split ``code`` into P partitions and attach their CRCs.

        Each CRC occupies the last c_p information positions of its
        partition. A partition with fewer than c_p + 1 information positions
        carries no CRC.

        Args:
            code: Code to partition (its own CRC is ignored)
            P: Partition count, a power of two dividing N
            crcs: One CRC per partition, as a spec, a width (0 for none) or None
        """
        if not is_power_of_two(P) or P > code.N:
            raise ConfigurationError(f"P: {P} must be a power of two dividing N={code.N}")
        specs = [_partition_crc(c) for c in crcs]
        if len(specs) != P:
            raise ConfigurationError(f"partition_crcs: expected {P} entries, got {len(specs)}")

        size = code.N // P
        segments: list[CrcSegment] = []
        in_use: list[CrcSpec | None] = []
        dropped: list[int] = []
        for index, spec in enumerate(specs):
            start = index * size
            info = code.info_positions[(code.info_positions >= start) & (code.info_positions < start + size)]
            if spec is not None and info.size < spec.width + 1:
                if info.size:
                    dropped.append(index)
                spec = None
            segments.append(layout_for_positions(code.N, info, spec))
            in_use.append(spec)
        if dropped:
            logger.warning("partitions %s have too few information bits; their CRCs are dropped", dropped)
        return cls(P, size, tuple(in_use), CrcLayout(code.N, tuple(segments)))


class PartitionedListDecoder(ListDecoder):
    """PSCL: list decoding inside each partition, one survivor across boundaries.

    Only one path crosses a partition boundary, so the hardware keeps L copies
    of one partition's state plus the committed earlier partitions. This model
    keeps the shared tree walk of :class:`ListDecoder` and stores full-length
    ``u_hat`` rows per path; the list still collapses to a single row at every
    boundary, and decisions are identical to a partition-local store.
    """

    algorithm = "pscl"

    def __init__(
        self,
        code: PolarCode,
        plan: PartitionPlan,
        list_size: int,
        *,
        quantizer: Quantizer = FLOAT,
        on_event: EventCallback | None = None,
    ):
        if plan.layout.N != code.N:
            raise ConfigurationError(f"P: plan for N={plan.layout.N} does not fit code of length {code.N}")
        super().__init__(code, list_size, quantizer=quantizer, layout=plan.layout, on_event=on_event)
        self.plan = plan
        self.boundary_stage = code.n - (plan.P.bit_length() - 1)
        self._verdicts: list[bool] = []

    def decode(self, channel_llrs) -> DecodeResult:
        self._verdicts = []
        return super().decode(channel_llrs)

    def _decode_node(self, paths, stage, offset, alpha):
        paths, beta, lineage = super()._decode_node(paths, stage, offset, alpha)
        if stage != self.boundary_stage:
            return paths, beta, lineage

        index = offset // self.plan.partition_size
        chosen, crc_ok = select_final(paths, self.layout.segments[index])
        self._verdicts.append(crc_ok)
        row = np.array([chosen.index])
        paths = paths.select(row)
        paths.crc_state = self._initial_crc_state(index + 1)
        if self.on_event:
            self.on_event({"event": "partition", "index": index, "pm": chosen.pm, "crc_ok": crc_ok})
        return paths, beta[row], compose_lineage(lineage, row)

    def _finish(self, paths: PathSet) -> DecodeResult:
        u_hat = paths.u_hat[0].copy()
        return DecodeResult(
            payload=self.layout.extract(u_hat),
            pm=float(paths.pm[0]),
            crc_ok=all(self._verdicts),
            u_hat=u_hat,
        )


def pscl_decode(
    code: PolarCode,
    channel_llrs,
    plan: PartitionPlan,
    L: int,
    *,
    quantizer: Quantizer = FLOAT,
    on_event: EventCallback | None = None,
) -> DecodeResult:
    return PartitionedListDecoder(code, plan, L, quantizer=quantizer, on_event=on_event).decode(channel_llrs)
