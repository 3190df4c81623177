"""BPSK/AWGN channel and the seeded Monte-Carlo FER/BER engine.

Every frame draws its payload and its noise from its own generator keyed by
(seed, frame index), so a frame decodes identically whichever worker runs it.
Frames are grouped in fixed-size blocks; blocks run on a process pool in
waves, and the stopping rule is applied to block results in block order.
The counts of a point therefore depend only on the seed and the
configuration, never on the number of workers.
"""

from __future__ import annotations

import asyncio
import csv
import io
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Literal, Protocol

import numpy as np
from scipy import stats
from scipy.special import erfc

from polarlab.exceptions import ConfigurationError, ContractError
from polarlab.fast_and_partitioned import (
    FastSimplifiedListDecoder,
    PartitionedListDecoder,
    PartitionPlan,
    SimplifiedListDecoder,
)
from polarlab.ldpc_baseline import DEFAULT_NORM, LdpcCode, nms_layered_decode
from polarlab.list_decoding import ListDecoder, sc_decode
from polarlab.polar_code import PolarCode, encode
from polarlab.quantization import FLOAT, Quantizer, quantize

logger = logging.getLogger(__name__)

__all__ = [
    "ChannelConfig",
    "DecoderConfig",
    "StopRule",
    "SimPoint",
    "SimResult",
    "UncodedCode",
    "ebn0_to_sigma",
    "transmit",
    "channel_llr",
    "quantize",
    "frame_rng",
    "make_codec",
    "build_list_decoder",
    "run_point",
    "run_point_async",
    "run_sweep",
    "crc_sweep",
]

Algorithm = Literal["sc", "scl", "sscl", "fast_sscl", "pscl", "ldpc", "uncoded"]
POLAR_ALGORITHMS: tuple[str, ...] = ("sc", "scl", "sscl", "fast_sscl", "pscl")
ALGORITHMS: tuple[str, ...] = POLAR_ALGORITHMS + ("ldpc", "uncoded")

CSV_HEADER: tuple[str, ...] = (
    "ebn0_db", "frames", "frame_errors", "bit_errors", "fer", "ber",
    "seed", "decoder", "code", "L", "P", "T", "quant",
)

DEFAULT_BLOCK_SIZE = 64

EventCallback = Callable[[dict[str, Any]], None]


# --- channel ---------------------------------------------------------------


def ebn0_to_sigma(ebn0_db: float, rate: float) -> float:
    """Noise standard deviation for BPSK at the given Eb/N0 and code rate."""
    if not 0.0 < rate <= 1.0:
        raise ContractError(f"rate must lie in (0, 1], got {rate}")
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


def bpsk_ber(ebn0_db: float) -> float:
    """Uncoded BPSK bit error rate Q(sqrt(2 Eb/N0))."""
    return 0.5 * float(erfc(math.sqrt(10.0 ** (ebn0_db / 10.0))))


@dataclass(frozen=True)
class ChannelConfig:
    ebn0_db: float
    rate: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise ConfigurationError(f"rate: must lie in (0, 1], got {self.rate}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed: must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def sigma(self) -> float:
        return ebn0_to_sigma(self.ebn0_db, self.rate)


def frame_rng(seed: int, frame_index: int) -> np.random.Generator:
    """Independent counter-based generator for one frame."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, frame_index])))


def transmit(codeword, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """BPSK-modulate (0 -> +1, 1 -> -1) and add white Gaussian noise."""
    if sigma <= 0:
        raise ContractError(f"sigma must be positive, got {sigma}")
    symbols = 1.0 - 2.0 * np.asarray(codeword, dtype=np.float64)
    return symbols + sigma * rng.standard_normal(symbols.shape)


def channel_llr(y, sigma: float) -> np.ndarray:
    """AWGN channel LLRs 2y / sigma^2; positive favors bit 0."""
    if sigma <= 0:
        raise ContractError(f"sigma must be positive, got {sigma}")
    return 2.0 * np.asarray(y, dtype=np.float64) / sigma**2


# --- decoders and frames ---------------------------------------------------


@dataclass(frozen=True)
class DecoderConfig:
    algorithm: Algorithm = "scl"
    L: int = 8
    P: int = 1
    partition_crcs: tuple[int, ...] = ()
    T: int = 20
    norm: float = DEFAULT_NORM
    early_stop: bool = True

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm: unknown decoder {self.algorithm!r}")

    @property
    def is_polar(self) -> bool:
        return self.algorithm in POLAR_ALGORITHMS

    def label(self, crc_width: int = 0) -> str:
        """Series name such as ``SCL8-CRC8``, ``PSCL(2,2)-CRC(8,8)`` or ``LDPC-T20``."""
        crc = f"-CRC{crc_width}" if crc_width else ""
        if self.algorithm == "sc":
            return "SC"
        if self.algorithm == "scl":
            return f"SCL{self.L}{crc}"
        if self.algorithm == "sscl":
            return f"SSCL{self.L}{crc}"
        if self.algorithm == "fast_sscl":
            return f"Fast-SSCL{self.L}{crc}"
        if self.algorithm == "pscl":
            return f"PSCL({self.P},{self.L})-CRC({','.join(str(c) for c in self.partition_crcs)})"
        if self.algorithm == "ldpc":
            return f"LDPC-T{self.T}"
        return "Uncoded"


@dataclass(frozen=True)
class UncodedCode:
    """Identity code: N payload bits sent as they are."""

    N: int

    @property
    def K(self) -> int:
        return self.N

    @property
    def rate(self) -> float:
        return 1.0

    @property
    def label(self) -> str:
        return f"Uncoded({self.N})"


class FrameCodec(Protocol):
    rate: float
    payload_length: int
    quantizer: Quantizer

    def draw(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]: ...

    def decode(self, llrs: np.ndarray) -> np.ndarray: ...


def build_list_decoder(
    code: PolarCode,
    decoder: DecoderConfig,
    quantizer: Quantizer = FLOAT,
    on_event: EventCallback | None = None,
) -> ListDecoder:
    """Instantiate the list decoder for a polar algorithm.

    SC is returned as a one-path list decoder, which decides identically.
    """
    if decoder.algorithm == "pscl":
        plan = PartitionPlan.build(code, decoder.P, decoder.partition_crcs)
        return PartitionedListDecoder(code, plan, decoder.L, quantizer=quantizer, on_event=on_event)
    if decoder.algorithm == "sscl":
        return SimplifiedListDecoder(code, decoder.L, quantizer=quantizer, on_event=on_event)
    if decoder.algorithm == "fast_sscl":
        return FastSimplifiedListDecoder(code, decoder.L, quantizer=quantizer, on_event=on_event)
    if decoder.algorithm in ("sc", "scl"):
        L = 1 if decoder.algorithm == "sc" else decoder.L
        return ListDecoder(code, L, quantizer=quantizer, on_event=on_event)
    raise ConfigurationError(f"algorithm: {decoder.algorithm} is not a polar decoder")


class PolarFrameCodec:
    """Random payloads through a polar code and one of its decoders."""

    def __init__(self, code: PolarCode, decoder: DecoderConfig, quantizer: Quantizer = FLOAT):
        self.code = code
        self.algorithm = decoder.algorithm
        self.quantizer = quantizer
        self.rate = code.rate
        self._decoder: ListDecoder | None = None
        if decoder.algorithm != "sc":
            self._decoder = build_list_decoder(code, decoder, quantizer)
        self.plan: PartitionPlan | None = getattr(self._decoder, "plan", None)
        self.layout = self.plan.layout if self.plan else code.layout
        self.payload_length = self.layout.payload_length

    def draw(self, rng):
        payload = rng.integers(0, 2, self.payload_length, dtype=np.uint8)
        return payload, encode(self.code, self.layout.place(payload))

    def decode(self, llrs):
        if self._decoder is None:
            return self.layout.extract(sc_decode(self.code, llrs, self.quantizer))
        return self._decoder.decode(llrs).payload


class LdpcFrameCodec:
    """All-zero codewords through the layered min-sum decoder.

    The payload is the systematic part, the first N - M bits.
    """

    def __init__(self, code: LdpcCode, decoder: DecoderConfig):
        self.code = code
        self.T = decoder.T
        self.norm = decoder.norm
        self.early_stop = decoder.early_stop
        self.rate = code.rate
        self.payload_length = code.K
        self.quantizer = FLOAT

    def draw(self, rng):
        return np.zeros(self.payload_length, dtype=np.uint8), np.zeros(self.code.N, dtype=np.uint8)

    def decode(self, llrs):
        result = nms_layered_decode(self.code, llrs, self.T, self.norm, early_stop=self.early_stop)
        return result.bits[: self.payload_length]


class UncodedFrameCodec:
    def __init__(self, code: UncodedCode):
        self.rate = 1.0
        self.payload_length = code.N
        self.quantizer = FLOAT

    def draw(self, rng):
        payload = rng.integers(0, 2, self.payload_length, dtype=np.uint8)
        return payload, payload

    def decode(self, llrs):
        return (np.asarray(llrs) < 0).astype(np.uint8)


def make_codec(
    code: PolarCode | LdpcCode | UncodedCode,
    decoder: DecoderConfig,
    quantizer: Quantizer = FLOAT,
) -> FrameCodec:
    """Pair a code with the frame pipeline of ``decoder``.

    The fixed-point model covers the polar decoders only; LDPC and uncoded
    frames always run in float.
    """
    if isinstance(code, PolarCode) and decoder.is_polar:
        return PolarFrameCodec(code, decoder, quantizer)
    if quantizer.fixed:
        logger.info("%s runs in float; the fixed-point model covers polar decoders only", decoder.label())
    if isinstance(code, LdpcCode) and decoder.algorithm == "ldpc":
        return LdpcFrameCodec(code, decoder)
    if isinstance(code, UncodedCode) and decoder.algorithm == "uncoded":
        return UncodedFrameCodec(code)
    raise ConfigurationError(f"algorithm: {decoder.algorithm} cannot decode {type(code).__name__}")


# --- results ---------------------------------------------------------------


def clopper_pearson(errors: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval of an error rate."""
    if trials == 0:
        return 0.0, 1.0
    tail = (1.0 - confidence) / 2.0
    low = 0.0 if errors == 0 else float(stats.beta.ppf(tail, errors, trials - errors + 1))
    high = 1.0 if errors == trials else float(stats.beta.ppf(1.0 - tail, errors + 1, trials - errors))
    return low, high


@dataclass(frozen=True)
class StopRule:
    min_frame_errors: int = 100
    max_frames: int = 10**7

    def __post_init__(self):
        if self.min_frame_errors < 1:
            raise ConfigurationError(f"min_errors: must be >= 1, got {self.min_frame_errors}")
        if self.max_frames < 1:
            raise ConfigurationError(f"max_frames: must be >= 1, got {self.max_frames}")


@dataclass
class SimPoint:
    ebn0_db: float
    frames: int
    frame_errors: int
    bit_errors: int
    payload_bits: int
    seed: int
    wall_time: float = 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0

    @property
    def ber(self) -> float:
        bits = self.frames * self.payload_bits
        return self.bit_errors / bits if bits else 0.0

    def fer_interval(self, confidence: float = 0.95) -> tuple[float, float]:
        return clopper_pearson(self.frame_errors, self.frames, confidence)

    def ber_interval(self, confidence: float = 0.95) -> tuple[float, float]:
        return clopper_pearson(self.bit_errors, self.frames * self.payload_bits, confidence)


@dataclass
class SimResult:
    """A sweep of SimPoints for one decoder on one code."""

    decoder: str
    code: str
    L: int | None = None
    P: int | None = None
    T: int | None = None
    quant: str = "float"
    points: list[SimPoint] = field(default_factory=list)
    fingerprint: str = ""

    def rows(self) -> list[list[str]]:
        def opt(value):
            return "" if value is None else str(value)

        return [
            [
                f"{p.ebn0_db:g}",
                str(p.frames),
                str(p.frame_errors),
                str(p.bit_errors),
                f"{p.fer:.6e}",
                f"{p.ber:.6e}",
                str(p.seed),
                self.decoder,
                self.code,
                opt(self.L),
                opt(self.P),
                opt(self.T),
                self.quant,
            ]
            for p in self.points
        ]

    def to_csv(self) -> str:
        return results_to_csv([self])


def results_to_csv(results: Iterable[SimResult], series: bool = False) -> str:
    """CSV text of one or more sweeps; ``series`` prepends the decoder label column."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow((["series"] if series else []) + list(CSV_HEADER))
    for result in results:
        for row in result.rows():
            writer.writerow(([result.decoder] if series else []) + row)
    return buffer.getvalue()


# --- engine ----------------------------------------------------------------


@dataclass(frozen=True)
class BlockCounts:
    index: int
    frames: int
    frame_errors: int
    bit_errors: int


def run_block(
    codec: FrameCodec,
    channel: ChannelConfig,
    index: int,
    block_size: int,
    max_frames: int,
) -> BlockCounts:
    """Simulate the frames of block ``index``."""
    sigma = channel.sigma
    start = index * block_size
    stop = min(start + block_size, max_frames)
    frame_errors = bit_errors = 0
    for frame_index in range(start, stop):
        rng = frame_rng(channel.seed, frame_index)
        payload, codeword = codec.draw(rng)
        llrs = quantize(channel_llr(transmit(codeword, sigma, rng), sigma), codec.quantizer, "channel_llr")
        errors = int(np.count_nonzero(codec.decode(llrs) != payload))
        bit_errors += errors
        frame_errors += errors > 0
    return BlockCounts(index, stop - start, frame_errors, bit_errors)


async def run_point_async(
    code: PolarCode | LdpcCode | UncodedCode,
    decoder: DecoderConfig,
    channel: ChannelConfig,
    stop: StopRule = StopRule(),
    *,
    quantizer: Quantizer = FLOAT,
    workers: int = 1,
    block_size: int = DEFAULT_BLOCK_SIZE,
    on_event: EventCallback | None = None,
) -> SimPoint:
    """Simulate one Eb/N0 point until the stopping rule fires.

    Args:
        code: Polar, LDPC or uncoded reference code
        decoder: Decoder configuration matching ``code``
        channel: Eb/N0, rate and seed
        stop: Minimum frame errors and maximum frames
        quantizer: Arithmetic model of polar channel LLRs and decoders
        workers: Number of worker processes (1 runs in this process)
        block_size: Frames per block
        on_event: Optional progress callback

    Returns:
        The point's counts
    """
    if workers < 1:
        raise ConfigurationError(f"workers: must be >= 1, got {workers}")
    codec = make_codec(code, decoder, quantizer)
    total_blocks = math.ceil(stop.max_frames / block_size)
    started = time.monotonic()
    if on_event:
        on_event({"event": "point_start", "ebn0_db": channel.ebn0_db, "workers": workers})

    frames = frame_errors = bit_errors = 0
    loop = asyncio.get_running_loop()
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        next_block = 0
        done = False
        while not done and next_block < total_blocks:
            wave = range(next_block, min(next_block + max(1, workers), total_blocks))
            next_block = wave.stop
            if pool is None:
                results = [run_block(codec, channel, i, block_size, stop.max_frames) for i in wave]
            else:
                results = await asyncio.gather(*[
                    loop.run_in_executor(pool, run_block, codec, channel, i, block_size, stop.max_frames)
                    for i in wave
                ])
            for block in results:
                frames += block.frames
                frame_errors += block.frame_errors
                bit_errors += block.bit_errors
                if on_event:
                    on_event({
                        "event": "block_complete",
                        "ebn0_db": channel.ebn0_db,
                        "block": block.index,
                        "frames": frames,
                        "frame_errors": frame_errors,
                    })
                if frame_errors >= stop.min_frame_errors or frames >= stop.max_frames:
                    done = True
                    break
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)

    point = SimPoint(
        ebn0_db=channel.ebn0_db,
        frames=frames,
        frame_errors=frame_errors,
        bit_errors=bit_errors,
        payload_bits=codec.payload_length,
        seed=channel.seed,
        wall_time=time.monotonic() - started,
    )
    logger.debug("%.2f dB: %d/%d frame errors", channel.ebn0_db, frame_errors, frames)
    if on_event:
        on_event({
            "event": "point_complete",
            "ebn0_db": channel.ebn0_db,
            "frames": frames,
            "frame_errors": frame_errors,
            "fer": point.fer,
            "wall_time": point.wall_time,
        })
    return point


def run_point(*args, **kwargs) -> SimPoint:
    """Synchronous wrapper around :func:`run_point_async`."""
    return asyncio.run(run_point_async(*args, **kwargs))


def run_sweep(
    code: PolarCode | LdpcCode | UncodedCode,
    decoder: DecoderConfig,
    ebn0_list: Iterable[float],
    stop: StopRule = StopRule(),
    *,
    seed: int = 0,
    quantizer: Quantizer = FLOAT,
    workers: int = 1,
    block_size: int = DEFAULT_BLOCK_SIZE,
    on_event: EventCallback | None = None,
    fingerprint: str = "",
) -> SimResult:
    """Run one point per Eb/N0 value, in ascending order."""
    ebn0_list = [float(e) for e in ebn0_list]
    if not ebn0_list:
        raise ConfigurationError("ebn0_list: must not be empty")
    if any(b <= a for a, b in zip(ebn0_list, ebn0_list[1:])):
        raise ConfigurationError("ebn0_list: must be strictly ascending")

    crc_width = code.crc_width if isinstance(code, PolarCode) else 0
    result = SimResult(
        decoder=decoder.label(crc_width),
        code=code.label,
        L=decoder.L if decoder.algorithm in ("scl", "sscl", "fast_sscl", "pscl") else None,
        P=decoder.P if decoder.algorithm == "pscl" else None,
        T=decoder.T if decoder.algorithm == "ldpc" else None,
        quant=quantizer.mode if decoder.is_polar else FLOAT.mode,
        fingerprint=fingerprint,
    )
    for ebn0_db in ebn0_list:
        channel = ChannelConfig(ebn0_db, code.rate, seed)
        point = run_point(
            code, decoder, channel, stop,
            quantizer=quantizer, workers=workers, block_size=block_size, on_event=on_event,
        )
        result.points.append(point)
    return result


# --- CRC allocation sweep --------------------------------------------------


@dataclass(frozen=True)
class CrcAllocation:
    widths: tuple[int, ...]
    point: SimPoint

    @property
    def total_bits(self) -> int:
        return sum(self.widths)


def crc_allocations(P: int, crc_lengths: Iterable[int]) -> list[tuple[int, ...]]:
    """Per-partition CRC length tuples, symmetric allocations first."""
    lengths = list(dict.fromkeys(int(c) for c in crc_lengths))
    if not lengths:
        raise ConfigurationError("crc_lengths: must not be empty")
    bad = [c for c in lengths if c < 0 or c % 4]
    if bad:
        raise ConfigurationError(f"crc_lengths: {bad} are not multiples of four")
    symmetric = [(c,) * P for c in lengths]
    rest = [combo for combo in itertools.product(lengths, repeat=P) if combo not in symmetric]
    return symmetric + rest


def crc_sweep(
    code: PolarCode,
    P: int,
    L: int,
    crc_lengths: Iterable[int],
    target_ebn0: float,
    stop: StopRule = StopRule(),
    *,
    seed: int = 0,
    quantizer: Quantizer = FLOAT,
    workers: int = 1,
    block_size: int = DEFAULT_BLOCK_SIZE,
    on_event: EventCallback | None = None,
) -> list[CrcAllocation]:
    """Rank per-partition CRC allocations of PSCL(P, L) by FER at one Eb/N0.

    Ties in FER go to the allocation with fewer CRC bits, then to the
    enumeration order.
    """
    ranking = []
    channel = ChannelConfig(target_ebn0, code.rate, seed)
    for widths in crc_allocations(P, crc_lengths):
        decoder = DecoderConfig("pscl", L=L, P=P, partition_crcs=widths)
        point = run_point(
            code, decoder, channel, stop,
            quantizer=quantizer, workers=workers, block_size=block_size, on_event=on_event,
        )
        logger.info("CRC%s: FER %.3e over %d frames", widths, point.fer, point.frames)
        ranking.append(CrcAllocation(widths, point))
    return sorted(ranking, key=lambda a: (a.point.fer, a.total_bits))
