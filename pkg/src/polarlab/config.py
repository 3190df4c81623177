"""Experiment configuration: loading, validation, defaults and fingerprints.

A configuration document has the sections ``code``, ``decoder``,
``channel``, ``stop`` and ``quantizer``. Flat shorthand keys (``N``, ``K``,
``algorithm``, ``L``, ...) may be used at the top level and are moved into
their section. JSON and YAML files are both accepted.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from polarlab.channel_sim import ALGORITHMS, DecoderConfig, StopRule, UncodedCode
from polarlab.exceptions import ConfigurationError, PolarLabError
from polarlab.ldpc_baseline import BASE_MATRIX_FILES, DEFAULT_NORM, DEFAULT_Z, LdpcCode, load_base_matrix
from polarlab.polar_code import (
    CONSTRUCTION_METHODS,
    DEFAULT_CRC_POLYNOMIALS,
    CrcSpec,
    PolarCode,
    build_code,
    construct_reliability,
    is_power_of_two,
)
from polarlab.quantization import FIXED, FLOAT, Quantizer

SEED_ENV = "POLARLAB_SEED"

DEFAULT_DESIGN_EBN0_DB = 2.0
DEFAULT_CRC_WIDTH = 8
DEFAULT_EBN0_LIST = [1.0, 1.5, 2.0, 2.5, 3.0]
DEFAULT_UNCODED_LENGTH = 1000

SECTIONS: dict[str, tuple[str, ...]] = {
    "code": (
        "N", "K", "construction", "design_ebn0_db", "reliability_file", "crc",
        "rate", "variant", "z", "family",
    ),
    "decoder": ("algorithm", "L", "P", "partition_crcs", "T", "norm", "early_stop"),
    "channel": ("ebn0_list", "seed"),
    "stop": ("min_errors", "max_frames"),
    "quantizer": ("mode",),
}

SHORTHAND: dict[str, str] = {key: section for section, keys in SECTIONS.items() for key in keys}
SHORTHAND["quant"] = "quantizer"


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _rate_label(value: Any) -> str | None:
    if _is_number(value):
        for label, rate in (("1/2", 1 / 2), ("2/3", 2 / 3)):
            if abs(value - rate) < 1e-3:
                return label
        return None
    text = str(value).strip()
    return text if text in ("1/2", "2/3") else None


def _nest(raw: Mapping[str, Any], problems: list[str]) -> dict[str, dict[str, Any]]:
    nested: dict[str, dict[str, Any]] = {section: {} for section in SECTIONS}
    for key, value in raw.items():
        if key in SECTIONS:
            if not isinstance(value, Mapping):
                problems.append(f"{key}: must be a mapping")
                continue
            for inner, inner_value in value.items():
                if inner not in SECTIONS[key] and not (key == "quantizer" and inner == "quant"):
                    problems.append(f"{key}.{inner}: unknown key")
                    continue
                nested[key]["mode" if inner == "quant" else inner] = inner_value
        elif key in SHORTHAND:
            section = SHORTHAND[key]
            nested[section]["mode" if key == "quant" else key] = value
        else:
            problems.append(f"{key}: unknown key")
    return nested


def _normalize_crc(value: Any, problems: list[str]) -> dict[str, Any] | None:
    if value is None or value == 0:
        return None
    if _is_int(value):
        value = {"width": value}
    if not isinstance(value, Mapping):
        problems.append("code.crc: must be a width or a mapping {width, poly_hex, init_hex}")
        return None
    unknown = set(value) - {"width", "poly_hex", "init_hex"}
    if unknown:
        problems.append(f"code.crc: unknown keys {sorted(unknown)}")
    width = value.get("width", DEFAULT_CRC_WIDTH)
    if not _is_int(width) or width < 0 or width % 4:
        problems.append(f"code.crc.width: must be a nonnegative multiple of four, got {width!r}")
        return None
    if width == 0:
        return None
    if "poly_hex" not in value and width not in DEFAULT_CRC_POLYNOMIALS:
        problems.append(f"code.crc.poly_hex: no default polynomial for width {width}")
        return None
    try:
        spec = CrcSpec.from_hex(width, value.get("poly_hex"), value.get("init_hex"))
    except (ValueError, TypeError, PolarLabError) as e:
        problems.append(f"code.crc: {e}")
        return None
    return spec.to_dict()


def validate_config(raw: Mapping[str, Any]) -> dict[str, Any]:
    """Check a raw configuration and fill in every default.

    Args:
        raw: Parsed configuration document

    Returns:
        The normalized configuration, a nested dict of plain values

    Raises:
        ConfigurationError: listing every problem found
    """
    problems: list[str] = []
    if not isinstance(raw, Mapping):
        raise ConfigurationError("configuration must be a mapping")
    nested = _nest(raw, problems)
    code, decoder = nested["code"], nested["decoder"]
    channel, stop, quantizer = nested["channel"], nested["stop"], nested["quantizer"]

    algorithm = decoder.setdefault("algorithm", "scl")
    if algorithm not in ALGORITHMS:
        problems.append(f"decoder.algorithm: must be one of {', '.join(ALGORITHMS)}, got {algorithm!r}")
        algorithm = "scl"
    family = {"ldpc": "ldpc", "uncoded": "uncoded"}.get(algorithm, "polar")
    code["family"] = family

    if family == "polar":
        _validate_polar_code(code, decoder, problems)
    elif family == "ldpc":
        _validate_ldpc_code(code, decoder, problems)
    else:
        N = code.setdefault("N", DEFAULT_UNCODED_LENGTH)
        if not _is_int(N) or N < 1:
            problems.append(f"code.N: must be a positive integer, got {N!r}")
        extra = set(code) - {"family", "N"}
        if extra:
            problems.append(f"code: keys {sorted(extra)} do not apply to the uncoded reference")

    ebn0_list = channel.setdefault("ebn0_list", list(DEFAULT_EBN0_LIST))
    if isinstance(ebn0_list, (int, float)) and not isinstance(ebn0_list, bool):
        ebn0_list = channel["ebn0_list"] = [ebn0_list]
    if not isinstance(ebn0_list, list) or not ebn0_list or not all(_is_number(e) for e in ebn0_list):
        problems.append("channel.ebn0_list: must be a nonempty list of numbers")
    else:
        channel["ebn0_list"] = [float(e) for e in ebn0_list]
        if any(b <= a for a, b in zip(ebn0_list, ebn0_list[1:])):
            problems.append("channel.ebn0_list: must be strictly ascending")
    seed = channel.setdefault("seed", 0)
    if not _is_int(seed) or not 0 <= seed < 2**64:
        problems.append(f"channel.seed: must be an integer in [0, 2^64), got {seed!r}")

    min_errors = stop.setdefault("min_errors", 100)
    if not _is_int(min_errors) or min_errors < 1:
        problems.append(f"stop.min_errors: must be an integer >= 1, got {min_errors!r}")
    max_frames = stop.setdefault("max_frames", 10**7)
    if not _is_int(max_frames) or max_frames < 1:
        problems.append(f"stop.max_frames: must be an integer >= 1, got {max_frames!r}")

    mode = quantizer.setdefault("mode", "float")
    if mode not in ("float", "fixed"):
        problems.append(f"quantizer.mode: must be float or fixed, got {mode!r}")

    if problems:
        raise ConfigurationError(problems)
    return nested


def _validate_polar_code(code: dict, decoder: dict, problems: list[str]) -> None:
    algorithm = decoder["algorithm"]
    for key in ("rate", "variant", "z"):
        if key in code:
            problems.append(f"code.{key}: only applies to LDPC codes")
    for key in ("T", "norm", "early_stop"):
        if key in decoder:
            problems.append(f"decoder.{key}: only applies to the LDPC decoder")

    N, K = code.get("N"), code.get("K")
    if not _is_int(N) or not is_power_of_two(N) or N < 2:
        problems.append(f"code.N: must be a power of two >= 2, got {N!r}")
        N = None
    if not _is_int(K) or K < 1 or (N is not None and K > N):
        problems.append(f"code.K: must satisfy 0 < K <= N, got {K!r}")
        K = None

    method = code.setdefault("construction", "gaussian_approximation")
    if method not in CONSTRUCTION_METHODS:
        problems.append(f"code.construction: must be one of {', '.join(CONSTRUCTION_METHODS)}, got {method!r}")
    design = code.setdefault("design_ebn0_db", DEFAULT_DESIGN_EBN0_DB)
    if not _is_number(design):
        problems.append(f"code.design_ebn0_db: must be a number, got {design!r}")
    else:
        code["design_ebn0_db"] = float(design)
    if method == "from_file" and not code.get("reliability_file"):
        problems.append("code.reliability_file: required by from_file construction")

    crc = _normalize_crc(code.get("crc", DEFAULT_CRC_WIDTH), problems)
    code["crc"] = crc

    L = decoder.setdefault("L", 1 if algorithm == "sc" else 8)
    if not _is_int(L) or L < 1:
        problems.append(f"decoder.L: must be an integer >= 1, got {L!r}")

    if algorithm == "pscl":
        P = decoder.setdefault("P", 1)
        if not _is_int(P) or not is_power_of_two(P) or (N is not None and N % P):
            problems.append(f"decoder.P: must be a power of two dividing N, got {P!r}")
            return
        default = [crc["width"] if crc else 0] * P
        partition_crcs = decoder.setdefault("partition_crcs", default)
        if not isinstance(partition_crcs, list) or len(partition_crcs) != P:
            problems.append(f"decoder.partition_crcs: must list {P} CRC widths")
        elif not all(_is_int(c) and c >= 0 and c % 4 == 0 for c in partition_crcs):
            problems.append("decoder.partition_crcs: widths must be nonnegative multiples of four")
        elif any(c and c not in DEFAULT_CRC_POLYNOMIALS for c in partition_crcs):
            problems.append(f"decoder.partition_crcs: supported widths are 0, {sorted(DEFAULT_CRC_POLYNOMIALS)}")
        elif K is not None and sum(partition_crcs) >= K:
            problems.append(f"decoder.partition_crcs: {sum(partition_crcs)} CRC bits leave no payload in K={K}")
        code["crc"] = None
    else:
        for key in ("P", "partition_crcs"):
            if key in decoder:
                problems.append(f"decoder.{key}: only applies to PSCL")
        if crc and K is not None and K <= crc["width"]:
            problems.append(f"code.K: K={K} must exceed the CRC width {crc['width']}")


def _validate_ldpc_code(code: dict, decoder: dict, problems: list[str]) -> None:
    for key in ("K", "construction", "design_ebn0_db", "reliability_file", "crc"):
        if key in code:
            problems.append(f"code.{key}: does not apply to LDPC codes")
    for key in ("L", "P", "partition_crcs"):
        if key in decoder:
            problems.append(f"decoder.{key}: does not apply to the LDPC decoder")

    rate = _rate_label(code.setdefault("rate", "1/2"))
    variant = str(code.setdefault("variant", "A")).upper()
    if rate is None:
        problems.append(f"code.rate: must be 1/2 or 2/3, got {code['rate']!r}")
    elif (rate, variant) not in BASE_MATRIX_FILES:
        problems.append(f"code.variant: rate {rate} has no variant {variant}")
    else:
        code["rate"], code["variant"] = rate, variant
    z = code.setdefault("z", DEFAULT_Z)
    if z != DEFAULT_Z:
        problems.append(f"code.z: only z={DEFAULT_Z} is supported, got {z!r}")
    N = code.setdefault("N", 24 * DEFAULT_Z)
    if N != 24 * DEFAULT_Z:
        problems.append(f"code.N: LDPC codes have N={24 * DEFAULT_Z}, got {N!r}")

    T = decoder.setdefault("T", 20)
    if not _is_int(T) or T < 1:
        problems.append(f"decoder.T: must be an integer >= 1, got {T!r}")
    norm = decoder.setdefault("norm", DEFAULT_NORM)
    if not _is_number(norm) or not 0.0 < norm <= 1.0:
        problems.append(f"decoder.norm: must lie in (0, 1], got {norm!r}")
    else:
        decoder["norm"] = float(norm)
    early_stop = decoder.setdefault("early_stop", True)
    if not isinstance(early_stop, bool):
        problems.append(f"decoder.early_stop: must be true or false, got {early_stop!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated configuration."""

    data: dict[str, Any]

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> ExperimentConfig:
        return cls(validate_config(copy.deepcopy(dict(raw))))

    @property
    def family(self) -> str:
        return self.data["code"]["family"]

    @property
    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical_json.encode()).hexdigest()[:16]

    @property
    def decoder(self) -> DecoderConfig:
        d = self.data["decoder"]
        return DecoderConfig(
            algorithm=d["algorithm"],
            L=d.get("L", 1),
            P=d.get("P", 1),
            partition_crcs=tuple(d.get("partition_crcs", ())),
            T=d.get("T", 20),
            norm=d.get("norm", DEFAULT_NORM),
            early_stop=d.get("early_stop", True),
        )

    @property
    def stop(self) -> StopRule:
        return StopRule(self.data["stop"]["min_errors"], self.data["stop"]["max_frames"])

    @property
    def ebn0_list(self) -> list[float]:
        return list(self.data["channel"]["ebn0_list"])

    @property
    def seed(self) -> int:
        return self.data["channel"]["seed"]

    @property
    def quantizer(self) -> Quantizer:
        return FIXED if self.data["quantizer"]["mode"] == "fixed" else FLOAT

    def with_overrides(
        self,
        *,
        seed: int | None = None,
        quant: str | None = None,
        ebn0_list: list[float] | None = None,
        max_frames: int | None = None,
        min_errors: int | None = None,
    ) -> ExperimentConfig:
        """Return a revalidated copy with command-line or environment overrides."""
        data = copy.deepcopy(self.data)
        if seed is not None:
            data["channel"]["seed"] = seed
        if quant is not None:
            data["quantizer"]["mode"] = quant
        if ebn0_list is not None:
            data["channel"]["ebn0_list"] = list(ebn0_list)
        if max_frames is not None:
            data["stop"]["max_frames"] = max_frames
        if min_errors is not None:
            data["stop"]["min_errors"] = min_errors
        if self.family == "polar" and data["code"].get("crc") is None and data["decoder"]["algorithm"] != "pscl":
            data["code"]["crc"] = 0
        return ExperimentConfig.from_mapping(data)

    def build_code(self) -> PolarCode | LdpcCode | UncodedCode:
        """Construct the code the configuration describes."""
        code = self.data["code"]
        if self.family == "uncoded":
            return UncodedCode(code["N"])
        if self.family == "ldpc":
            return load_base_matrix(code["rate"], code["variant"], code["z"])
        order = construct_reliability(
            code["N"],
            code["design_ebn0_db"],
            code["construction"],
            rate=code["K"] / code["N"],
            path=code.get("reliability_file"),
        )
        crc = code.get("crc")
        spec = CrcSpec.from_hex(crc["width"], crc["poly_hex"], crc["init_hex"]) if crc else None
        return build_code(code["N"], code["K"], order, spec)


def seed_from_environment(environ: Mapping[str, str] | None = None) -> int | None:
    """Seed override from ``POLARLAB_SEED``, if set."""
    environ = os.environ if environ is None else environ
    value = environ.get(SEED_ENV)
    if value is None or value == "":
        return None
    try:
        return int(value, 0)
    except ValueError as e:
        raise ConfigurationError(f"{SEED_ENV}: not an integer: {value!r}") from e


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON or YAML configuration file."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as e:
        raise ConfigurationError(f"{path}: cannot read configuration: {e.strerror}") from e
    except yaml.YAMLError as e:
        raise ConfigurationError(f"{path}: not valid JSON or YAML: {e}") from e
    if raw is None:
        raise ConfigurationError(f"{path}: configuration file is empty")
    return ExperimentConfig.from_mapping(raw)
