"""Tests for configuration loading, validation and fingerprints."""

import json

import pytest

from polarlab.channel_sim import UncodedCode
from polarlab.config import (
    DEFAULT_EBN0_LIST,
    ExperimentConfig,
    load_config,
    seed_from_environment,
    validate_config,
)
from polarlab.exceptions import ConfigurationError
from polarlab.ldpc_baseline import LdpcCode
from polarlab.polar_code import PolarCode


def test_minimal_polar_config_is_fully_defaulted():
    data = validate_config({"N": 256, "K": 128, "algorithm": "scl", "L": 4})
    assert data["code"] == {
        "N": 256,
        "K": 128,
        "construction": "gaussian_approximation",
        "design_ebn0_db": 2.0,
        "crc": {"width": 8, "poly_hex": "0x07", "init_hex": "0x00"},
        "family": "polar",
    }
    assert data["decoder"] == {"algorithm": "scl", "L": 4}
    assert data["channel"] == {"ebn0_list": DEFAULT_EBN0_LIST, "seed": 0}
    assert data["stop"] == {"min_errors": 100, "max_frames": 10**7}
    assert data["quantizer"] == {"mode": "float"}


def test_sections_and_shorthand_are_equivalent():
    flat = ExperimentConfig.from_mapping({"N": 64, "K": 32, "algorithm": "sscl", "L": 2, "seed": 9})
    nested = ExperimentConfig.from_mapping({
        "code": {"N": 64, "K": 32},
        "decoder": {"algorithm": "sscl", "L": 2},
        "channel": {"seed": 9},
    })
    assert flat.canonical_json == nested.canonical_json
    assert flat.fingerprint == nested.fingerprint


def test_fingerprint_tracks_content():
    base = ExperimentConfig.from_mapping({"N": 64, "K": 32})
    assert base.fingerprint == ExperimentConfig.from_mapping({"N": 64, "K": 32}).fingerprint
    assert base.fingerprint != base.with_overrides(seed=1).fingerprint
    assert len(base.fingerprint) == 16
    assert json.loads(base.canonical_json)["code"]["N"] == 64


def test_zero_list_size_is_rejected():
    with pytest.raises(ConfigurationError) as e:
        validate_config({"N": 64, "K": 32, "algorithm": "scl", "L": 0})
    assert "decoder.L" in str(e.value)


def test_partition_count_must_divide_length():
    with pytest.raises(ConfigurationError) as e:
        validate_config({"N": 64, "K": 32, "algorithm": "pscl", "P": 3})
    assert "decoder.P" in str(e.value)


def test_every_problem_is_reported():
    with pytest.raises(ConfigurationError) as e:
        validate_config({"N": 100, "K": 32, "L": -1, "colour": "red"})
    problems = e.value.problems
    assert any(p.startswith("code.N") for p in problems)
    assert any(p.startswith("decoder.L") for p in problems)
    assert any(p.startswith("colour") for p in problems)


def test_pscl_defaults_partition_crcs_from_code_crc():
    config = ExperimentConfig.from_mapping({"N": 512, "K": 256, "algorithm": "pscl", "P": 2, "L": 2})
    assert config.data["decoder"]["partition_crcs"] == [8, 8]
    assert config.data["code"]["crc"] is None
    assert config.decoder.partition_crcs == (8, 8)
    code = config.build_code()
    assert isinstance(code, PolarCode)
    assert code.crc is None


def test_pscl_partition_crcs_are_checked():
    with pytest.raises(ConfigurationError):
        validate_config({"N": 64, "K": 32, "algorithm": "pscl", "P": 2, "partition_crcs": [8]})
    with pytest.raises(ConfigurationError):
        validate_config({"N": 64, "K": 32, "algorithm": "pscl", "P": 2, "partition_crcs": [6, 6]})
    with pytest.raises(ConfigurationError):
        validate_config({"N": 64, "K": 32, "algorithm": "scl", "P": 2})


def test_crc_forms():
    assert validate_config({"N": 64, "K": 32, "crc": 0})["code"]["crc"] is None
    assert validate_config({"N": 64, "K": 32, "crc": 16})["code"]["crc"]["poly_hex"] == "0x1021"
    custom = validate_config({"N": 64, "K": 32, "crc": {"width": 8, "poly_hex": "0x9B"}})
    assert custom["code"]["crc"]["poly_hex"] == "0x9B"
    with pytest.raises(ConfigurationError):
        validate_config({"N": 64, "K": 32, "crc": 20})
    with pytest.raises(ConfigurationError):
        validate_config({"N": 64, "K": 8, "crc": 8})


def test_sc_defaults_to_a_single_path():
    assert validate_config({"N": 64, "K": 32, "algorithm": "sc"})["decoder"]["L"] == 1


def test_ldpc_config_defaults():
    config = ExperimentConfig.from_mapping({"algorithm": "ldpc"})
    assert config.family == "ldpc"
    assert config.data["code"]["rate"] == "1/2"
    assert config.data["code"]["variant"] == "A"
    assert config.decoder.T == 20
    assert config.decoder.norm == 0.75
    assert isinstance(config.build_code(), LdpcCode)


def test_ldpc_rate_and_variant():
    config = ExperimentConfig.from_mapping({"algorithm": "ldpc", "rate": 2 / 3, "variant": "b", "T": 10})
    assert config.data["code"]["rate"] == "2/3"
    assert config.data["code"]["variant"] == "B"
    with pytest.raises(ConfigurationError):
        validate_config({"algorithm": "ldpc", "rate": "3/4"})
    with pytest.raises(ConfigurationError):
        validate_config({"algorithm": "ldpc", "rate": "1/2", "variant": "B"})
    with pytest.raises(ConfigurationError):
        validate_config({"algorithm": "ldpc", "L": 4})


def test_uncoded_config():
    config = ExperimentConfig.from_mapping({"algorithm": "uncoded", "N": 500})
    assert config.build_code() == UncodedCode(500)


def test_ebn0_list_must_ascend():
    with pytest.raises(ConfigurationError):
        validate_config({"N": 64, "K": 32, "ebn0_list": [2.0, 1.0]})
    assert validate_config({"N": 64, "K": 32, "ebn0_list": 1.5})["channel"]["ebn0_list"] == [1.5]


def test_overrides_revalidate():
    config = ExperimentConfig.from_mapping({"N": 64, "K": 32, "crc": 0})
    fixed = config.with_overrides(quant="fixed", max_frames=500, ebn0_list=[1.0, 2.0])
    assert fixed.quantizer.fixed
    assert fixed.stop.max_frames == 500
    assert fixed.ebn0_list == [1.0, 2.0]
    assert fixed.data["code"]["crc"] is None
    with pytest.raises(ConfigurationError):
        config.with_overrides(quant="double")


def test_seed_from_environment():
    assert seed_from_environment({}) is None
    assert seed_from_environment({"POLARLAB_SEED": "17"}) == 17
    assert seed_from_environment({"POLARLAB_SEED": "0x10"}) == 16
    with pytest.raises(ConfigurationError):
        seed_from_environment({"POLARLAB_SEED": "seventeen"})


def test_load_config_accepts_json_and_yaml(tmp_path):
    json_path = tmp_path / "c.json"
    json_path.write_text(json.dumps({"N": 64, "K": 32, "algorithm": "scl", "L": 2}))
    yaml_path = tmp_path / "c.yaml"
    yaml_path.write_text("code:\n  N: 64\n  K: 32\ndecoder:\n  algorithm: scl\n  L: 2\n")
    assert load_config(json_path).fingerprint == load_config(yaml_path).fingerprint


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.json")
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    with pytest.raises(ConfigurationError):
        load_config(empty)
    broken = tmp_path / "broken.yaml"
    broken.write_text("code: [1, 2\n")
    with pytest.raises(ConfigurationError):
        load_config(broken)
