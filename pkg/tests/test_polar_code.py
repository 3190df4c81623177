"""Tests for code construction, encoding and CRC handling."""

import numpy as np
import pytest

from polarlab.exceptions import CodeParameterError, ConstructionError, ContractError
from polarlab.polar_code import (
    CrcSpec,
    as_bits,
    build_code,
    construct_reliability,
    crc_check,
    crc_compute,
    encode,
    load_reliability_file,
    place_payload,
    polar_transform,
    validate_permutation,
    write_reliability_file,
)


def test_polar_transform_small_cases():
    assert polar_transform(np.array([0, 1], dtype=np.uint8)).tolist() == [1, 1]
    assert polar_transform(np.array([1, 0], dtype=np.uint8)).tolist() == [1, 0]
    assert polar_transform(np.array([0, 0, 0, 1], dtype=np.uint8)).tolist() == [1, 1, 1, 1]
    assert polar_transform(np.array([1, 0, 0, 0], dtype=np.uint8)).tolist() == [1, 0, 0, 0]


def test_polar_transform_is_its_own_inverse():
    rng = np.random.default_rng(3)
    u = rng.integers(0, 2, 64, dtype=np.uint8)
    assert np.array_equal(polar_transform(polar_transform(u)), u)


def test_polar_transform_works_on_batches():
    rng = np.random.default_rng(4)
    batch = rng.integers(0, 2, (5, 16), dtype=np.uint8)
    expected = np.stack([polar_transform(row) for row in batch])
    assert np.array_equal(polar_transform(batch), expected)


def test_as_bits_accepts_strings_and_checks_length():
    assert as_bits("1011").tolist() == [1, 0, 1, 1]
    with pytest.raises(ContractError):
        as_bits([0, 2, 1])
    with pytest.raises(ContractError):
        as_bits("101", length=4)


def test_crc4_remainders():
    spec = CrcSpec.default(4)
    # x^4 mod (x^4 + x + 1) = x + 1
    assert crc_compute(spec, [1]).tolist() == [0, 0, 1, 1]
    # x^5 mod (x^4 + x + 1) = x^2 + x
    assert crc_compute(spec, [1, 0]).tolist() == [0, 1, 1, 0]
    assert crc_compute(spec, [0, 0, 0, 0, 0]).tolist() == [0, 0, 0, 0]


def test_crc_check_detects_single_bit_errors():
    spec = CrcSpec.default(8)
    rng = np.random.default_rng(9)
    message = rng.integers(0, 2, 40, dtype=np.uint8)
    word = np.concatenate([message, crc_compute(spec, message)])
    assert crc_check(spec, word)
    for position in range(word.size):
        corrupted = word.copy()
        corrupted[position] ^= 1
        assert not crc_check(spec, corrupted)


def test_crc_check_rejects_short_messages():
    with pytest.raises(ContractError):
        crc_check(CrcSpec.default(8), [1, 0, 1])


def test_crc_initial_value_changes_the_remainder():
    plain = CrcSpec.default(8)
    preloaded = CrcSpec(8, plain.polynomial, 0xFF)
    message = [1, 0, 1, 1, 0, 0, 1]
    assert not np.array_equal(crc_compute(plain, message), crc_compute(preloaded, message))
    word = np.concatenate([message, crc_compute(preloaded, message)])
    assert crc_check(preloaded, word)


def test_crc_spec_validation_and_hex():
    assert CrcSpec.default(8).to_dict() == {"width": 8, "poly_hex": "0x07", "init_hex": "0x00"}
    assert CrcSpec.from_hex(16).polynomial == 0x1021
    assert CrcSpec.from_hex(8, "0x9B", "0x01") == CrcSpec(8, 0x9B, 1)
    with pytest.raises(CodeParameterError):
        CrcSpec(6, 0x3)
    with pytest.raises(CodeParameterError):
        CrcSpec(8, 0x06)
    with pytest.raises(CodeParameterError):
        CrcSpec.default(20)


@pytest.mark.parametrize("method", ["bhattacharyya", "gaussian_approximation"])
def test_reliability_order_is_a_permutation(method):
    order = construct_reliability(256, 2.0, method)
    assert sorted(order.tolist()) == list(range(256))
    assert order[0] == 0
    assert order[-1] == 255


@pytest.mark.parametrize("method", ["bhattacharyya", "gaussian_approximation"])
def test_reliability_order_is_read_only(method):
    order = construct_reliability(16, 1.0, method)
    with pytest.raises(ValueError):
        order[0] = 3


def test_bhattacharyya_frozen_set_for_length_8():
    order = construct_reliability(8, 2.0, "bhattacharyya")
    code = build_code(8, 4, order)
    assert sorted(code.frozen_positions.tolist()) == [0, 1, 2, 4]


def test_gaussian_approximation_large_length_stays_finite():
    order = construct_reliability(1024, 4.0, "gaussian_approximation")
    assert sorted(order.tolist()) == list(range(1024))


def test_construction_rejects_bad_lengths():
    with pytest.raises(ConstructionError):
        construct_reliability(12, 2.0)
    with pytest.raises(ConstructionError):
        construct_reliability(16, 2.0, "from_file")


def test_reliability_file_round_trip(tmp_path):
    order = construct_reliability(32, 1.5)
    path = tmp_path / "reliability.txt"
    write_reliability_file(path, order)
    assert np.array_equal(load_reliability_file(path, 32), order)
    assert np.array_equal(construct_reliability(32, 0.0, "from_file", path=path), order)


def test_reliability_file_must_be_a_permutation(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0\n1\n1\n3\n")
    with pytest.raises(ConstructionError):
        load_reliability_file(path, 4)
    with pytest.raises(ConstructionError):
        validate_permutation([0, 1, 2], 4)


def test_build_code_freezes_least_reliable_positions():
    order = construct_reliability(64, 2.0)
    code = build_code(64, 40, order, CrcSpec.default(8))
    assert code.frozen_mask.sum() == 24
    assert set(code.frozen_positions.tolist()) == set(order[:24].tolist())
    assert code.payload_length == 32
    assert code.label == "PC(64,40)"
    assert code.rate == pytest.approx(40 / 64)


def test_build_code_rejects_bad_parameters():
    order = construct_reliability(16, 2.0)
    with pytest.raises(CodeParameterError):
        build_code(16, 0, order)
    with pytest.raises(CodeParameterError):
        build_code(16, 17, order)
    with pytest.raises(CodeParameterError):
        build_code(16, 8, order, CrcSpec.default(8))


def test_place_payload_puts_crc_after_the_message():
    code = build_code(64, 32, construct_reliability(64, 2.0), CrcSpec.default(8))
    rng = np.random.default_rng(1)
    payload = rng.integers(0, 2, code.payload_length, dtype=np.uint8)
    u = place_payload(code, payload)
    assert not np.any(u[code.frozen_mask])
    info = u[code.info_positions]
    assert np.array_equal(info[: code.payload_length], payload)
    assert crc_check(code.crc, info)
    assert np.array_equal(code.layout.extract(u), payload)


def test_encode_rejects_nonzero_frozen_bits():
    code = build_code(8, 4, construct_reliability(8, 2.0, "bhattacharyya"))
    u = np.zeros(8, dtype=np.uint8)
    u[code.frozen_positions[0]] = 1
    with pytest.raises(ContractError):
        encode(code, u)
    with pytest.raises(ContractError):
        encode(code, np.zeros(4, dtype=np.uint8))


def test_encode_all_zero_payload_gives_zero_codeword():
    code = build_code(32, 16, construct_reliability(32, 2.0), CrcSpec.default(4))
    u = place_payload(code, np.zeros(code.payload_length, dtype=np.uint8))
    assert not np.any(encode(code, u))
