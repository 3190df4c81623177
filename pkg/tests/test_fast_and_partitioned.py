"""Tests for node classification, the step model, SSCL/Fast-SSCL and PSCL."""

import logging

import numpy as np
import pytest

from polarlab.channel_sim import (
    DecoderConfig,
    PolarFrameCodec,
    StopRule,
    channel_llr,
    frame_rng,
    run_sweep,
    transmit,
)
from polarlab.exceptions import ConfigurationError
from polarlab.fast_and_partitioned import (
    FastSimplifiedListDecoder,
    NodeClass,
    PartitionPlan,
    PartitionedListDecoder,
    SimplifiedListDecoder,
    classify_tree,
    count_steps,
    fast_sscl_decode,
    node_class,
    other_node_cost,
    pscl_decode,
    rate1_cost,
    sscl_decode,
    step_report,
)
from polarlab.list_decoding import ListDecoder, sc_decode, scl_decode
from polarlab.polar_code import CrcSpec, build_code, construct_reliability, encode

HAND_ORDER = [0, 1, 2, 3, 4, 5, 8, 9, 6, 7, 10, 11, 12, 13, 14, 15]


def hand_code():
    """PC(16,8) with frozen set {0, 1, 2, 3, 4, 5, 8, 9}."""
    return build_code(16, 8, HAND_ORDER)


def make_code(N: int, K: int, crc_width: int = 0):
    crc = CrcSpec.default(crc_width) if crc_width else None
    return build_code(N, K, construct_reliability(N, 2.0), crc)


def noisy_frames(code, count: int, ebn0_db: float, seed: int = 0):
    """Seeded noisy channel LLRs, drawn the way the simulator draws them."""
    codec = PolarFrameCodec(code, DecoderConfig("scl", L=1))
    sigma = np.sqrt(1.0 / (2.0 * code.rate * 10 ** (ebn0_db / 10)))
    frames = []
    for index in range(count):
        rng = frame_rng(seed, index)
        _, codeword = codec.draw(rng)
        frames.append(channel_llr(transmit(codeword, sigma, rng), sigma))
    return frames


def test_node_class_precedence():
    assert node_class([True, True, True, True]) is NodeClass.RATE0
    assert node_class([False, False, False, False]) is NodeClass.RATE1
    assert node_class([True, True, True, False]) is NodeClass.REP
    assert node_class([True, False, False, False]) is NodeClass.SPC
    assert node_class([True, False, True, False]) is NodeClass.OTHER
    # size 2: [frozen, info] is both Rep and SPC; Rep wins
    assert node_class([True, False]) is NodeClass.REP


def test_hand_checked_schedule():
    schedule = classify_tree(hand_code(), "sscl", 8)
    assert [(n.stage, n.offset, n.node_class) for n in schedule.nodes] == [
        (2, 0, NodeClass.RATE0),
        (1, 4, NodeClass.RATE0),
        (1, 6, NodeClass.RATE1),
        (1, 8, NodeClass.RATE0),
        (1, 10, NodeClass.RATE1),
        (2, 12, NodeClass.RATE1),
    ]
    assert schedule.counts()["Rate1"] == 3
    assert schedule.to_csv().splitlines()[0] == "stage,offset,class,step_cost"


def test_length_8_rep_and_spc_halves():
    code = build_code(8, 4, construct_reliability(8, 2.0, "bhattacharyya"))
    schedule = classify_tree(code, "sscl", 8)
    assert [(n.stage, n.offset, n.node_class) for n in schedule.nodes] == [
        (2, 0, NodeClass.REP),
        (2, 4, NodeClass.SPC),
    ]
    assert [n.info_bits for n in schedule.nodes] == [1, 3]


def test_rate1_costs():
    assert rate1_cost(8, "sscl", 4) == 8
    assert rate1_cost(8, "fast_sscl", 4) == 3 + 1
    assert rate1_cost(8, "fast_sscl", 1) == 1
    assert rate1_cost(2, "fast_sscl", 8) == 2
    assert rate1_cost(8, "fast_sscl", 16) == 8
    alpha = np.array([[5.0, -0.5, 3.0, 0.1, -4.0, 2.0, -0.2, 6.0]])
    positions = FastSimplifiedListDecoder(hand_code(), 4)._split_positions(alpha)
    assert positions.tolist() == [[3, 6, 1]]


def test_hand_checked_step_counts():
    code = hand_code()
    assert count_steps(classify_tree(code, "scl", 8), 8, 16) == 54
    assert count_steps(classify_tree(code, "sscl", 8), 8, 16) == 21
    assert count_steps(classify_tree(code, "fast_sscl", 2), 2, 16) == 19
    assert count_steps(classify_tree(code, "fast_sscl", 4), 4, 16) == 21
    assert count_steps(classify_tree(code, "sscl", 8), 8, 2) == 31


def test_other_node_costs():
    assert other_node_cost(8) == 22
    order = [0, 1, 2, 3, 4, 5, 6, 8, 7, 9, 10, 11, 12, 13, 14, 15]
    code = build_code(16, 8, order)
    assert count_steps(classify_tree(code, "scl", 8), 8, 16) == 54
    assert count_steps(classify_tree(code, "sscl", 8), 8, 16) == 33


def test_step_counts_order_for_half_rate_512():
    report, _ = step_report(make_code(512, 256), 8, 32)
    assert report.totals["fast_sscl"] < report.totals["sscl"] < report.totals["scl"]
    assert 0.0 < report.reduction("sscl") < report.reduction("fast_sscl") < 1.0


def test_count_steps_rejects_bad_parameters():
    schedule = classify_tree(hand_code(), "sscl", 8)
    with pytest.raises(ConfigurationError):
        count_steps(schedule, 8, 3)
    with pytest.raises(ConfigurationError):
        count_steps(schedule, 0, 16)
    with pytest.raises(ConfigurationError):
        classify_tree(hand_code(), "turbo", 8)


@pytest.mark.parametrize("N,K", [(64, 32), (128, 86)])
@pytest.mark.parametrize("L", [2, 4, 8])
def test_simplified_decoders_match_list_decoder(N, K, L):
    code = make_code(N, K, crc_width=8)
    for llrs in noisy_frames(code, 25, 1.5, seed=L):
        reference = scl_decode(code, llrs, L)
        for decode in (sscl_decode, fast_sscl_decode):
            result = decode(code, llrs, L)
            assert np.array_equal(result.payload, reference.payload)
            assert result.crc_ok == reference.crc_ok
            assert result.pm == pytest.approx(reference.pm)


def test_simplified_decoder_node_events():
    code = hand_code()
    llrs = noisy_frames(code, 1, 2.0)[0]
    events = []
    SimplifiedListDecoder(code, 4, on_event=events.append).decode(llrs)
    nodes = [(e["class"], e["offset"]) for e in events if e["event"] == "node"]
    assert nodes == [("Rate0", 0), ("Rate0", 4), ("Rate1", 6), ("Rate0", 8), ("Rate1", 10), ("Rate1", 12)]
    assert not [e for e in events if e["event"] == "leaf"]


def test_rate0_node_adds_negative_llr_magnitudes():
    code = build_code(8, 4, list(range(8)))
    events = []
    SimplifiedListDecoder(code, 2, on_event=events.append).decode([1.0, -2.0, 3.0, -4.0, 10.0, 10.0, 10.0, 10.0])
    nodes = [e for e in events if e["event"] == "node"]
    assert (nodes[0]["class"], nodes[0]["offset"]) == ("Rate0", 0)
    assert nodes[0]["paths"] == [(6.0,)]


def test_simplified_decoders_match_list_decoder_at_length_512():
    code = make_code(512, 256, crc_width=8)
    for llrs in noisy_frames(code, 20, 1.5, seed=9):
        reference = scl_decode(code, llrs, 4)
        for decode in (sscl_decode, fast_sscl_decode):
            result = decode(code, llrs, 4)
            assert np.array_equal(result.payload, reference.payload)
            assert result.pm == pytest.approx(reference.pm)


def test_fast_decoder_uses_its_own_schedule():
    decoder = FastSimplifiedListDecoder(hand_code(), 2)
    assert decoder.schedule.algorithm == "fast_sscl"
    assert decoder.algorithm == "fast_sscl"


def test_pscl_with_one_partition_is_scl():
    code = make_code(64, 32, crc_width=8)
    plan = PartitionPlan.build(code, 1, [8])
    for llrs in noisy_frames(code, 20, 1.5):
        reference = scl_decode(code, llrs, 4)
        result = pscl_decode(code, llrs, plan, 4)
        assert np.array_equal(result.payload, reference.payload)
        assert result.crc_ok == reference.crc_ok
        assert result.pm == pytest.approx(reference.pm)


def test_pscl_with_single_leaf_partitions_is_sc():
    code = make_code(32, 16)
    plan = PartitionPlan.build(code, 32, [0] * 32)
    for llrs in noisy_frames(code, 20, 1.0):
        assert np.array_equal(pscl_decode(code, llrs, plan, 4).u_hat, sc_decode(code, llrs))


def test_pscl_carries_one_path_across_the_boundary():
    code = make_code(128, 64)
    plan = PartitionPlan.build(code, 2, [8, 8])
    events = []
    PartitionedListDecoder(code, plan, 4, on_event=events.append).decode(noisy_frames(code, 1, 1.0)[0])
    kinds = [e["event"] for e in events]
    boundary = kinds.index("partition")
    first = events[boundary + 1]
    assert first["index"] == 64
    assert len(first["paths"]) == (1 if first["frozen"] else 2)


def test_pscl_error_rate_lies_between_scl_and_sc():
    code = make_code(128, 64)
    stop = StopRule(10**6, 400)

    def fer(decoder):
        return run_sweep(code, decoder, [1.5], stop, seed=5).points[0].fer

    scl = fer(DecoderConfig("scl", L=4))
    pscl = fer(DecoderConfig("pscl", L=4, P=2, partition_crcs=(0, 0)))
    sc = fer(DecoderConfig("sc", L=1))
    assert sc > 0
    assert scl <= pscl + 0.02
    assert pscl <= sc + 0.02


def test_partition_plan_layout():
    code = make_code(64, 32)
    plan = PartitionPlan.build(code, 2, [4, 4])
    assert plan.boundaries == [(0, 32), (32, 64)]
    assert plan.crc_widths == (4, 4)
    assert plan.payload_length == 32 - 8
    for (start, stop), segment in zip(plan.boundaries, plan.layout.segments):
        positions = np.concatenate([segment.message_positions, segment.crc_positions])
        assert np.all((positions >= start) & (positions < stop))
        assert segment.crc_positions.min() > segment.message_positions.max()


def test_partition_plan_drops_crc_of_sparse_partition(caplog):
    with caplog.at_level(logging.WARNING, logger="polarlab.fast_and_partitioned"):
        plan = PartitionPlan.build(hand_code(), 2, [4, 4])
    assert plan.crc_widths == (0, 4)
    assert plan.payload_length == 2 + 2
    assert "dropped" in caplog.text


def test_partition_plan_rejects_bad_partition_counts():
    code = make_code(64, 32)
    with pytest.raises(ConfigurationError):
        PartitionPlan.build(code, 3, [8, 8, 8])
    with pytest.raises(ConfigurationError):
        PartitionPlan.build(code, 2, [8])
    with pytest.raises(ConfigurationError):
        PartitionPlan.build(code, 2, [8, -4])


def test_pscl_noiseless_frame_passes_every_partition():
    code = make_code(128, 64)
    plan = PartitionPlan.build(code, 2, [8, 8])
    rng = np.random.default_rng(0)
    payload = rng.integers(0, 2, plan.payload_length, dtype=np.uint8)
    llrs = 3.0 * (1.0 - 2.0 * encode(code, plan.layout.place(payload)))
    events = []
    result = PartitionedListDecoder(code, plan, 2, on_event=events.append).decode(llrs)
    assert np.array_equal(result.payload, payload)
    assert result.crc_ok
    partitions = [e for e in events if e["event"] == "partition"]
    assert [e["index"] for e in partitions] == [0, 1]
    assert all(e["crc_ok"] for e in partitions)


def test_pscl_decoder_rejects_foreign_plan():
    plan = PartitionPlan.build(make_code(32, 16), 2, [4, 4])
    with pytest.raises(ConfigurationError):
        PartitionedListDecoder(make_code(64, 32), plan, 2)


def test_list_decoder_classes_share_the_tree_walk():
    assert issubclass(SimplifiedListDecoder, ListDecoder)
    assert issubclass(PartitionedListDecoder, ListDecoder)
