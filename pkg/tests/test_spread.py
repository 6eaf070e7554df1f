import numpy as np
import pytest

from strainscope.graph.graph_builder import build_n_step
from strainscope.graph.spread import SpreadingPattern, StepCountError, classify_spreading, pattern_shares, \
    spreading_pattern, temporal_profile
from strainscope.ledger.ledger_store import TransactionRecord, ingest
from strainscope.ledger.synth_ledger import generate_records, standard_campaign


@pytest.mark.parametrize("num_addresses, label", [
    (0, "slow"), (1, "slow"), (499, "slow"), (500, "moderate"), (49_999, "moderate"), (50_000, "fast"),
    (499_999, "fast"), (500_000, "exFast"), (10 ** 7, "exFast"),
])
def test_pattern_boundaries(num_addresses, label):
    assert spreading_pattern(num_addresses).label == label


def test_pattern_rejects_negative():
    with pytest.raises(ValueError):
        spreading_pattern(-1)


def test_classify_needs_two_steps():
    records, seeds, _ = generate_records([standard_campaign("Alpha")])
    index = ingest(records)
    addresses = [s.address for s in seeds]
    assert classify_spreading(build_n_step(index, addresses, 2)) == SpreadingPattern.SLOW
    with pytest.raises(StepCountError):
        classify_spreading(build_n_step(index, addresses, 1))


def test_padded_family_is_moderate():
    records, seeds, manifest = generate_records([standard_campaign("Wide", reach_padding=1200)])
    graph = build_n_step(ingest(records), [s.address for s in seeds], 2)
    assert classify_spreading(graph).label == manifest["families"]["Wide"]["expected_pattern"] == "moderate"


def test_temporal_profile_counts():
    records = [TransactionRecord("p1", 5, 0, (("X", 1),), (("S", 1),)),
               TransactionRecord("s1", 8, 0, (("S", 1),), (("Y", 1),)),
               TransactionRecord("s2", 8, 0, (("Y", 1),), (("Z", 1),)),
               TransactionRecord("s3", 12, 0, (("Z", 1),), (("W", 1),))]
    index = ingest(records)
    graph = build_n_step(index, ["S"], 3)
    profile = temporal_profile(graph, index, ["S"], "Demo")
    assert profile.seed_txids == ["p1"]
    assert profile.anchor_height == 5
    assert (profile.pre_count, profile.at_count, profile.post_count) == (0, 1, 3)
    assert profile.span == (5, 12)
    assert profile.block_span == 7
    assert profile.post_share == pytest.approx(0.75)
    assert list(profile.tx_heights) == [5, 8, 8, 12]


def test_temporal_profile_earliest_seed_anchor():
    records = [TransactionRecord("a", 20, 0, (), (("S1", 1),)),
               TransactionRecord("b", 10, 0, (), (("S2", 1),)),
               TransactionRecord("c", 15, 0, (("S1", 1), ("S2", 1)), (("Q", 1),))]
    index = ingest(records)
    graph = build_n_step(index, ["S1", "S2"], 1)
    profile = temporal_profile(graph, index, ["S1", "S2"])
    assert profile.seed_tx_heights == [15, 10]
    assert (profile.pre_count, profile.at_count, profile.post_count) == (0, 1, 2)


def test_temporal_profile_unanchored():
    index = ingest([TransactionRecord("a", 1, 0, (), (("A", 1),))])
    graph = build_n_step(index, ["ghost"], 2)
    profile = temporal_profile(graph, index, ["ghost"], "Ghost")
    assert not profile.anchored
    assert profile.pre_count is None and profile.post_share is None
    assert profile.span is None and profile.block_span == 0


def test_manifest_temporal_counts():
    campaign = standard_campaign("Alpha", num_seeds=3, motifs_per_kind=2, filler_tx_count=40, rng_seed=4)
    records, seeds, manifest = generate_records([campaign])
    index = ingest(records)
    graph = build_n_step(index, campaign.seeds, 2)
    profile = temporal_profile(graph, index, list(campaign.seeds), "Alpha")
    expected = manifest["families"]["Alpha"]
    assert profile.pre_count == expected["expected_pre_count"]
    assert profile.at_count == expected["expected_at_count"]
    assert profile.post_count == expected["expected_post_count"]


def test_pattern_shares():
    shares = pattern_shares({"a": SpreadingPattern.SLOW, "b": SpreadingPattern.SLOW, "c": SpreadingPattern.FAST,
                             "d": SpreadingPattern.EX_FAST})
    assert list(shares["pattern"]) == ["slow", "moderate", "fast", "exFast"]
    assert list(shares["num_families"]) == [2, 0, 1, 1]
    assert list(shares["share_pct"]) == [50.0, 0.0, 25.0, 25.0]
    assert shares["families"].iloc[0] == "a, b"


def test_temporal_profile_ignores_dump_order():
    campaign = standard_campaign("Alpha", num_seeds=3, motifs_per_kind=2, filler_tx_count=60, rng_seed=9)
    records, _, _ = generate_records([campaign])
    seeds = list(campaign.seeds)

    def counts(dump):
        index = ingest(dump)
        profile = temporal_profile(build_n_step(index, seeds, 2), index, seeds, "Alpha")
        return (profile.seed_txids, profile.anchor_height, profile.pre_count, profile.at_count, profile.post_count,
                list(profile.tx_heights))

    expected = counts(records)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert counts([records[i] for i in rng.permutation(len(records))]) == expected
