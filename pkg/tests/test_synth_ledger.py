import json

import pytest

from strainscope.graph.graph_builder import build_n_step
from strainscope.ledger.check_tools import CampaignConflictError
from strainscope.ledger.ledger_store import ingest, load_ledger, load_seeds
from strainscope.ledger.synth_ledger import MOTIF_KINDS, CampaignSpec, MotifSpec, check_motif, generate, \
    generate_records, planted_labels, standard_campaign, write_fixture


def test_planted_labels_of_every_kind():
    expected = {"collector": ("Collector", "SA"), "exp": ("EXP", "HUB"), "mixed-address": ("MA", "HUB"),
                "branching": ("BRANCH", "Diversification"), "suspicious": (None, "SA"), "hub": (None, "HUB"),
                "diversification": (None, "Diversification"), "none": (None, None)}
    for kind in MOTIF_KINDS:
        motif = MotifSpec.planted(kind, "c0")
        check_motif(motif)
        assert planted_labels(motif) == expected[kind]


def test_check_motif_rejects_wrong_parameters():
    with pytest.raises(ValueError):
        check_motif(MotifSpec("collector", "c0", 1, 1, 1, 0, 1, 1))
    with pytest.raises(ValueError):
        check_motif(MotifSpec("hub", "c0", 0, 1, 1, 0, 1, 1))
    with pytest.raises(ValueError):
        MotifSpec.planted("mixer", "c0")


def test_generate_is_deterministic():
    campaigns = [standard_campaign("Alpha", filler_tx_count=30, rng_seed=7),
                 standard_campaign("Beta", filler_tx_count=30, rng_seed=8, base_height=2000)]
    assert generate(campaigns) == generate(campaigns)


def test_manifest_counts_match_graph():
    campaigns = [standard_campaign("Alpha", num_seeds=3, motifs_per_kind=2, reach_padding=40, filler_tx_count=50,
                                   rng_seed=1),
                 standard_campaign("Beta", rng_seed=2, base_height=3000)]
    records, seeds, manifest = generate_records(campaigns)
    index = ingest(records)
    for spec in campaigns:
        graph = build_n_step(index, spec.seeds, 2)
        expected = manifest["families"][spec.family]
        assert graph.num_addresses == expected["expected_distinct_addresses"]
        assert graph.num_transactions == expected["expected_tx_count"]
        assert expected["expected_pattern"] == "slow"
    assert len(manifest["addresses"]) == 3 * len(MOTIF_KINDS)
    assert {s.family for s in seeds} == {"Alpha", "Beta"}


def test_reach_padding_sets_pattern():
    _, _, manifest = generate_records([standard_campaign("Wide", motifs_per_kind=0, reach_padding=600)])
    family = manifest["families"]["Wide"]
    assert family["expected_distinct_addresses"] == 602
    assert family["expected_pattern"] == "moderate"


@pytest.mark.parametrize("padding, distinct, label", [(497, 499, "slow"), (498, 500, "moderate")])
def test_padding_on_the_slow_boundary(padding, distinct, label):
    campaign = standard_campaign("Edge", motifs_per_kind=0, reach_padding=padding)
    records, _, manifest = generate_records([campaign])
    family = manifest["families"]["Edge"]
    assert family["expected_distinct_addresses"] == distinct
    assert family["expected_pattern"] == label
    assert build_n_step(ingest(records), campaign.seeds, 2).num_addresses == distinct


def test_campaign_conflicts():
    motif = MotifSpec.planted("hub", "shared")
    with pytest.raises(CampaignConflictError):
        generate_records([CampaignSpec("A", ("sa",), (motif,)), CampaignSpec("B", ("sb",), (motif,))])
    with pytest.raises(CampaignConflictError):
        generate_records([standard_campaign("Same"), standard_campaign("Same")])
    with pytest.raises(ValueError):
        generate_records([CampaignSpec("A", (), (motif,))])


def test_write_fixture(tmp_path):
    paths = write_fixture(tmp_path, [standard_campaign("Alpha"), standard_campaign("Beta", base_height=1500)])
    index = load_ledger(paths["ledger"])
    seeds = load_seeds(paths["seeds"])
    truth = json.loads(paths["ground_truth"].read_text(encoding="utf-8"))
    assert len(seeds) == 4
    assert set(truth["families"]) == {"Alpha", "Beta"}
    assert all(addr in index.addr_pos for addr in truth["addresses"])
