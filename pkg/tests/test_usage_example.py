from strainscope.ledger.synth_ledger import generate_records, standard_campaign
from strainscope.ledger.ledger_store import ingest, group_seeds
from strainscope.graph.graph_builder import build_n_step
from strainscope.graph.spread import classify_spreading
from strainscope.graph.behaviors import classify_graph, behavior_counts
from strainscope.pipeline import run_families
from strainscope.similarity.family_similarity import FamilySimilarity


def test_first_example():
    records, seeds, truth = generate_records([standard_campaign("Locky", num_seeds=2, reach_padding=600)])
    index = ingest(records)
    graph = build_n_step(index, [s.address for s in seeds], 2)
    pattern = classify_spreading(graph)
    counts = behavior_counts(classify_graph(graph, scope="ledger"))
    assert pattern.label == truth["families"]["Locky"]["expected_pattern"]
    assert sum(counts.values()) >= graph.num_addresses


def test_second_example():
    campaigns = [standard_campaign(name, reach_padding=pad, base_height=1000 + pad)
                 for name, pad in (("Cerber", 0), ("Locky", 40), ("WannaCry", 90))]
    records, seeds, truth = generate_records(campaigns)
    results = run_families(ingest(records), group_seeds(seeds))
    model = FamilySimilarity(lambda_pcts=(5, 10, 50))
    model.fit([r.profile for r in results])
    table = model.cluster_table()
    close, distant = model.close_families("Locky", 10)
    assert len(table) == 3
    assert sorted(close + distant) == ["Cerber", "WannaCry"]
