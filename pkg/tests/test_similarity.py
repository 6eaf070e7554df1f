import math

import numpy as np
import pytest

from strainscope.graph.behaviors import classify_graph
from strainscope.graph.graph_builder import build_n_step
from strainscope.ledger.ledger_store import TransactionRecord, ingest
from strainscope.ledger.synth_ledger import generate_records, standard_campaign
from strainscope.similarity.family_similarity import FamilySimilarity
from strainscope.similarity.tools_similarity import COMPONENTS, DistanceMatrix, EmptyGraphError, FamilyProfile, \
    cluster, cluster_table, close_families, distance, distance_matrix, pca_2d, profile


def random_profiles(rng, n, prefix="f"):
    return [FamilyProfile(prefix + str(i).zfill(3), tuple(float(v) for v in rng.uniform(0, 100, size=7)), 10)
            for i in range(n)]


@pytest.fixture
def table_matrix():
    d = np.array([[0.0, 76.12, 3.0, 40.0],
                  [76.12, 0.0, 75.0, 50.0],
                  [3.0, 75.0, 0.0, 38.0],
                  [40.0, 50.0, 38.0, 0.0]])
    return DistanceMatrix(("a", "b", "c", "d"), d, 76.12)


def test_profile_percent_scale():
    records = [TransactionRecord("t1", 1, 0, (("S", 1), ("X1", 1), ("X2", 1), ("X3", 1)), (("C", 1),)),
               TransactionRecord("t2", 2, 0, (("Y", 1),), (("S", 1),))]
    graph = build_n_step(ingest(records), ["S"], 1)
    result = profile("Demo", classify_graph(graph), graph)
    assert result.denominator == 6
    values = dict(zip(COMPONENTS, result.p))
    assert values["Collector"] == pytest.approx(100 / 6)
    assert values["SA"] == pytest.approx(100 / 6)
    assert values["HUB"] == pytest.approx(100 / 6)
    assert values["Diversification"] == 0.0


def test_profile_errors():
    index = ingest([TransactionRecord("t1", 1, 0, (), (("A", 1),))])
    empty = build_n_step(index, [], 2)
    with pytest.raises(EmptyGraphError):
        profile("Empty", {}, empty)
    graph = build_n_step(index, ["A"], 2)
    with pytest.raises(ValueError):
        profile("Partial", {}, graph)


def test_distance_against_arithmetic():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        p, q = random_profiles(rng, 2)
        expected = math.sqrt(math.fsum((b - a) ** 2 for a, b in zip(p.p, q.p)))
        assert distance(p, q) == pytest.approx(expected, rel=1e-12)


def test_metric_properties():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        p, q, r = random_profiles(rng, 3)
        assert distance(p, q) == pytest.approx(distance(q, p), abs=1e-9)
        assert distance(p, p) == 0.0
        assert distance(p, r) <= distance(p, q) + distance(q, r) + 1e-9


def test_distance_matrix():
    rng = np.random.default_rng(2)
    profiles = random_profiles(rng, 5)
    matrix = distance_matrix(profiles)
    assert np.allclose(matrix.d, matrix.d.T)
    assert np.all(np.diag(matrix.d) == 0)
    assert matrix.d[1, 3] == pytest.approx(distance(profiles[1], profiles[3]))
    assert matrix.d_max == pytest.approx(matrix.d.max())
    assert list(matrix.to_frame().columns) == list(matrix.families)
    with pytest.raises(ValueError):
        distance_matrix(profiles[:1])


def test_lambda_from_d_max(table_matrix):
    expected = {1: 0.7612, 2: 1.5224, 3: 2.2836, 4: 3.0448, 5: 3.806, 10: 7.612}
    for lambda_pct, lam in expected.items():
        report = cluster(table_matrix, lambda_pct)
        assert report.lambda_ == pytest.approx(lam, abs=1e-9)
    report = cluster(table_matrix, 5).to_json()
    assert report["lambda"] == 3.806
    assert report["clusters"] == [["a", "c"]]
    assert report["isolated"] == ["b", "d"]
    assert report["stats"]["clustered_strains"] == 2


def test_cluster_is_transitive(table_matrix):
    report = cluster(table_matrix, 70)
    assert report.clusters == [["a", "b", "c", "d"]]
    assert report.isolated == []
    assert report.stats["clusters_max_population"] == 4
    with pytest.raises(ValueError):
        cluster(table_matrix, 0)
    with pytest.raises(ValueError):
        cluster(table_matrix, 101)


def test_lambda_monotonicity():
    rng = np.random.default_rng(3)
    lambda_pcts = (1, 2, 3, 4, 5, 10, 20, 40, 80, 100)
    for _ in range(100):
        matrix = distance_matrix(random_profiles(rng, int(rng.integers(2, 25))))
        table = cluster_table(matrix, lambda_pcts)
        assert np.all(np.diff(table["clustered_strains"].values) >= 0)
        assert np.all(np.diff(table["isolated_strains"].values) <= 0)
        assert np.all(table["clustered_strains"] + table["isolated_strains"] == len(matrix.families))


def test_close_families(table_matrix):
    close, distant = close_families(table_matrix, "a", 40.0)
    assert close == ["c", "d"]
    assert distant == ["b"]


def test_pca_rank_one():
    base = np.linspace(0, 10, 7)
    direction = np.array([1.0, 2.0, 0.0, -1.0, 0.5, 0.0, 3.0])
    profiles = [FamilyProfile("f" + str(i), tuple(base + t * direction), 10) for i, t in enumerate((0, 1, 2.5, 4))]
    projection = pca_2d(profiles)
    assert projection.explained_variance[1] < 1e-9
    assert projection.explained_variance[0] > 0


def test_pca_contraction_and_sign():
    rng = np.random.default_rng(4)
    for _ in range(100):
        profiles = random_profiles(rng, int(rng.integers(3, 15)))
        projection = pca_2d(profiles)
        original = distance_matrix(profiles).d
        coords = projection.coords
        projected = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2))
        assert np.all(projected <= original + 1e-9)
        pivots = np.argmax(np.abs(projection.components), axis=1)
        assert np.all(projection.components[np.arange(2), pivots] > 0)
        assert projection.explained_variance[0] >= projection.explained_variance[1]
        again = pca_2d(profiles)
        assert np.array_equal(again.coords, projection.coords)
    with pytest.raises(ValueError):
        pca_2d(random_profiles(rng, 2))


def test_family_similarity():
    rng = np.random.default_rng(5)
    profiles = random_profiles(rng, 6)
    model = FamilySimilarity(lambda_pcts=(10, 50))
    with pytest.raises(ValueError):
        model.cluster(5)
    model.fit(list(reversed(profiles)))
    assert [p.family for p in model.profiles_] == sorted(p.family for p in profiles)
    assert model.pca_ is not None
    assert len(model.cluster_reports()) == 2
    assert list(model.cluster_table()["lambda_pct"]) == [10, 50]
    close, distant = model.close_families("f000", 50)
    assert sorted(close + distant) == [p.family for p in profiles[1:]]
    pair = FamilySimilarity().fit(profiles[:2])
    assert pair.pca_ is None
    with pytest.raises(ValueError):
        FamilySimilarity().fit([profiles[0], profiles[0]])
    with pytest.raises(ValueError):
        FamilySimilarity(lambda_pcts=(0,))


def test_full_threshold_joins_every_family():
    rng = np.random.default_rng(6)
    for _ in range(2000):
        matrix = distance_matrix(random_profiles(rng, 2))
        report = cluster(matrix, 100)
        assert report.isolated == []
        assert report.clusters == [["f000", "f001"]]
    for _ in range(200):
        profiles = random_profiles(rng, int(rng.integers(3, 12)))
        assert cluster(distance_matrix(profiles), 100).clusters == [[p.family for p in profiles]]
        model = FamilySimilarity().fit(profiles)
        close, distant = model.close_families("f000", 100)
        assert distant == [] and len(close) == len(profiles) - 1


def test_cluster_report_lambda_pct_is_float(table_matrix):
    assert isinstance(cluster(table_matrix, 5).to_json()["lambda_pct"], float)
    assert cluster_table(table_matrix, (1, 10))["lambda_pct"].dtype == np.float64


def test_collinear_distances_add_up():
    rng = np.random.default_rng(7)
    for _ in range(200):
        start = rng.uniform(0, 50, size=7)
        direction = rng.uniform(-1, 1, size=7)
        s, t = rng.uniform(0.1, 5, size=2)
        points = [start, start + s * direction, start + (s + t) * direction]
        a, b, c = [FamilyProfile(name, tuple(float(v) for v in x), 10) for name, x in zip("abc", points)]
        d = distance_matrix([a, b, c]).d
        assert d[0, 2] == pytest.approx(d[0, 1] + d[1, 2], rel=1e-9)


def test_triangle_inequality_exhaustive():
    d = distance_matrix(random_profiles(np.random.default_rng(8), 65)).d
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-9)


def test_pca_symmetric_profiles_give_opposite_coords():
    rng = np.random.default_rng(9)
    for _ in range(50):
        center = rng.uniform(30, 70, size=7)
        offsets = rng.uniform(-20, 20, size=(3, 7))
        profiles = []
        for k, offset in enumerate(offsets):
            profiles.append(FamilyProfile("p" + str(k), tuple(center + offset), 10))
            profiles.append(FamilyProfile("m" + str(k), tuple(center - offset), 10))
        coords = pca_2d(profiles).coords
        for k in range(3):
            assert np.allclose(coords[2 * k], -coords[2 * k + 1], atol=1e-8)


def test_pca_variance_bounded_by_total():
    rng = np.random.default_rng(10)
    for _ in range(100):
        profiles = random_profiles(rng, int(rng.integers(3, 15)))
        x = np.vstack([p.as_array() for p in profiles])
        total = float(np.var(x, axis=0, ddof=1).sum())
        assert float(pca_2d(profiles).explained_variance.sum()) <= total + 1e-9


def test_pca_single_varying_coordinate():
    values = (5.0, 12.0, 20.0, 41.0)
    profiles = []
    for i, v in enumerate(values):
        p = [10.0, 20.0, 0.0, 5.0, 0.0, 30.0, 1.0]
        p[3] = v
        profiles.append(FamilyProfile("f" + str(i), tuple(p), 10))
    projection = pca_2d(profiles)
    axis = np.zeros(7)
    axis[3] = 1.0
    assert np.allclose(projection.components[0], axis, atol=1e-9)
    assert np.allclose(projection.coords[:, 0], np.array(values) - np.mean(values), atol=1e-9)
    assert projection.explained_variance[0] == pytest.approx(np.var(values, ddof=1))
    assert projection.explained_variance[1] < 1e-9


def test_profile_ignores_txid_labels():
    campaign = standard_campaign("Alpha", num_seeds=3, motifs_per_kind=2, filler_tx_count=40, rng_seed=3)
    records, _, _ = generate_records([campaign])
    relabelled = [TransactionRecord("r" + str(len(records) - i).zfill(6), r.block_height, r.timestamp, r.inputs,
                                    r.outputs) for i, r in enumerate(records)]
    results = []
    for dump in (records, relabelled):
        graph = build_n_step(ingest(dump), campaign.seeds, 2)
        results.append(profile("Alpha", classify_graph(graph), graph))
    assert results[0] == results[1]
