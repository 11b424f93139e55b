import networkx as nx
import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from gvcspatial.core.errors import ConstructionError, DegenerateWeightsError, UsageError, WeightsValidationError
from gvcspatial.weights.flows import FlowRecord, build_weights, load_flows
from gvcspatial.weights.graph import export_graph, to_graph
from gvcspatial.weights.matrix import (
    WeightMatrix,
    is_row_standardized,
    isolated_report,
    lag_columns,
    load_weights,
    proximity_path,
    row_standardize,
    save_weights,
)


def test_three_country_flows(three_country_flows):
    w = build_weights(load_flows(three_country_flows), ["A", "B", "C"])
    assert_allclose(w.W, [[0.0, 0.75, 0.25], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    assert_allclose(w.S, [[0.0, 6.0, 2.0], [6.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    assert w.symmetric_base
    assert w.isolated == ()


def test_rows_sum_to_one_and_diagonal_zero():
    rng = np.random.default_rng(0)
    labels = [f"K{i}" for i in range(8)]
    flows = [
        FlowRecord(origin=a, dest=b, year=2000 + y, value=float(rng.uniform(0, 5)))
        for a in labels for b in labels for y in range(3) if a != b
    ]
    w = build_weights(flows, labels)
    assert_allclose(w.W.sum(axis=1), 1.0)
    assert np.all(np.diag(w.W) == 0)
    assert_allclose(w.S, w.S.T)


def test_isolated_country_keeps_zero_row(three_country_flows):
    w = build_weights(load_flows(three_country_flows), ["A", "B", "C", "D"])
    assert w.isolated == ("D",)
    assert_allclose(w.W[3], 0.0)
    assert isolated_report(w) == ["country 'D' has no trade neighbours (zero row)"]


def test_period_and_duplicates():
    flows = [
        FlowRecord("A", "B", 2000, 1.0),
        FlowRecord("A", "B", 2000, 1.0),
        FlowRecord("A", "C", 2001, 3.0),
        FlowRecord("B", "C", 2005, 10.0),
    ]
    w = build_weights(flows, ["A", "B", "C"], period=(2000, 2001))
    assert_allclose(w.S[0], [0.0, 2.0, 3.0])
    assert w.S[1, 2] == 0.0
    with pytest.raises(ConstructionError, match="period"):
        build_weights(flows, ["A", "B", "C"], period=(1990, 1991))


def test_construction_errors():
    with pytest.raises(ConstructionError, match="no flow records"):
        build_weights([], ["A", "B"])
    with pytest.raises(ConstructionError, match="non-negative"):
        build_weights([FlowRecord("A", "B", 2000, -1.0)], ["A", "B"])
    with pytest.raises(ConstructionError, match="unknown countries"):
        build_weights([FlowRecord("A", "Z", 2000, 1.0), FlowRecord("A", "B", 2000, 1.0)], ["A", "B"],
                      strict_labels=True)
    with pytest.raises(UsageError):
        build_weights([FlowRecord("A", "B", 2000, 1.0)], ["A", "A"])


def test_empty_flow_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("origin,dest,year,value\n", encoding="utf-8")
    assert load_flows(path) == []


def test_row_standardize_helpers():
    S = np.array([[0.0, 2.0, 2.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    W = row_standardize(S)
    assert_allclose(W, [[0.0, 0.5, 0.5], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert is_row_standardized(W)
    assert not is_row_standardized(S)


def test_weight_matrix_validation():
    with pytest.raises(WeightsValidationError, match="diagonal"):
        WeightMatrix(labels=("A", "B"), W=np.eye(2), S=np.eye(2))
    with pytest.raises(WeightsValidationError, match="unique"):
        WeightMatrix.from_proximity(["A", "A"], np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_admissible_interval_and_log_det(paired_weights, ring_weights):
    lo, hi = paired_weights.admissible_interval
    assert lo == pytest.approx(-1.0)
    assert hi == pytest.approx(1.0)
    for value in (-0.6, 0.0, 0.3, 0.9):
        sign, logdet = np.linalg.slogdet(np.eye(ring_weights.n) - value * ring_weights.W)
        assert sign > 0
        assert ring_weights.log_det(value) == pytest.approx(logdet, abs=1e-10)
    assert ring_weights.is_admissible(0.99)
    assert not ring_weights.is_admissible(1.0)


def test_degenerate_weights():
    w = WeightMatrix(labels=("A", "B"), W=np.zeros((2, 2)), S=np.zeros((2, 2)))
    with pytest.raises(DegenerateWeightsError):
        w.admissible_interval


def test_save_load_and_align(tmp_path, three_country_flows):
    w = build_weights(load_flows(three_country_flows), ["A", "B", "C"])
    loaded = load_weights(save_weights(w, tmp_path / "w.csv"))
    assert loaded.labels == w.labels
    assert_allclose(loaded.W, w.W, rtol=0, atol=1e-15)

    aligned = w.align(["C", "A", "B"])
    assert aligned.labels == ("C", "A", "B")
    assert_allclose(aligned.W[1], [0.25, 0.0, 0.75])
    with pytest.raises(UsageError, match="missing"):
        w.align(["A", "B", "D"])


def test_load_raw_proximity_file(tmp_path):
    frame = pd.DataFrame([[0, 3, 1], [3, 0, 0], [1, 0, 0]], index=list("XYZ"), columns=list("XYZ"))
    path = tmp_path / "s.csv"
    frame.to_csv(path)
    w = load_weights(path)
    assert w.symmetric_base
    assert_allclose(w.W[0], [0.0, 0.75, 0.25])

    frame.iloc[0, 1] = 5
    frame.to_csv(path)
    with pytest.raises(WeightsValidationError, match="asymmetric"):
        load_weights(path)


def test_lag_columns_period_major(ring_weights):
    n, T = ring_weights.n, 3
    rng = np.random.default_rng(1)
    X = rng.normal(size=(n * T, 2))
    lagged = lag_columns(ring_weights, X, n)
    for t in range(T):
        block = slice(t * n, (t + 1) * n)
        assert_allclose(lagged[block], ring_weights.W @ X[block])
    assert_allclose(lag_columns(ring_weights, X[:, 0], n), lagged[:, 0])


def test_graph_export_round_trip(tmp_path, three_country_flows):
    w = build_weights(load_flows(three_country_flows), ["A", "B", "C"])
    graph = to_graph(w)
    assert set(graph.edges()) == {("A", "B"), ("A", "C")}
    assert graph.nodes["A"]["weighted_degree"] == pytest.approx(8.0)

    path = export_graph(w, tmp_path / "w.graphml")
    read = nx.read_graphml(path)
    assert read["A"]["B"]["weight"] == pytest.approx(6.0)
    gml = export_graph(w, tmp_path / "w.gml")
    assert nx.read_gml(gml).number_of_edges() == 2


def test_graph_survives_save_and_load(tmp_path, three_country_flows):
    w = build_weights(load_flows(three_country_flows), ["A", "B", "C"])
    path = save_weights(w, tmp_path / "w.csv")
    assert proximity_path(path).is_file()
    loaded = load_weights(path)
    assert loaded.has_base
    assert_allclose(loaded.S, w.S)
    graph = to_graph(loaded)
    assert graph["A"]["B"]["weight"] == pytest.approx(6.0)
    assert graph["A"]["C"]["weight"] == pytest.approx(2.0)
    assert graph.nodes["A"]["weighted_degree"] == pytest.approx(8.0)


def test_standardised_file_without_base(tmp_path, three_country_flows):
    w = build_weights(load_flows(three_country_flows), ["A", "B", "C"])
    path = save_weights(w, tmp_path / "w.csv")
    proximity_path(path).unlink()
    loaded = load_weights(path)
    assert not loaded.has_base
    assert_allclose(loaded.W, w.W)
    assert not loaded.align(["C", "B", "A"]).has_base
    with pytest.raises(UsageError, match="proximity base"):
        to_graph(loaded)


def test_mismatched_proximity_file(tmp_path, three_country_flows):
    w = build_weights(load_flows(three_country_flows), ["A", "B", "C"])
    path = save_weights(w, tmp_path / "w.csv")
    other = pd.DataFrame([[0, 1, 1], [1, 0, 0], [1, 0, 0]], index=list("ABC"), columns=list("ABC"))
    other.to_csv(proximity_path(path))
    with pytest.raises(WeightsValidationError, match="standardise"):
        load_weights(path)


@pytest.mark.parametrize("scale", [1e-6, 0.5, 3.0, 1e9])
def test_weights_ignore_the_scale_of_flows(ring_weights, scale):
    scaled = WeightMatrix.from_proximity(ring_weights.labels, scale * ring_weights.S)
    assert_allclose(scaled.W, ring_weights.W, rtol=1e-12, atol=0)
    assert_allclose(scaled.eigenvalues, ring_weights.eigenvalues, atol=1e-12)


def test_weights_follow_a_relabelling():
    rng = np.random.default_rng(7)
    n = 15
    S = np.triu(rng.uniform(0, 1, size=(n, n)) * (rng.uniform(size=(n, n)) < 0.4), 1)
    S = S + S.T
    labels = [f"K{i:02d}" for i in range(n)]
    w = WeightMatrix.from_proximity(labels, S)
    order = rng.permutation(n)
    moved = w.align([labels[i] for i in order])
    assert_allclose(moved.W, w.W[np.ix_(order, order)])
    assert_allclose(moved.eigenvalues, w.eigenvalues, atol=1e-12)
    assert moved.admissible_interval == pytest.approx(w.admissible_interval)
    assert moved.log_det(0.4) == pytest.approx(w.log_det(0.4), abs=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_eigenvalues_are_real(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 51))
    S = np.triu(rng.uniform(0, 1, size=(n, n)), 1)
    w = WeightMatrix.from_proximity([f"c{i}" for i in range(n)], S + S.T)
    general = np.linalg.eigvals(w.W)
    assert np.max(np.abs(general.imag)) < 1e-10
    assert w.eigenvalues.dtype.kind == "f"
    assert_allclose(np.sort(general.real), w.eigenvalues, atol=1e-10)


def test_log_det_matches_slogdet_at_random_rho():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        n = int(rng.integers(3, 51))
        S = np.triu(rng.uniform(0, 1, size=(n, n)) * (rng.uniform(size=(n, n)) < 0.5), 1)
        S[np.arange(n - 1), np.arange(1, n)] += 1.0
        w = WeightMatrix.from_proximity([f"c{i}" for i in range(n)], S + S.T)
        lo, hi = w.admissible_interval
        rho = float(rng.uniform(0.99 * lo, 0.99 * hi))
        sign, logdet = np.linalg.slogdet(np.eye(n) - rho * w.W)
        assert sign > 0
        assert w.log_det(rho) == pytest.approx(logdet, abs=1e-8)
