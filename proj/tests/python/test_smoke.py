import json

import numpy as np
import pytest

import causalmech as cm


def test_kci_detects_dependence():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(200, 1))
    assert cm.kci_test(x, x)["p_value"] < 1e-3
    y = rng.normal(size=(200, 1))
    r = cm.kci_test(x, y)
    assert 0.0 <= r["p_value"] <= 1.0


def test_gram_is_symmetric_with_unit_diagonal():
    x = np.random.default_rng(1).normal(size=(20, 2))
    k = cm.gram_gaussian(x)
    assert np.allclose(k, k.T)
    assert np.allclose(np.diag(k), 1.0)


def test_decompose_two_root_graph():
    edges = [("V1", "V3"), ("V1", "V4"), ("V1", "V5"), ("V2", "V4"), ("V2", "V5"),
             ("V2", "V6"), ("V3", "V6"), ("V5", "V6")]
    graph = {"nodes": [f"V{i}" for i in range(1, 7)], "root": None,
             "edges": [{"from": a, "to": b, "directed": True} for a, b in edges]}
    tasks = cm.decompose(json.dumps(graph))
    assert sorted((tuple(i), tuple(o)) for i, o in tasks) == sorted([
        (("V2", "V3", "V5"), ("V6",)), (("V1", "V2"), ("V4", "V5")), (("V1",), ("V3",))])
    assert tasks[-1][1] == ["V6"]


def test_cycle_is_a_data_error():
    graph = {"nodes": ["A", "B"], "root": None,
             "edges": [{"from": "A", "to": "B"}, {"from": "B", "to": "A"}]}
    with pytest.raises(cm.DataError):
        cm.decompose(json.dumps(graph))


def test_simulated_chain_is_recovered():
    dag = cm.random_dag(3, 1.0, 4)
    series = cm.simulate(dag, seed=2, length=300, noise=0.2)
    assert set(series) == {"U", "V1", "V2"}
    graph, _ = cm.discover(series, "U", seed=1)
    assert cm.structural_hamming_distance(graph, dag) <= 1


def test_ecdf_and_interval():
    errors, F = cm.ecdf([0.1, 0.2, 0.3])
    assert F[1] == pytest.approx(2 / 3, abs=0)
    assert F[-1] == 1.0
    samples = [np.full((5, 1), float(b)) for b in range(200)]
    lower, mean, upper = cm.interval(samples, 0.95)
    assert np.all(lower <= mean) and np.all(mean <= upper)


def test_gradient_check_small():
    assert cm.gradient_check(seed=3) < 1e-4


def test_micromech_triangle():
    m = cm.graph_metrics(3, np.array([[0, 1], [1, 2], [0, 2]]))
    assert m["density"] == 1.0 and m["clique_number"] == 3
    assert m["coordination_number"] == 2.0
    n = np.random.default_rng(5).normal(size=(30, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    F = cm.fabric_tensor(n)
    assert np.trace(F) == pytest.approx(1.0, abs=1e-12)
    q1, q2, q3 = cm.principal_stress_diffs(np.diag([3.0, 2.0, 0.5]))
    assert (q1, q2, q3) == pytest.approx((1.0, 2.5, 1.5))
