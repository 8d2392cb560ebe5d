import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netdyn.graph import Graph, generate_er
from netdyn.model import (CnvmParams, ErFamily, SbmFamily, SystemState,
                          collective_variable, neighbor_opinion_count,
                          node_rate, params_from_dict, params_to_dict,
                          propensity_exact, propensity_reduced,
                          propensity_table_exact, state_index)

FIG2A = CnvmParams([[0.0, 0.99], [1.0, 0.0]], [[0.0, 0.01], [0.01, 0.0]])


def complete_graph(n):
    return Graph.from_edges(n, [(i, j) for i in range(n)
                                for j in range(i + 1, n)])


def test_params_validation():
    with pytest.raises(ValueError):
        CnvmParams([[0.0, -1.0], [1.0, 0.0]], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        CnvmParams([[0.0, np.inf], [1.0, 0.0]], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        CnvmParams(np.zeros((1, 1)), np.zeros((1, 1)))  # M < 2
    # diagonal entries are ignored, whatever the caller wrote there
    p = CnvmParams([[7.0, 1.0], [1.0, -3.0]], np.zeros((2, 2)))
    assert p.r[0, 0, 0] == 0.0 and p.r[0, 1, 1] == 0.0
    assert p.rate_bound == 1.0


def test_params_class_broadcast():
    p = CnvmParams([[0.0, 1.0], [2.0, 0.0]], np.zeros((2, 2)), num_classes=3)
    assert p.k == 3 and p.m == 2
    assert np.all(p.r[:, 1, 0] == 2.0)


def test_params_rate_bound():
    assert FIG2A.rate_bound == pytest.approx(1.01)


def test_collective_variable_half_half():
    state = SystemState([0, 0, 1, 1], [0, 0, 0, 0])
    cs = collective_variable(state, FIG2A)
    assert cs.counts.tolist() == [2, 2]
    assert cs.counts.sum() == 4  # integer counts sum exactly to n
    assert cs.shares.tolist() == [0.5, 0.5]


def test_collective_variable_two_classes():
    params = CnvmParams([[0.0, 1.0], [1.0, 0.0]], np.zeros((2, 2)),
                        num_classes=2)
    state = SystemState([0, 1, 0, 1], [0, 0, 1, 1])
    cs = collective_variable(state, params)
    assert cs.shares.tolist() == [0.25, 0.25, 0.25, 0.25]
    # m-major flattening: index of (m, k) is m*K + k
    assert state_index(1, 0, 2) == 2


def test_collective_variable_consensus():
    state = SystemState([1] * 6, [0] * 6)
    cs = collective_variable(state, FIG2A)
    assert cs.shares.tolist() == [0.0, 1.0]


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 50), seed=st.integers(0, 2**32 - 1))
def test_collective_counts_sum_exactly(n, seed):
    rng = np.random.default_rng(seed)
    state = SystemState(rng.integers(0, 2, n), np.zeros(n, dtype=np.int64))
    assert collective_variable(state, FIG2A).counts.sum() == n


def test_neighbor_opinion_count_path():
    # path 0-1-2-3 with opinions (0,1,1,0): node 1 has one 0-neighbor
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    state = SystemState([0, 1, 1, 0], [0] * 4)
    assert neighbor_opinion_count(g, state, 1, 0) == 1
    assert neighbor_opinion_count(g, state, 1, 1) == 1
    assert neighbor_opinion_count(g, state, 0, 1) == 1


def test_neighbor_opinion_count_complete_and_isolated():
    g = complete_graph(5)
    state = SystemState([0, 1, 1, 1, 1], [0] * 5)
    assert neighbor_opinion_count(g, state, 0, 1) == 4
    empty = Graph.from_edges(3, np.empty((0, 2), dtype=np.int64))
    st3 = SystemState([0, 1, 1], [0] * 3)
    assert neighbor_opinion_count(empty, st3, 0, 1) == 0


def test_node_rate_path_example():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    state = SystemState([0, 1, 1, 0], [0] * 4)
    assert node_rate(g, state, FIG2A, 0, 1) == pytest.approx(1.0)


def test_node_rate_all_neighbors_target():
    g = complete_graph(4)
    state = SystemState([0, 1, 1, 1], [0] * 4)
    assert node_rate(g, state, FIG2A, 0, 1) == pytest.approx(0.99 + 0.01)


def test_node_rate_isolated_noise_only():
    g = Graph.from_edges(2, np.empty((0, 2), dtype=np.int64))
    state = SystemState([0, 0], [0, 0])
    assert node_rate(g, state, FIG2A, 0, 1) == pytest.approx(0.01)


def test_node_rate_rejects_same_opinion():
    g = complete_graph(3)
    state = SystemState([0, 1, 1], [0] * 3)
    with pytest.raises(ValueError):
        node_rate(g, state, FIG2A, 0, 0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_node_rate_bounded_by_b(seed):
    rng = np.random.default_rng(seed)
    g = generate_er(20, 0.3, rng.integers(2 ** 32))
    state = SystemState(rng.integers(0, 3, 20), np.zeros(20, dtype=np.int64))
    params = CnvmParams(rng.uniform(0, 2, (3, 3)), rng.uniform(0, 1, (3, 3)))
    i = int(rng.integers(0, 20))
    targets = [n for n in range(3) if n != state.x[i]]
    for n in targets:
        rate = node_rate(g, state, params, i, n)
        assert 0.0 <= rate <= params.rate_bound


def test_propensity_consensus_noise_only():
    g = complete_graph(6)
    state = SystemState([0] * 6, [0] * 6)
    assert propensity_exact(g, state, FIG2A, 0, 1) == pytest.approx(6 * 0.01)


def test_propensity_complete_graph_closed_form():
    n = 9
    g = complete_graph(n)
    state = SystemState([0] * 4 + [1] * 5, [0] * n)
    cm, cn = 4 / n, 5 / n
    want = cm * n * (0.99 * cn * n / (n - 1) + 0.01)
    assert propensity_exact(g, state, FIG2A, 0, 1) == pytest.approx(want, rel=1e-12)


def test_propensity_zero_rates():
    zero = CnvmParams(np.zeros((2, 2)), np.zeros((2, 2)))
    g = complete_graph(4)
    state = SystemState([0, 0, 1, 1], [0] * 4)
    assert propensity_exact(g, state, zero, 0, 1) == 0.0
    assert propensity_exact(g, state, zero, 1, 0) == 0.0


def test_propensity_rejects_diagonal():
    g = complete_graph(3)
    state = SystemState([0, 1, 1], [0] * 3)
    with pytest.raises(ValueError):
        propensity_exact(g, state, FIG2A, 1, 1)


def test_propensity_matches_per_node_brute_force():
    # independent transcription: loop the definition node by node
    rng = np.random.default_rng(8)
    params = CnvmParams(rng.uniform(0, 1.5, (2, 3, 3)),
                        rng.uniform(0, 0.2, (2, 3, 3)))
    for trial in range(5):
        g = generate_er(20, 0.25, 100 + trial)
        state = SystemState(rng.integers(0, 3, 20), rng.integers(0, 2, 20))
        table = propensity_table_exact(g, state, params)
        for m in range(3):
            for k in range(2):
                for n in range(3):
                    if n == m:
                        continue
                    want = 0.0
                    for i in range(20):
                        if state.x[i] == m and state.s[i] == k:
                            want += node_rate(g, state, params, i, n)
                    assert table[k, m, n] == pytest.approx(want, rel=1e-12, abs=1e-15)


def test_propensity_reduced_er_example():
    params = CnvmParams([[0.0, 1.0], [1.0, 0.0]], [[0.0, 0.01], [0.01, 0.0]])
    got = propensity_reduced(np.array([0.5, 0.5]), params, None, 0, 1)
    assert got == pytest.approx(0.5 * (0.5 + 0.01))


def test_propensity_reduced_zero_share():
    got = propensity_reduced(np.array([0.0, 1.0]), FIG2A, ErFamily(p=0.1), 0, 1)
    assert got == 0.0


def test_propensity_reduced_sbm_example():
    fam = SbmFamily((0.5, 0.5), ((0.01, 0.0001), (0.0001, 0.01)))
    params = CnvmParams([[0.0, 1.0], [1.0, 0.0]], [[0.0, 0.01], [0.01, 0.0]],
                        num_classes=2)
    c = np.array([0.5, 0.0, 0.0, 0.5])
    got = propensity_reduced(c, params, fam, 0, 1, k=0)
    # pbar_1 = 0.00505; 0.5 * (0.5 * 0.0001 / 0.00505 + 0.01)
    assert got == pytest.approx(0.0099505, rel=1e-4)
    assert got == pytest.approx(0.5 * (0.5 * 0.0001 / 0.00505 + 0.01), rel=1e-12)


def test_propensity_reduced_sbm_rejects_dead_block():
    fam = SbmFamily((0.5, 0.5), ((0.01, 0.0), (0.0, 0.01)), scale=(
        (0.0, 0.0), (0.0, 1.0)))  # block 0 ends up with pbar = 0
    params = CnvmParams([[0.0, 1.0], [1.0, 0.0]], np.zeros((2, 2)),
                        num_classes=2)
    with pytest.raises(ValueError):
        propensity_reduced(np.full(4, 0.25), params, fam, 0, 1)


def test_reduced_matches_exact_gap_on_complete_graph():
    # on the complete graph the gap has the closed form r * c_m * c_n / (n-1)
    n = 12
    g = complete_graph(n)
    state = SystemState([0] * 5 + [1] * 7, [0] * n)
    cs = collective_variable(state, FIG2A)
    for (m, nn) in ((0, 1), (1, 0)):
        exact = propensity_exact(g, state, FIG2A, m, nn) / n
        reduced = propensity_reduced(cs.shares, FIG2A, None, m, nn)
        want = FIG2A.r[0, m, nn] * cs.shares[m] * cs.shares[nn] / (n - 1)
        assert abs(exact - reduced) == pytest.approx(want, rel=1e-12)


def test_params_json_round_trip(tmp_path):
    fam = SbmFamily((0.5, 0.5), ((0.01, 0.0001), (0.0001, 0.01)), scale=0.5)
    params = CnvmParams([[0.0, 1.0], [1.0, 0.0]], [[0.0, 0.01], [0.01, 0.0]],
                        num_classes=2)
    doc = params_to_dict(params, fam)
    assert doc["family"] == "sbm" and doc["M"] == 2 and doc["K"] == 2
    params2, fam2 = params_from_dict(doc)
    assert np.array_equal(params2.r, params.r)
    assert np.array_equal(params2.r_tilde, params.r_tilde)
    assert fam2 == fam

    from netdyn.model import load_params, save_params
    path = tmp_path / "params.json"
    save_params(path, params, fam)
    params3, fam3 = load_params(path)
    assert np.array_equal(params3.r, params.r)
    assert fam3 == fam


def test_state_validation():
    with pytest.raises(ValueError):
        SystemState([0, 1], [0])
    state = SystemState([0, 5], [0, 0])
    with pytest.raises(ValueError):
        state.check(FIG2A)
