import io

import numpy as np
import pytest

from netdyn.graph import generate_er
from netdyn.model import CnvmParams, ErFamily
from netdyn.sim import (InitSpec, ensemble, ensemble_to_csv, gillespie_run,
                        init_state, make_time_grid, substream,
                        trajectory_to_csv)

FIG2A = CnvmParams([[0.0, 0.99], [1.0, 0.0]], [[0.0, 0.01], [0.01, 0.0]])


def test_make_time_grid():
    grid = make_time_grid(5.0, 0.5)
    assert grid.size == 11 and grid[0] == 0.0 and grid[-1] == 5.0
    with pytest.raises(ValueError):
        make_time_grid(1.0, 0.3)


def test_init_state_largest_remainder():
    classes = np.zeros(10, dtype=np.int64)
    state = init_state(InitSpec(shares=(0.2, 0.8)), 10, classes, FIG2A)
    assert np.count_nonzero(state.x == 0) == 2
    assert np.count_nonzero(state.x == 1) == 8
    # first nodes get the lowest opinion
    assert state.x[:2].tolist() == [0, 0]


def test_init_state_consensus():
    classes = np.zeros(7, dtype=np.int64)
    state = init_state(InitSpec(shares=(0.0, 1.0)), 7, classes, FIG2A)
    assert np.all(state.x == 1)


def test_init_state_counts_sum_and_error_bound():
    rng = np.random.default_rng(3)
    params = CnvmParams(np.zeros((3, 3)), np.zeros((3, 3)), num_classes=2)
    classes = np.repeat([0, 1], [30, 23])
    n = 53
    for _ in range(20):
        raw = rng.dirichlet(np.ones(3))
        shares = np.concatenate([raw * 30 / n, np.roll(raw, 1) * 23 / n])
        shares = shares.reshape(3, 2, order="F").reshape(-1)  # m-major
        state = init_state(InitSpec(shares=tuple(shares)), n, classes, params)
        assert state.x.size == n
        from netdyn.model import collective_variable
        realized = collective_variable(state, params).shares
        assert np.abs(realized - shares).max() <= 3 * 2 / n


def test_init_state_per_class_layout():
    params = CnvmParams([[0.0, 1.0], [1.0, 0.0]], np.zeros((2, 2)),
                        num_classes=2)
    classes = np.repeat([0, 1], 5)
    state = init_state(InitSpec(shares=(0.5, 0.0, 0.0, 0.5)), 10, classes,
                       params)
    assert np.all(state.x[:5] == 0) and np.all(state.x[5:] == 1)


def test_init_state_explicit_and_errors():
    classes = np.zeros(4, dtype=np.int64)
    state = init_state(InitSpec(opinions=(1, 0, 1, 1)), 4, classes, FIG2A)
    assert state.x.tolist() == [1, 0, 1, 1]
    with pytest.raises(ValueError):
        init_state(InitSpec(opinions=(1, 0)), 4, classes, FIG2A)
    with pytest.raises(ValueError):
        init_state(InitSpec(shares=(0.9, 0.9)), 4, classes, FIG2A)
    with pytest.raises(ValueError):
        InitSpec()
    with pytest.raises(ValueError):
        InitSpec(shares=(1.0, 0.0), opinions=(0,))


def test_zero_rates_freeze():
    zero = CnvmParams(np.zeros((2, 2)), np.zeros((2, 2)))
    g = generate_er(30, 0.2, 5)
    state0 = init_state(InitSpec(shares=(0.4, 0.6)), 30,
                        np.zeros(30, dtype=np.int64), zero)
    traj = gillespie_run(g, zero, state0, make_time_grid(3.0, 0.5), 1)
    assert traj.event_count == 0
    assert np.all(traj.values == traj.values[0])
    assert np.array_equal(traj.final_state.x, state0.x)


def test_trajectory_simplex_and_grid():
    g = generate_er(60, 0.1, 2)
    state0 = init_state(InitSpec(shares=(0.3, 0.7)), 60,
                        np.zeros(60, dtype=np.int64), FIG2A)
    traj = gillespie_run(g, FIG2A, state0, make_time_grid(4.0, 0.1), 7)
    assert traj.values.min() >= 0.0
    assert np.abs(traj.values.sum(axis=1) - 1.0).max() <= 1e-12
    assert traj.values[0].tolist() == [18 / 60, 42 / 60]
    assert traj.event_count > 0


def test_determinism_bit_identical():
    g = generate_er(80, 0.1, 3)
    state0 = init_state(InitSpec(shares=(0.2, 0.8)), 80,
                        np.zeros(80, dtype=np.int64), FIG2A)
    grid = make_time_grid(3.0, 0.25)
    a = gillespie_run(g, FIG2A, state0, grid, 999)
    b = gillespie_run(g, FIG2A, state0, grid, 999)
    assert np.array_equal(a.values, b.values)
    assert a.event_count == b.event_count
    assert np.array_equal(a.final_state.x, b.final_state.x)
    c = gillespie_run(g, FIG2A, state0, grid, 1000)
    assert not np.array_equal(a.values, c.values)


def test_grid_validation():
    g = generate_er(10, 0.3, 1)
    state0 = init_state(InitSpec(shares=(0.5, 0.5)), 10,
                        np.zeros(10, dtype=np.int64), FIG2A)
    with pytest.raises(ValueError):
        gillespie_run(g, FIG2A, state0, np.array([1.0, 2.0]), 0)
    with pytest.raises(ValueError):
        gillespie_run(g, FIG2A, state0, np.array([0.0, 2.0, 1.0]), 0)


def test_incremental_rates_match_recomputation():
    # full per-node rate recomputation after every event of a 1000+ event run
    g = generate_er(50, 0.15, 11)
    state0 = init_state(InitSpec(shares=(0.5, 0.5)), 50,
                        np.zeros(50, dtype=np.int64), FIG2A)
    traj = gillespie_run(g, FIG2A, state0, make_time_grid(100.0, 1.0), 13,
                         check_rates_every=1)
    assert traj.event_count >= 1000
    assert traj.rate_drift <= 1e-9


def test_heterogeneous_classes_run():
    params = CnvmParams([[[0.0, 1.0], [0.8, 0.0]], [[0.0, 0.8], [1.0, 0.0]]],
                        [[[0.0, 0.01], [0.01, 0.0]]] * 2)
    fam = ErFamily(p=0.1, class_fractions=(0.5, 0.5))
    stats = ensemble(fam, 40, params, InitSpec(shares=(0.25, 0.25, 0.25, 0.25)),
                     make_time_grid(2.0, 0.5), 5, seed=3)
    assert stats.mean.shape == (5, 4)
    assert np.abs(stats.mean.sum(axis=1) - 1.0).max() <= 1e-12


def test_ensemble_single_run_mean_is_trajectory():
    fam = ErFamily(p=0.1)
    grid = make_time_grid(2.0, 0.25)
    stats = ensemble(fam, 50, FIG2A, InitSpec(shares=(0.2, 0.8)), grid, 1,
                     seed=5)
    assert stats.std.max() == 0.0
    g, classes = fam.sample(50, substream(5, 0, 0))
    state0 = init_state(InitSpec(shares=(0.2, 0.8)), 50, classes, FIG2A)
    traj = gillespie_run(g, FIG2A, state0, grid, substream(5, 0, 1))
    assert np.array_equal(stats.mean, traj.values)


def test_annealed_equals_quenched_at_single_run():
    fam = ErFamily(p=0.08)
    grid = make_time_grid(2.0, 0.5)
    a = ensemble(fam, 40, FIG2A, InitSpec(shares=(0.3, 0.7)), grid, 1,
                 mode="annealed", seed=8)
    q = ensemble(fam, 40, FIG2A, InitSpec(shares=(0.3, 0.7)), grid, 1,
                 mode="quenched", seed=8)
    assert np.array_equal(a.mean, q.mean)


class _CountingFamily:
    """ER family that counts how many graphs were sampled."""

    def __init__(self, p):
        self.p = p
        self.samples = 0

    def sample(self, n, seed):
        self.samples += 1
        return generate_er(n, self.p, seed), np.zeros(n, dtype=np.int64)


def test_graph_resampling_policy():
    grid = make_time_grid(1.0, 0.5)
    fam = _CountingFamily(0.1)
    ensemble(fam, 30, FIG2A, InitSpec(shares=(0.5, 0.5)), grid, 6,
             mode="annealed", seed=1)
    assert fam.samples == 6
    fam = _CountingFamily(0.1)
    ensemble(fam, 30, FIG2A, InitSpec(shares=(0.5, 0.5)), grid, 6,
             mode="quenched", seed=1)
    assert fam.samples == 1


def test_ensemble_threads_deterministic():
    fam = ErFamily(p=0.1)
    grid = make_time_grid(2.0, 0.5)
    a = ensemble(fam, 60, FIG2A, InitSpec(shares=(0.2, 0.8)), grid, 8,
                 seed=4, threads=1)
    b = ensemble(fam, 60, FIG2A, InitSpec(shares=(0.2, 0.8)), grid, 8,
                 seed=4, threads=3)
    assert np.array_equal(a.mean, b.mean)
    assert np.array_equal(a.std, b.std)


def test_ensemble_validation():
    fam = ErFamily(p=0.1)
    grid = make_time_grid(1.0, 0.5)
    with pytest.raises(ValueError):
        ensemble(fam, 10, FIG2A, InitSpec(shares=(0.5, 0.5)), grid, 0, seed=0)
    with pytest.raises(ValueError):
        ensemble(fam, 10, FIG2A, InitSpec(shares=(0.5, 0.5)), grid, 1,
                 mode="warm", seed=0)


def test_trajectory_csv_format():
    g = generate_er(20, 0.2, 1)
    state0 = init_state(InitSpec(shares=(0.5, 0.5)), 20,
                        np.zeros(20, dtype=np.int64), FIG2A)
    traj = gillespie_run(g, FIG2A, state0, make_time_grid(1.0, 0.5), 2)
    buf = io.StringIO()
    trajectory_to_csv(traj, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,c_1_1,c_2_1"
    assert len(lines) == 1 + 3
    first = [float(v) for v in lines[1].split(",")]
    assert first == [0.0, 0.5, 0.5]
    # 17 significant digits survive a parse round trip
    for line in lines[1:]:
        for tok, want in zip(line.split(","), [None, None, None]):
            assert float(tok) == float(tok)


def test_ensemble_csv_format():
    fam = ErFamily(p=0.2)
    stats = ensemble(fam, 20, FIG2A, InitSpec(shares=(0.5, 0.5)),
                     make_time_grid(1.0, 0.5), 3, seed=9)
    buf = io.StringIO()
    ensemble_to_csv(stats, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,c_1_1,c_2_1,std_c_1_1,std_c_2_1"
    cells = lines[1].split(",")
    assert len(cells) == 5
    parsed = np.array([float(v) for v in cells])
    assert parsed[0] == 0.0 and parsed[1] + parsed[2] == pytest.approx(1.0)


def test_substream_independence_and_nesting():
    a = np.random.default_rng(substream(1, 2)).random(4)
    b = np.random.default_rng(substream(1, 3)).random(4)
    assert not np.array_equal(a, b)
    nested = substream(substream(1, 2), 5)
    direct = substream(1, 2, 5)
    assert np.array_equal(np.random.default_rng(nested).random(4),
                          np.random.default_rng(direct).random(4))
