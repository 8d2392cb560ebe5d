"""Event-driven exact simulation of the noisy voter dynamics on a fixed
graph, plus ensemble orchestration over random graphs.

The core loop is the classic exact algorithm: draw the waiting time from
the exponential distribution of the accumulated rate, then the event with
probability proportional to its rate. Per-node exit rates live in a Fenwick
tree, so node selection and the post-flip updates cost O(log N); after a
flip only the flipped node and its neighbors are touched.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numba as nb
import numpy as np

from .model import CnvmParams, Family, SystemState


def substream(seed, *key: int) -> np.random.SeedSequence:
    """Independent, reproducible RNG stream keyed by (seed, *key).

    ``seed`` may be an int or a SeedSequence produced by this function, so
    streams can be derived hierarchically.
    """
    if isinstance(seed, np.random.SeedSequence):
        entropy = seed.entropy
        base = tuple(entropy) if isinstance(entropy, (tuple, list)) else (int(entropy),)
    else:
        base = (int(seed),)
    return np.random.SeedSequence(entropy=base + tuple(int(x) for x in key))


def make_time_grid(t_max: float, dt_record: float) -> np.ndarray:
    """Recording grid 0, dt, 2*dt, ..., t_max (dt must divide t_max)."""
    steps = round(t_max / dt_record)
    if steps < 1 or abs(steps * dt_record - t_max) > 1e-9 * max(1.0, t_max):
        raise ValueError("dt_record must divide t_max")
    return np.linspace(0.0, t_max, steps + 1)


# ---------------------------------------------------------------------------
# Trajectory containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    """Collective variable sampled on a time grid (state held constant
    between jumps)."""

    times: np.ndarray            # strictly increasing, starts at 0
    values: np.ndarray           # (T, M*K) shares
    num_opinions: int
    num_classes: int
    event_count: int = 0
    final_state: Optional[SystemState] = None
    rate_drift: float = 0.0      # max |cached - recomputed| rate seen, if checked


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Per-time mean and standard deviation of the collective variable
    across realizations."""

    times: np.ndarray
    mean: np.ndarray             # (T, M*K)
    std: np.ndarray              # (T, M*K), population convention (R=1 -> 0)
    num_runs: int
    num_opinions: int
    num_classes: int


def _column_names(num_opinions: int, num_classes: int, prefix: str = "c") -> list:
    return [f"{prefix}_{m + 1}_{k + 1}"
            for m in range(num_opinions) for k in range(num_classes)]


def _write_csv(f, times: np.ndarray, blocks) -> None:
    names = ["t"]
    cols = [times]
    for block_names, array in blocks:
        names.extend(block_names)
        cols.extend(array[:, j] for j in range(array.shape[1]))
    f.write(",".join(names) + "\n")
    for row in zip(*cols):
        f.write(",".join(f"{v:.17g}" for v in row) + "\n")


def trajectory_to_csv(traj: Trajectory, f) -> None:
    """Header ``t,c_1_1,...,c_M_K``; floats with 17 significant digits."""
    close = False
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        f = open(f, "w")
        close = True
    try:
        _write_csv(f, traj.times,
                   [(_column_names(traj.num_opinions, traj.num_classes),
                     traj.values)])
    finally:
        if close:
            f.close()


def ensemble_to_csv(stats: EnsembleStats, f) -> None:
    """Header ``t,c_*,...,std_c_*,...``; 17 significant digits."""
    close = False
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        f = open(f, "w")
        close = True
    try:
        _write_csv(f, stats.times,
                   [(_column_names(stats.num_opinions, stats.num_classes),
                     stats.mean),
                    (_column_names(stats.num_opinions, stats.num_classes,
                                   prefix="std_c"), stats.std)])
    finally:
        if close:
            f.close()


# ---------------------------------------------------------------------------
# Initial states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InitSpec:
    """Target shares per extended state, or an explicit opinion vector."""

    shares: Optional[tuple] = None
    opinions: Optional[tuple] = None

    def __post_init__(self):
        if (self.shares is None) == (self.opinions is None):
            raise ValueError("give exactly one of shares / opinions")


def init_state(spec: InitSpec, n: int, classes: np.ndarray,
               params: CnvmParams) -> SystemState:
    """Deterministic initial state realizing the target shares.

    Within each class, target counts are obtained by largest-remainder
    rounding of ``share * n`` and assigned to the class's nodes in index
    order (first count_1 nodes get opinion 0, and so on). The realized
    collective vector is within M*K/n of the target in every entry.
    """
    classes = np.asarray(classes, dtype=np.int64)
    if classes.shape != (n,):
        raise ValueError("classes must have length n")
    if spec.opinions is not None:
        x = np.asarray(spec.opinions, dtype=np.int64)
        if x.shape != (n,):
            raise ValueError("explicit opinion vector has wrong length")
        state = SystemState(x, classes)
        state.check(params)
        return state

    shares = np.asarray(spec.shares, dtype=np.float64)
    m_op, k_cl = params.m, params.k
    if shares.shape != (m_op * k_cl,):
        raise ValueError("shares length must be M*K")
    if np.any(shares < 0) or abs(shares.sum() - 1.0) > 1e-9:
        raise ValueError("shares must be a probability vector")
    x = np.empty(n, dtype=np.int64)
    for k in range(k_cl):
        nodes = np.flatnonzero(classes == k)
        quota = shares.reshape(m_op, k_cl)[:, k] * n
        if abs(quota.sum() - nodes.size) > 1e-6 * max(1, n):
            raise ValueError("shares incompatible with class sizes")
        counts = np.floor(quota).astype(np.int64)
        short = nodes.size - counts.sum()
        if short:
            order = np.argsort(-(quota - counts), kind="stable")
            counts[order[:short]] += 1
        x[nodes] = np.repeat(np.arange(m_op), counts)
    state = SystemState(x, classes)
    state.check(params)
    return state


# ---------------------------------------------------------------------------
# Event loop (jit-compiled)
# ---------------------------------------------------------------------------

@nb.njit(cache=True, nogil=True, inline="always")
def _exit_rate(i, m, k, cnt, deg_i, r, rt):
    total = 0.0
    num_op = r.shape[1]
    if deg_i > 0:
        inv = 1.0 / deg_i
        for n in range(num_op):
            if n != m:
                total += r[k, m, n] * (cnt[i, n] * inv) + rt[k, m, n]
    else:
        for n in range(num_op):
            if n != m:
                total += rt[k, m, n]
    return total


@nb.njit(cache=True, nogil=True, inline="always")
def _tree_add(tree, size, i, delta):
    while i <= size:
        tree[i] += delta
        i += i & -i


@nb.njit(cache=True, nogil=True, inline="always")
def _tree_total(tree, size):
    s = 0.0
    j = size
    while j > 0:
        s += tree[j]
        j -= j & -j
    return s


@nb.njit(cache=True, nogil=True, inline="always")
def _tree_pick(tree, size, top, u):
    """Largest 0-based index whose prefix sum is <= u."""
    pos = 0
    bit = top
    while bit > 0:
        nxt = pos + bit
        if nxt <= size and tree[nxt] <= u:
            pos = nxt
            u -= tree[nxt]
        bit >>= 1
    return pos


@nb.njit(cache=True, nogil=True)
def _refresh_rates(indptr, x, s, cnt, r, rt, lam, tree):
    n = x.size
    for i in range(n + 1):
        tree[i] = 0.0
    for i in range(n):
        lam[i] = _exit_rate(i, x[i], s[i], cnt, indptr[i + 1] - indptr[i], r, rt)
    for i in range(1, n + 1):
        tree[i] += lam[i - 1]
        j = i + (i & -i)
        if j <= n:
            tree[j] += tree[i]


@nb.njit(cache=True, nogil=True)
def _gillespie(indptr, indices, x, s, r, rt, t_grid, values, rng,
               rebuild_every, check_every):
    n = x.size
    num_op = r.shape[1]
    num_cl = r.shape[0]
    mk = num_op * num_cl

    cnt = np.zeros((n, num_op), dtype=np.int64)
    for i in range(n):
        for ptr in range(indptr[i], indptr[i + 1]):
            cnt[i, x[indices[ptr]]] += 1
    lam = np.empty(n, dtype=np.float64)
    tree = np.zeros(n + 1, dtype=np.float64)
    _refresh_rates(indptr, x, s, cnt, r, rt, lam, tree)
    top = 1
    while top * 2 <= n:
        top *= 2
    counts = np.zeros(mk, dtype=np.int64)
    for i in range(n):
        counts[x[i] * num_cl + s[i]] += 1

    rates = np.empty(num_op, dtype=np.float64)
    num_t = t_grid.size
    inv_n = 1.0 / n
    gp = 0
    t = 0.0
    events = 0
    max_drift = 0.0

    while gp < num_t:
        total = _tree_total(tree, n)
        if total <= 0.0:
            while gp < num_t:
                for j in range(mk):
                    values[gp, j] = counts[j] * inv_n
                gp += 1
            break
        dt = -np.log(1.0 - rng.random()) / total
        t_next = t + dt
        while gp < num_t and t_grid[gp] < t_next:
            for j in range(mk):
                values[gp, j] = counts[j] * inv_n
            gp += 1
        if gp >= num_t:
            break

        i = _tree_pick(tree, n, top, rng.random() * total)
        if i >= n:
            i = n - 1
        while i > 0 and lam[i] <= 0.0:
            i -= 1
        m = x[i]
        k = s[i]
        deg_i = indptr[i + 1] - indptr[i]
        local = 0.0
        for n2 in range(num_op):
            if n2 == m:
                rates[n2] = 0.0
            elif deg_i > 0:
                rates[n2] = r[k, m, n2] * (cnt[i, n2] / deg_i) + rt[k, m, n2]
                local += rates[n2]
            else:
                rates[n2] = rt[k, m, n2]
                local += rates[n2]
        if local <= 0.0:
            # stale float in the tree pointed at a dead node; resync and skip
            _refresh_rates(indptr, x, s, cnt, r, rt, lam, tree)
            t = t_next
            continue
        u = rng.random() * local
        new = -1
        acc = 0.0
        for n2 in range(num_op):
            acc += rates[n2]
            if u < acc:
                new = n2
                break
        if new < 0:
            for n2 in range(num_op - 1, -1, -1):
                if rates[n2] > 0.0:
                    new = n2
                    break

        x[i] = new
        counts[m * num_cl + k] -= 1
        counts[new * num_cl + k] += 1
        fresh = _exit_rate(i, new, k, cnt, deg_i, r, rt)
        _tree_add(tree, n, i + 1, fresh - lam[i])
        lam[i] = fresh
        for ptr in range(indptr[i], indptr[i + 1]):
            j = indices[ptr]
            cnt[j, m] -= 1
            cnt[j, new] += 1
            fresh = _exit_rate(j, x[j], s[j], cnt,
                               indptr[j + 1] - indptr[j], r, rt)
            _tree_add(tree, n, j + 1, fresh - lam[j])
            lam[j] = fresh

        events += 1
        t = t_next
        if rebuild_every > 0 and events % rebuild_every == 0:
            _refresh_rates(indptr, x, s, cnt, r, rt, lam, tree)
        if check_every > 0 and events % check_every == 0:
            for ii in range(n):
                ref = _exit_rate(ii, x[ii], s[ii], cnt,
                                 indptr[ii + 1] - indptr[ii], r, rt)
                drift = abs(ref - lam[ii])
                if drift > max_drift:
                    max_drift = drift

    return events, max_drift


def gillespie_run(g, params: CnvmParams, state0: SystemState,
                  t_grid: np.ndarray, seed, check_rates_every: int = 0,
                  rebuild_every: int = 1_000_000) -> Trajectory:
    """Statistically exact sample path, recorded on ``t_grid``.

    The collective variable is written at each grid time with the state held
    constant between jumps. Zero total rate freezes the state until the
    horizon. Deterministic given the seed. ``check_rates_every`` compares
    the cached per-node rates against a full recomputation every so many
    events and reports the worst drift on the returned trajectory;
    ``rebuild_every`` resyncs the cached rates from scratch to bound
    floating-point drift on long runs.
    """
    t_grid = np.ascontiguousarray(t_grid, dtype=np.float64)
    if t_grid.ndim != 1 or t_grid.size == 0 or t_grid[0] != 0.0:
        raise ValueError("time grid must start at 0")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    state0.check(params, g)
    x = state0.x.copy()
    values = np.empty((t_grid.size, params.m * params.k), dtype=np.float64)
    rng = np.random.default_rng(seed)
    events, drift = _gillespie(g.indptr, g.indices, x, state0.s,
                               params.r, params.r_tilde, t_grid, values, rng,
                               rebuild_every, check_rates_every)
    return Trajectory(times=t_grid, values=values,
                      num_opinions=params.m, num_classes=params.k,
                      event_count=int(events),
                      final_state=SystemState(x, state0.s),
                      rate_drift=float(drift))


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------

def ensemble(family: Family, n: int, params: CnvmParams, init: InitSpec,
             t_grid: np.ndarray, num_runs: int, mode: str = "annealed",
             seed: int = 0, threads: int = 1) -> EnsembleStats:
    """Run ``num_runs`` realizations and aggregate mean/std per grid time.

    ``mode="annealed"`` draws a fresh graph for every realization;
    ``mode="quenched"`` samples one graph and reuses it. Realization i uses
    streams derived from (seed, i), so results are independent of thread
    count and identical between modes when num_runs == 1.
    """
    if num_runs < 1:
        raise ValueError("need at least one realization")
    if mode not in ("annealed", "quenched"):
        raise ValueError(f"unknown mode {mode!r}")
    t_grid = np.ascontiguousarray(t_grid, dtype=np.float64)

    shared = family.sample(n, substream(seed, 0, 0)) if mode == "quenched" else None

    def one(i: int) -> np.ndarray:
        if shared is None:
            g, classes = family.sample(n, substream(seed, i, 0))
        else:
            g, classes = shared
        state0 = init_state(init, n, classes, params)
        traj = gillespie_run(g, params, state0, t_grid, substream(seed, i, 1))
        return traj.values

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(one, range(num_runs)))
    else:
        runs = [one(i) for i in range(num_runs)]
    stack = np.stack(runs)
    return EnsembleStats(times=t_grid, mean=stack.mean(axis=0),
                         std=stack.std(axis=0), num_runs=num_runs,
                         num_opinions=params.m, num_classes=params.k)
