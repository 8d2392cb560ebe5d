"""Verification battery for the simulator and its mean-field limits.

Contains an exact master-equation oracle for tiny systems (uniformization
of the full generator), a sampled estimate of the propensity-approximation
gap, ensemble-vs-ODE deviation metrics, empirical checks of the edge-count
and degree concentration bounds, and a distributional invariance test under
node relabeling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .graph import Graph
from .meanfield import MfeSystem, integrate
from .model import (CnvmParams, ErFamily, Family, SbmFamily, SystemState,
                    collective_variable, propensity_table_exact,
                    propensity_table_reduced)
from .sim import EnsembleStats, InitSpec, Trajectory, ensemble, init_state, substream

MAX_ORACLE_STATES = 4096


# ---------------------------------------------------------------------------
# Master-equation oracle
# ---------------------------------------------------------------------------

def _full_generator(g: Graph, params: CnvmParams,
                    s: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
    """Sparse generator of the full jump process on all M^N system states,
    plus the (num_states, M*K) matrix of collective vectors per state."""
    n = g.n
    m_op, k_cl = params.m, params.k
    num_states = m_op ** n
    if num_states > MAX_ORACLE_STATES:
        raise ValueError(f"state space {num_states} exceeds the oracle limit "
                         f"{MAX_ORACLE_STATES}")
    # opinions[state, i] decodes the base-M encoding, node 0 least significant
    codes = np.arange(num_states, dtype=np.int64)
    opinions = np.empty((num_states, n), dtype=np.int64)
    for i in range(n):
        opinions[:, i] = (codes // m_op ** i) % m_op

    rows, cols, vals = [], [], []
    degrees = g.degrees
    for i in range(n):
        nbrs = g.neighbors(i)
        xi = opinions[:, i]
        ki = int(s[i])
        for target in range(m_op):
            movers = xi != target
            if not movers.any():
                continue
            if degrees[i] > 0:
                count = np.zeros(num_states, dtype=np.int64)
                for j in nbrs:
                    count += opinions[:, j] == target
                rate = (params.r[ki, xi, target] * (count / degrees[i])
                        + params.r_tilde[ki, xi, target])
            else:
                rate = params.r_tilde[ki, xi, target].astype(np.float64)
            rate = np.where(movers, rate, 0.0)
            nz = rate > 0
            if not nz.any():
                continue
            rows.append(codes[nz])
            cols.append(codes[nz] + (target - xi[nz]) * m_op ** i)
            vals.append(rate[nz])

    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
    else:
        rows = cols = np.empty(0, dtype=np.int64)
        vals = np.empty(0)
    q = sp.coo_matrix((vals, (rows, cols)),
                      shape=(num_states, num_states)).tocsr()
    q = q - sp.diags(np.asarray(q.sum(axis=1)).ravel())

    shares = np.zeros((num_states, m_op * k_cl))
    for i in range(n):
        shares[codes, opinions[:, i] * k_cl + int(s[i])] += 1.0 / n
    return q.tocsr(), shares


def _uniformization(q: sp.csr_matrix, p0: np.ndarray, t: float,
                    tol: float = 1e-10) -> np.ndarray:
    """Distribution at time t of the chain with generator q, started at p0.

    Poisson-weighted power series of the scaled stochastic matrix, truncated
    once the neglected tail is below tol; long horizons are split so the
    weights stay representable.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    rate = float(-q.diagonal().min())
    if rate <= 0 or t == 0:
        return p0.copy()
    chunks = max(1, int(np.ceil(rate * t / 200.0)))
    dt = t / chunks
    step_tol = tol / chunks
    p_transition = (sp.identity(q.shape[0], format="csr") + q / rate).tocsr()
    p = p0.copy()
    for _ in range(chunks):
        mu = rate * dt
        weight = np.exp(-mu)
        acc = weight * p
        covered = weight
        v = p
        k = 0
        while covered < 1.0 - step_tol:
            k += 1
            v = v @ p_transition
            weight *= mu / k
            acc += weight * v
            covered += weight
        p = acc
    return p


def master_equation_oracle(g: Graph, params: CnvmParams, state0: SystemState,
                           t: Union[float, Sequence[float]],
                           tol: float = 1e-10) -> np.ndarray:
    """Exact expected collective vector at time(s) t, for tiny systems.

    Builds the full generator over all M^N system states and propagates the
    one-hot initial distribution by uniformization with truncation error
    below ``tol`` in total variation.
    """
    state0.check(params, g)
    q, shares = _full_generator(g, params, state0.s)
    code = int(np.sum(state0.x * params.m ** np.arange(g.n, dtype=np.int64)))
    p0 = np.zeros(q.shape[0])
    p0[code] = 1.0
    times = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = np.empty((times.size, shares.shape[1]))
    for idx, ti in enumerate(times):
        out[idx] = _uniformization(q, p0, float(ti), tol) @ shares
    return out[0] if np.isscalar(t) or np.ndim(t) == 0 else out


# ---------------------------------------------------------------------------
# Propensity-gap estimate
# ---------------------------------------------------------------------------

def delta_estimate(g: Graph, params: CnvmParams, family: Family,
                   states: Sequence[SystemState]) -> float:
    """Sampled maximum, over the given states, of the worst per-transition
    gap |exact propensity / N - reduced propensity|.

    This probes the states supplied (a lower estimate); the true maximum
    over all M^N states is out of reach.
    """
    worst = 0.0
    for state in states:
        state.check(params, g)
        exact = propensity_table_exact(g, state, params) / g.n
        shares = collective_variable(state, params).shares
        reduced = propensity_table_reduced(shares, params, family)
        worst = max(worst, float(np.abs(exact - reduced).max()))
    return worst


def random_states(n: int, params: CnvmParams, classes: np.ndarray,
                  count: int, seed) -> list:
    """Uniformly random opinion assignments over the fixed classes."""
    rng = np.random.default_rng(seed)
    return [SystemState(rng.integers(0, params.m, size=n), classes)
            for _ in range(count)]


# ---------------------------------------------------------------------------
# Deviation between ensemble and mean-field
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DeviationReport:
    """Per-time sup-norm distance of the ensemble mean from the ODE curve."""

    times: np.ndarray
    deviation: np.ndarray    # max-component |mean - mfe| per grid time
    std_max: np.ndarray      # max-component ensemble std per grid time
    sup_dev: float

    def to_csv(self, f) -> None:
        close = False
        if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
            f = open(f, "w")
            close = True
        try:
            f.write("t,deviation,std_max\n")
            for t, d, s in zip(self.times, self.deviation, self.std_max):
                f.write(f"{t:.17g},{d:.17g},{s:.17g}\n")
        finally:
            if close:
                f.close()

    def summary(self) -> str:
        return (f"sup deviation {self.sup_dev:.6g} over [{self.times[0]:g}, "
                f"{self.times[-1]:g}]; final deviation "
                f"{self.deviation[-1]:.6g}; peak std {self.std_max.max():.6g}")


def sup_deviation(stats: EnsembleStats, mfe: Trajectory) -> DeviationReport:
    """Compare an ensemble mean with an ODE trajectory on the same grid."""
    if not np.array_equal(stats.times, mfe.times):
        raise ValueError("time grids differ")
    dev = np.abs(stats.mean - mfe.values).max(axis=1)
    return DeviationReport(times=stats.times, deviation=dev,
                           std_max=stats.std.max(axis=1),
                           sup_dev=float(dev.max()))


# ---------------------------------------------------------------------------
# Edge counts and concentration checks
# ---------------------------------------------------------------------------

def edge_count_between(g: Graph, state: SystemState, m: int, n: int) -> int:
    """Number of edges joining an m-opinion node with an n-opinion node."""
    if m == n:
        raise ValueError("opinions must differ")
    src = np.repeat(np.arange(g.n, dtype=np.int64), g.degrees)
    x = state.x
    return int(np.count_nonzero((x[src] == m) & (x[g.indices] == n)))


def _extended_edge_count(g: Graph, state: SystemState, m: int, k: int,
                         n: int) -> int:
    src = np.repeat(np.arange(g.n, dtype=np.int64), g.degrees)
    x = state.x
    return int(np.count_nonzero((x[src] == m) & (state.s[src] == k)
                                & (x[g.indices] == n)))


@dataclass(frozen=True, eq=False)
class ConcentrationReport:
    """Empirical exceedance frequencies next to the analytic tail bounds."""

    quantity: str
    samples: int
    mean: float
    epsilons: np.ndarray
    frequencies: np.ndarray
    bounds: np.ndarray

    def monte_carlo_se(self) -> np.ndarray:
        f = self.frequencies
        return np.sqrt(f * (1.0 - f) / self.samples)

    def passed(self, num_se: float = 3.0) -> bool:
        return bool(np.all(self.frequencies
                           <= self.bounds + num_se * self.monte_carlo_se()))

    def to_csv(self, f) -> None:
        close = False
        if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
            f = open(f, "w")
            close = True
        try:
            f.write("epsilon,frequency,bound,samples\n")
            for e, fr, b in zip(self.epsilons, self.frequencies, self.bounds):
                f.write(f"{e:.17g},{fr:.17g},{b:.17g},{self.samples}\n")
        finally:
            if close:
                f.close()

    def summary(self) -> str:
        lines = [f"{self.quantity}: {self.samples} samples, mean {self.mean:g}"]
        for e, fr, b in zip(self.epsilons, self.frequencies, self.bounds):
            lines.append(f"  eps={e:g}: empirical {fr:.3g} vs bound {b:.3g}")
        return "\n".join(lines)


def _probe_params(m_op: int, k_cl: int) -> CnvmParams:
    zero = np.zeros((max(2, m_op), max(2, m_op)))
    return CnvmParams(zero, zero, num_classes=k_cl)


def chernoff_check(family: Family, n: int, quantity: str,
                   epsilons: Sequence[float], samples: int, seed,
                   shares: Optional[Sequence[float]] = None,
                   opinion_pair: tuple = (0, 1), class_index: int = 0,
                   node: int = 0) -> ConcentrationReport:
    """Empirical tail probabilities of an edge count or node degree, paired
    with the matching Chernoff-type bound.

    ``quantity="edge-count"`` watches the number of edges between opinion
    ``opinion_pair[0]`` (restricted to ``class_index`` when the family has
    blocks) and opinion ``opinion_pair[1]``, for a fixed deterministic
    state; the epsilons are absolute deviations from the binomial mean.
    ``quantity="degree"`` watches one node's degree; the epsilons are
    fractions of the expected degree.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    eps = np.asarray(epsilons, dtype=np.float64)
    m, n_op = opinion_pair
    k_cl = family.num_classes if family is not None else 1
    if shares is None:
        m_tot = 2
        shares = np.zeros(m_tot * k_cl)
        class_fr = (np.asarray(family.block_fractions, dtype=np.float64)
                    if isinstance(family, SbmFamily) else np.full(k_cl, 1.0 / k_cl))
        for k in range(k_cl):
            shares[0 * k_cl + k] = 0.5 * class_fr[k]
            shares[1 * k_cl + k] = 0.5 * class_fr[k]
    else:
        shares = np.asarray(shares, dtype=np.float64)
        m_tot = shares.size // k_cl
    params = _probe_params(m_tot, k_cl)
    classes = family.classes(n)
    state = init_state(InitSpec(shares=tuple(shares)), n, classes, params)
    c = collective_variable(state, params).shares.reshape(m_tot, k_cl)

    if isinstance(family, SbmFamily):
        p_eff = family.effective_probs()
        pbar = family.mean_block_prob()
        pbar_min = float(pbar.min())
        if quantity == "edge-count":
            mean = float(n * n * (c[m, class_index] * c[n_op] @ p_eff[class_index]))
            bounds = 2.0 * np.exp(-eps ** 2 / (3.0 * n * n * pbar[class_index]))
        elif quantity == "degree":
            mean = float(n * pbar[int(classes[node])])
            bounds = 2.0 * np.exp(-n * eps ** 2 * pbar_min / 3.0 + 2.0 * eps / 3.0)
        else:
            raise ValueError(f"unknown quantity {quantity!r}")
    elif isinstance(family, ErFamily):
        p = family.p
        if quantity == "edge-count":
            cm = float(c[m].sum())
            cn = float(c[n_op].sum())
            mean = cm * cn * n * n * p
            bounds = 2.0 * np.exp(-eps ** 2 / (3.0 * n * n * p))
        elif quantity == "degree":
            mean = n * p
            bounds = 2.0 * np.exp(-eps ** 2 * n * p / 3.0 + 2.0 * eps / 3.0)
        else:
            raise ValueError(f"unknown quantity {quantity!r}")
    else:
        raise ValueError("concentration bounds cover ER and SBM families")

    exceed = np.zeros(eps.size, dtype=np.int64)
    for idx in range(samples):
        g, _ = family.sample(n, substream(seed, idx))
        if quantity == "edge-count":
            if isinstance(family, SbmFamily):
                value = _extended_edge_count(g, state, m, class_index, n_op)
            else:
                value = edge_count_between(g, state, m, n_op)
            exceed += np.abs(value - mean) >= eps
        else:
            value = g.degree(node)
            exceed += np.abs(value - mean) >= eps * mean
    return ConcentrationReport(quantity=quantity, samples=samples, mean=mean,
                               epsilons=eps,
                               frequencies=exceed / samples, bounds=bounds)


# ---------------------------------------------------------------------------
# Invariance under node relabeling
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InvarianceReport:
    """Two-sample comparison of an observable before/after relabeling."""

    statistic: float          # Kolmogorov-Smirnov distance
    threshold: float          # 3-sigma-equivalent critical distance
    samples: int

    @property
    def passed(self) -> bool:
        return self.statistic <= self.threshold

    def to_csv(self, f) -> None:
        close = False
        if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
            f = open(f, "w")
            close = True
        try:
            f.write("statistic,threshold,samples,passed\n")
            f.write(f"{self.statistic:.17g},{self.threshold:.17g},"
                    f"{self.samples},{int(self.passed)}\n")
        finally:
            if close:
                f.close()

    def summary(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (f"relabeling invariance: KS distance {self.statistic:.4f} vs "
                f"threshold {self.threshold:.4f} ({self.samples} samples, "
                f"{verdict})")


def permute_state(state: SystemState, tau: np.ndarray) -> SystemState:
    """Relabel nodes: node tau[i] of the new state carries node i's data."""
    x = np.empty_like(state.x)
    s = np.empty_like(state.s)
    x[tau] = state.x
    s[tau] = state.s
    return SystemState(x, s)


def isomorphism_invariance_check(family: Family, n: int, state: SystemState,
                                 tau: np.ndarray, samples: int, seed,
                                 opinion_pair: tuple = (0, 1)) -> InvarianceReport:
    """Check that an edge count between two opinions has the same
    distribution for a state and its relabeled copy, over fresh graphs.

    Both arms reuse the same graph stream per sample, so the identity
    permutation yields identical value streams. The threshold is the
    two-sample Kolmogorov-Smirnov critical distance at a two-sided
    3-sigma-equivalent level (conservative for discrete observables).
    """
    if isinstance(family, SbmFamily):
        raise ValueError("block models are not relabeling-invariant; "
                         "use an ER or regular family")
    m, n_op = opinion_pair
    permuted = permute_state(state, np.asarray(tau, dtype=np.int64))
    a = np.empty(samples)
    b = np.empty(samples)
    for idx in range(samples):
        g, _ = family.sample(n, substream(seed, idx))
        a[idx] = edge_count_between(g, state, m, n_op)
        b[idx] = edge_count_between(g, permuted, m, n_op)
    from scipy.stats import ks_2samp
    stat = float(ks_2samp(a, b).statistic)
    alpha = 0.0027  # two-sided 3-sigma
    crit = np.sqrt(-np.log(alpha / 2.0) / 2.0) * np.sqrt(2.0 / samples)
    return InvarianceReport(statistic=stat, threshold=float(crit),
                            samples=samples)


# ---------------------------------------------------------------------------
# Convergence study across system sizes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConvergenceRow:
    n: int
    sup_dev: float
    mean_std: float


@dataclass(frozen=True, eq=False)
class ConvergenceStudy:
    rows: list
    stats: list        # EnsembleStats per n
    mfe: Trajectory

    def to_csv(self, f) -> None:
        close = False
        if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
            f = open(f, "w")
            close = True
        try:
            f.write("n,sup_dev,mean_std\n")
            for row in self.rows:
                f.write(f"{row.n},{row.sup_dev:.17g},{row.mean_std:.17g}\n")
        finally:
            if close:
                f.close()

    def summary(self) -> str:
        lines = ["n  sup_dev  mean_std"]
        for row in self.rows:
            lines.append(f"{row.n}  {row.sup_dev:.6g}  {row.mean_std:.6g}")
        return "\n".join(lines)


def convergence_study(family_for: Union[Family, Callable[[int], Family]],
                      params: CnvmParams, init: InitSpec,
                      t_grid: np.ndarray, n_values: Sequence[int],
                      num_runs: int, mode: str = "annealed", seed: int = 0,
                      h: float = 0.01, threads: int = 1) -> ConvergenceStudy:
    """Ensemble-vs-ODE deviation for increasing system sizes.

    ``family_for`` is either a fixed family or a callable mapping n to a
    family (for size-dependent densities). Reports the sup deviation and
    the time-averaged peak componentwise std for each n.
    """
    n_values = list(n_values)
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ValueError("n values must be increasing")
    make = family_for if callable(family_for) else (lambda _n: family_for)
    mfe = None
    rows = []
    stats_list = []
    for n in n_values:
        family = make(n)
        stats = ensemble(family, n, params, init, t_grid, num_runs,
                         mode=mode, seed=seed, threads=threads)
        if mfe is None:
            if init.shares is None:
                raise ValueError("convergence study needs share-based "
                                 "initial conditions")
            system = MfeSystem(params, family)
            mfe = integrate(system, np.asarray(init.shares), t_grid, h=h)
        report = sup_deviation(stats, mfe)
        rows.append(ConvergenceRow(n=n, sup_dev=report.sup_dev,
                                   mean_std=float(report.std_max.mean())))
        stats_list.append(stats)
    return ConvergenceStudy(rows=rows, stats=stats_list, mfe=mfe)
