"""Command-line interface.

Subcommands: ``simulate`` (single trajectory to CSV), ``experiment``
(ensemble + mean-field comparison for a preset or config file), ``verify``
(statistical verification suites), ``plot`` (deterministic SVG chart), and
``presets`` (list available presets).

Exit codes: 0 success, 1 validation/usage error, 2 verification failure,
3 runtime failure. Every command is deterministic given its arguments and
seed; the seed comes from the flag, the config file, or NETDYN_SEED, in
that order of precedence, and there is no wall-clock fallback.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import analysis, graph, meanfield, model, sim
from .graph import RegularGraphError
from .model import CnvmParams, ErFamily, Family, RegularFamily, SbmFamily
from .sim import InitSpec


class UsageError(Exception):
    """Bad arguments or configuration (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    family: Family
    n: int
    params: CnvmParams
    init: InitSpec
    t_max: float
    dt_record: float
    num_runs: int
    mode: str = "annealed"
    seed: Optional[int] = None
    output: Optional[str] = None
    threads: int = 1

    def check(self) -> None:
        if self.seed is None:
            raise UsageError("no seed given (use --seed, the config file, "
                             "or NETDYN_SEED)")
        if self.n < 1 or self.num_runs < 1:
            raise UsageError("n and R must be positive")
        if self.mode not in ("annealed", "quenched"):
            raise UsageError(f"unknown mode {self.mode!r}")
        if self.t_max <= 0 or self.dt_record <= 0:
            raise UsageError("t_max and dt_record must be positive")

    def time_grid(self) -> np.ndarray:
        return sim.make_time_grid(self.t_max, self.dt_record)

    def initial_shares(self) -> np.ndarray:
        if self.init.shares is not None:
            return np.asarray(self.init.shares, dtype=np.float64)
        classes = self.family.classes(self.n)
        state = sim.init_state(self.init, self.n, classes, self.params)
        return model.collective_variable(state, self.params).shares


def config_from_dict(doc: dict) -> ExperimentConfig:
    try:
        params, family = model.params_from_dict(doc)
        if family is None:
            raise KeyError("family")
        if "init" in doc:
            init = InitSpec(shares=tuple(doc["init"]))
        elif "init_opinions" in doc:
            init = InitSpec(opinions=tuple(doc["init_opinions"]))
        else:
            raise KeyError("init")
        return ExperimentConfig(
            family=family, n=int(doc["n"]), params=params, init=init,
            t_max=float(doc["t_max"]), dt_record=float(doc["dt_record"]),
            num_runs=int(doc.get("R", 1)), mode=doc.get("mode", "annealed"),
            seed=(int(doc["seed"]) if "seed" in doc else None),
            output=doc.get("output"))
    except KeyError as exc:
        raise UsageError(f"config is missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from exc


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


# ---------------------------------------------------------------------------
# Presets (figure-style experiment setups)
# ---------------------------------------------------------------------------
# Graph and share parameters follow the published setups; rate constants and
# horizons that the figures leave unstated are fixed constants chosen here
# (marked "chosen") so that the qualitative behavior is reproduced.

def _preset_fig2a() -> ExperimentConfig:
    return ExperimentConfig(
        family=ErFamily(p=0.01), n=1000,
        params=CnvmParams([[0.0, 0.99], [1.0, 0.0]],
                          [[0.0, 0.01], [0.01, 0.0]]),
        init=InitSpec(shares=(0.2, 0.8)),
        t_max=5.0, dt_record=0.05, num_runs=200)   # horizon chosen


def _preset_fig2b() -> ExperimentConfig:
    r = [[0.0, 0.8, 0.2], [0.2, 0.0, 0.8], [0.8, 0.2, 0.0]]
    rt = [[0.0, 0.01, 0.01], [0.01, 0.0, 0.01], [0.01, 0.01, 0.0]]
    return ExperimentConfig(
        family=ErFamily(p=0.01), n=1000,
        params=CnvmParams(r, rt),
        init=InitSpec(shares=(0.2, 0.5, 0.3)),
        t_max=10.0, dt_record=0.05, num_runs=200)  # horizon chosen


def _preset_fig3_hetero() -> ExperimentConfig:
    # class 0 slightly prefers opinion 1, class 1 prefers opinion 0 (chosen)
    r = [[[0.0, 1.0], [0.8, 0.0]],
         [[0.0, 0.8], [1.0, 0.0]]]
    rt = [[[0.0, 0.01], [0.01, 0.0]],
          [[0.0, 0.01], [0.01, 0.0]]]
    return ExperimentConfig(
        family=ErFamily(p=0.01, class_fractions=(0.5, 0.5)), n=1000,
        params=CnvmParams(r, rt),
        init=InitSpec(shares=(0.25, 0.25, 0.25, 0.25)),
        t_max=10.0, dt_record=0.05, num_runs=200)  # rates, horizon chosen


def _preset_fig4_sbm() -> ExperimentConfig:
    return ExperimentConfig(
        family=SbmFamily(block_fractions=(0.5, 0.5),
                         probs=((0.01, 0.0001), (0.0001, 0.01))),
        n=1000,
        params=CnvmParams([[0.0, 1.0], [1.0, 0.0]],
                          [[0.0, 0.01], [0.01, 0.0]], num_classes=2),
        init=InitSpec(shares=(0.5, 0.0, 0.0, 0.5)),
        t_max=100.0, dt_record=0.5, num_runs=200)  # rates, horizon chosen


def _preset_fig6(d: int) -> ExperimentConfig:
    system = meanfield.sirs_preset(2.0, 1.0, 0.1)  # rates chosen
    return ExperimentConfig(
        family=RegularFamily(d=d), n=10_000,
        params=system.params,
        init=InitSpec(shares=(0.99, 0.01, 0.0)),
        t_max=40.0, dt_record=0.2, num_runs=100)   # horizon chosen


PRESETS = {
    "fig2a": _preset_fig2a,
    "fig2b": _preset_fig2b,
    "fig3-hetero": _preset_fig3_hetero,
    "fig4-sbm": _preset_fig4_sbm,
    "fig6-sirs-d10": lambda: _preset_fig6(10),
    "fig6-sirs-d100": lambda: _preset_fig6(100),
}


def _resolve_config(args) -> ExperimentConfig:
    if getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise UsageError(f"unknown preset {args.preset!r} "
                             f"(try: {' '.join(sorted(PRESETS))})")
        config = PRESETS[args.preset]()
    elif getattr(args, "config", None):
        config = load_config(args.config)
    else:
        raise UsageError("give --preset or --config")
    if getattr(args, "scale_n", None):
        config = replace(config, n=args.scale_n)
    if getattr(args, "scale_r", None):
        config = replace(config, num_runs=args.scale_r)
    if getattr(args, "threads", None):
        config = replace(config, threads=args.threads)
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = config.seed
    if seed is None and os.environ.get("NETDYN_SEED"):
        seed = int(os.environ["NETDYN_SEED"])
    config = replace(config, seed=seed)
    if getattr(args, "out", None):
        config = replace(config, output=args.out)
    config.check()
    return config


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    config = _resolve_config(args)
    g, classes = config.family.sample(config.n, sim.substream(config.seed, 0, 0))
    state0 = sim.init_state(config.init, config.n, classes, config.params)
    traj = sim.gillespie_run(g, config.params, state0, config.time_grid(),
                             sim.substream(config.seed, 0, 1))
    out = config.output or "trajectory.csv"
    sim.trajectory_to_csv(traj, out)
    print(f"wrote {out} ({traj.event_count} events)")
    return 0


def cmd_experiment(args) -> int:
    config = _resolve_config(args)
    stats = sim.ensemble(config.family, config.n, config.params, config.init,
                         config.time_grid(), config.num_runs,
                         mode=config.mode, seed=config.seed,
                         threads=config.threads)
    system = meanfield.MfeSystem(config.params, config.family)
    mfe = meanfield.integrate(system, config.initial_shares(),
                              config.time_grid(), h=args.h)
    report = analysis.sup_deviation(stats, mfe)
    prefix = config.output or getattr(args, "preset", None) or "experiment"
    sim.ensemble_to_csv(stats, f"{prefix}_ensemble.csv")
    sim.trajectory_to_csv(mfe, f"{prefix}_mfe.csv")
    report.to_csv(f"{prefix}_deviation.csv")
    print(f"wrote {prefix}_ensemble.csv {prefix}_mfe.csv {prefix}_deviation.csv")
    print(report.summary())
    return 0


def _check(name: str, ok: bool, detail: str, results: list) -> None:
    results.append((name, ok, detail))


def _suite_graphs(seed: int, results: list) -> None:
    rng_seed = seed
    # exact-degree and simplicity invariants of the regular sampler
    bad = 0
    for i in range(1000):
        g = graph.generate_regular(100, 3, sim.substream(rng_seed, 1, i))
        if not np.all(g.degrees == 3):
            bad += 1
    for i in range(10):
        graph.generate_regular(100, 3, sim.substream(rng_seed, 1, i)).validate()
    _check("regular degrees (n=100, d=3, 1000 samples)", bad == 0,
           f"{bad} violations", results)

    # uniformity over all 70 labeled 2-regular graphs on 6 nodes
    samples = 10_000
    counts: dict = {}
    two_triangles = 0
    for i in range(samples):
        g = graph.generate_regular(6, 2, sim.substream(rng_seed, 2, i))
        key = tuple(map(tuple, g.edge_array()))
        counts[key] = counts.get(key, 0) + 1
        comp = _component_sizes(g)
        two_triangles += comp == [3, 3]
    from scipy.stats import chi2
    expected = samples / 70.0
    stat = sum((c - expected) ** 2 / expected for c in counts.values())
    stat += (70 - len(counts)) * expected  # graphs never seen
    crit = chi2.isf(0.0027, 69)
    _check("regular uniformity chi^2 (n=6, d=2)", stat <= crit,
           f"chi2 {stat:.1f} vs {crit:.1f} over {len(counts)} graphs", results)
    freq = two_triangles / samples
    sigma = math.sqrt((1 / 7) * (6 / 7) / samples)
    _check("two-triangle probability 1/7", abs(freq - 1 / 7) <= 3 * sigma,
           f"freq {freq:.4f} vs {1 / 7:.4f} (3 sigma {3 * sigma:.4f})", results)

    # boundary-crossing Lipschitz bound under single-coordinate changes
    violations = 0
    rng = np.random.default_rng(sim.substream(rng_seed, 3))
    for _ in range(10_000):
        n, d = 6, 3
        t = graph.sample_selection_tuple(n, d, rng.integers(2 ** 63))
        w = n * d
        pos = int(rng.integers(0, w // 2))
        high = w - 2 * (pos + 1) + 1
        t2 = t.t.copy()
        t2[pos] = 1 + (t2[pos] - 1 + int(rng.integers(1, high))) % high if high > 1 else 1
        t2 = graph.SelectionTuple(n, d, t2)
        b = int(rng.integers(1, w + 1))
        if abs(graph.boundary_crossings(t, b)
               - graph.boundary_crossings(t2, b)) > 2:
            violations += 1
    _check("boundary-crossing Lipschitz |h(t)-h(t')| <= 2", violations == 0,
           f"{violations} violations in 10000 perturbations", results)

    # ER and SBM edge-count means against the binomial expectation
    samples = 500
    m_edges = np.array([graph.generate_er(2000, 0.01,
                                          sim.substream(rng_seed, 4, i)).num_edges
                        for i in range(samples)])
    mean = 0.01 * 2000 * 1999 / 2
    se = math.sqrt(2000 * 1999 / 2 * 0.01 * 0.99) / math.sqrt(samples)
    _check("ER edge-count mean (n=2000, p=0.01)",
           abs(m_edges.mean() - mean) <= 3 * se,
           f"sample mean {m_edges.mean():.1f} vs {mean:.1f} (3 SE {3 * se:.1f})",
           results)
    fam = SbmFamily((0.5, 0.5), ((0.01, 0.0001), (0.0001, 0.01)))
    cross = np.empty(samples)
    for i in range(samples):
        g, classes = fam.sample(1000, sim.substream(rng_seed, 5, i))
        edges = g.edge_array()
        cross[i] = np.count_nonzero(classes[edges[:, 0]] != classes[edges[:, 1]])
    se = math.sqrt(25 * (1 - 0.0001)) / math.sqrt(samples)
    _check("SBM cross-block edge mean 25", abs(cross.mean() - 25) <= 3 * se,
           f"sample mean {cross.mean():.2f} (3 SE {3 * se:.2f})", results)


def _component_sizes(g: graph.Graph) -> list:
    seen = np.zeros(g.n, dtype=bool)
    sizes = []
    for start in range(g.n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        size = 0
        while stack:
            v = stack.pop()
            size += 1
            for w in g.neighbors(v):
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        sizes.append(size)
    return sorted(sizes)


def _suite_oracle(seed: int, results: list) -> None:
    from scipy.linalg import expm

    params = PRESETS["fig2a"]().params
    # uniformization against a dense matrix exponential on 3 nodes
    g3 = graph.Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)])
    state3 = model.SystemState([0, 1, 1], [0, 0, 0])
    q, shares = analysis._full_generator(g3, params, state3.s)
    code = int(np.sum(state3.x * 2 ** np.arange(3)))
    p0 = np.zeros(q.shape[0])
    p0[code] = 1.0
    worst = 0.0
    for t in (0.5, 1.0, 2.0):
        via_expm = p0 @ expm(q.toarray() * t) @ shares
        via_uni = analysis.master_equation_oracle(g3, params, state3, t)
        worst = max(worst, float(np.abs(via_expm - via_uni).max()))
    _check("uniformization vs dense exponential (N=3)", worst <= 1e-8,
           f"max difference {worst:.2e}", results)

    # two-state noise-only chain against the analytic solution
    g1 = graph.Graph.from_edges(1, np.empty((0, 2), dtype=np.int64))
    noise = CnvmParams([[0.0, 0.0], [0.0, 0.0]], [[0.0, 1.0], [1.0, 0.0]])
    got = analysis.master_equation_oracle(
        g1, noise, model.SystemState([0], [0]), 1.0)[0]
    want = 0.5 + 0.5 * math.exp(-2.0)
    _check("single-node analytic chain", abs(got - want) <= 1e-9,
           f"{got:.7f} vs {want:.7f}", results)

    # exact simulation against the master equation on a 5-clique
    g5 = graph.Graph.from_edges(5, [(i, j) for i in range(5)
                                    for j in range(i + 1, 5)])
    state5 = model.SystemState([0, 0, 1, 1, 1], [0] * 5)
    t_grid = np.array([0.0, 0.5, 1.0, 2.0])
    runs = 100_000
    vals = np.empty((runs, 4))
    for i in range(runs):
        traj = sim.gillespie_run(g5, params, state5, t_grid,
                                 sim.substream(seed, 6, i))
        vals[i] = traj.values[:, 0]
    want = analysis.master_equation_oracle(g5, params, state5, t_grid[1:])[:, 0]
    got = vals.mean(axis=0)[1:]
    se = vals.std(axis=0, ddof=1)[1:] / math.sqrt(runs)
    ok = np.all(np.abs(got - want) <= 3 * se)
    detail = "; ".join(f"t={t:g}: sim {g_:.5f} vs exact {w:.5f} (3SE {3 * s:.5f})"
                       for t, g_, w, s in zip(t_grid[1:], got, want, se))
    _check("Gillespie vs master equation (N=5 clique)", bool(ok), detail, results)


def _suite_delta(seed: int, results: list) -> None:
    params = PRESETS["fig2a"]().params
    # zero rates
    zero = CnvmParams(np.zeros((2, 2)), np.zeros((2, 2)))
    g = graph.generate_er(50, 0.2, sim.substream(seed, 7))
    states = analysis.random_states(50, zero, np.zeros(50, dtype=np.int64),
                                    10, sim.substream(seed, 8))
    d0 = analysis.delta_estimate(g, zero, ErFamily(p=0.2), states)
    _check("gap vanishes for zero rates", d0 == 0.0, f"{d0:g}", results)

    # closed form on the complete graph
    n = 10
    gk = graph.Graph.from_edges(n, [(i, j) for i in range(n)
                                    for j in range(i + 1, n)])
    sym = CnvmParams([[0.0, 1.0], [1.0, 0.0]], np.zeros((2, 2)))
    state = model.SystemState([0] * 5 + [1] * 5, [0] * n)
    want = 0.25 / (n - 1)
    got = analysis.delta_estimate(gk, sym, None, [state])
    _check("complete-graph gap closed form", abs(got - want) <= 1e-12,
           f"{got:.8f} vs {want:.8f}", results)

    # decay with system size at p = 4 ln(n) / n
    gaps = []
    for idx, n in enumerate((500, 2000, 8000)):
        p = 4 * math.log(n) / n
        gn = graph.generate_er(n, p, sim.substream(seed, 9, idx))
        states = analysis.random_states(n, params, np.zeros(n, dtype=np.int64),
                                        100, sim.substream(seed, 10, idx))
        gaps.append(analysis.delta_estimate(gn, params, ErFamily(p=p), states))
    ok = gaps[0] > gaps[1] > gaps[2]
    _check("sampled gap decreases with n",
           ok, " > ".join(f"{v:.4f}" for v in gaps), results)


def _suite_concentration(seed: int, results: list) -> None:
    report = analysis.chernoff_check(
        ErFamily(p=0.05), 500, "edge-count",
        epsilons=(100, 200, 300, 450, 600), samples=10_000,
        seed=sim.substream(seed, 11))
    _check("ER edge-count tail bounds (n=500, p=0.05)", report.passed(),
           report.summary().replace("\n", " | "), results)
    report = analysis.chernoff_check(
        ErFamily(p=0.01), 2000, "degree",
        epsilons=(0.25, 0.5, 0.75, 1.0), samples=10_000,
        seed=sim.substream(seed, 12))
    _check("ER degree tail bounds (n=2000, p=0.01)", report.passed(),
           report.summary().replace("\n", " | "), results)


SUITES = {
    "graphs": (_suite_graphs,),
    "oracle": (_suite_oracle,),
    "delta": (_suite_delta,),
    "concentration": (_suite_concentration,),
    "all": (_suite_graphs, _suite_oracle, _suite_delta, _suite_concentration),
}


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r} "
                         f"(try: {' '.join(sorted(SUITES))})")
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get("NETDYN_SEED", "1"))
    results: list = []
    for fn in SUITES[args.suite]:
        fn(seed, results)
    failures = 0
    for name, ok, detail in results:
        tag = "ok  " if ok else "FAIL"
        print(f"{tag} {name}: {detail}")
        failures += not ok
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 0 if failures == 0 else 2


# ---------------------------------------------------------------------------
# Plotting (deterministic SVG)
# ---------------------------------------------------------------------------

_PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
            "#9467bd", "#8c564b", "#e377c2", "#17becf"]


def _read_csv(path: str) -> tuple[np.ndarray, dict]:
    try:
        with open(path) as f:
            header = f.readline().strip().split(",")
            data = np.loadtxt(f, delimiter=",", ndmin=2)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"malformed CSV {path}: {exc}") from exc
    if not header or header[0] != "t" or data.size == 0:
        raise UsageError(f"malformed CSV {path}: need a leading t column")
    if len(header) < 2:
        raise UsageError(f"{path} has no value columns")
    if data.shape[1] != len(header):
        raise UsageError(f"malformed CSV {path}: ragged rows")
    return data[:, 0], {name: data[:, i]
                        for i, name in enumerate(header) if i > 0}


def render_svg(csv_paths, out_path: str) -> None:
    """Line chart of the share columns of one or more trajectory CSVs.

    Columns named ``std_c_*`` are drawn as shaded bands around their mean
    column from the same file; mean curves with bands are dashed, plain
    curves solid. Output is byte-deterministic for fixed inputs.
    """
    series = []   # (label, times, values, std or None, dashed)
    base_times = None
    for path in csv_paths:
        times, cols = _read_csv(path)
        if base_times is None:
            base_times = times
        elif times.shape != base_times.shape or not np.allclose(
                times, base_times, rtol=0, atol=1e-9):
            raise UsageError("CSV files do not share the time column")
        stem = os.path.splitext(os.path.basename(path))[0]
        has_std = any(name.startswith("std_") for name in cols)
        for name, vals in cols.items():
            if name.startswith("std_"):
                continue
            std = cols.get(f"std_{name}")
            series.append((f"{stem}:{name}", times, vals, std, has_std))
    if not series:
        raise UsageError("no value columns to plot")

    width, height = 800.0, 500.0
    ml, mr, mt, mb = 60.0, 20.0, 20.0, 45.0
    t0, t1 = float(base_times[0]), float(base_times[-1])
    y0 = min(0.0, min(float(np.min(v - (s if s is not None else 0)))
                      for _, _, v, s, _ in series))
    y1 = max(1.0, max(float(np.max(v + (s if s is not None else 0)))
                      for _, _, v, s, _ in series))

    def sx(t):
        return ml + (t - t0) / (t1 - t0 or 1.0) * (width - ml - mr)

    def sy(y):
        return height - mb - (y - y0) / (y1 - y0 or 1.0) * (height - mt - mb)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width:g}" height="{height:g}" '
        f'viewBox="0 0 {width:g} {height:g}">',
        f'<rect width="{width:g}" height="{height:g}" fill="white"/>',
        f'<line x1="{ml:.2f}" y1="{height - mb:.2f}" x2="{width - mr:.2f}" '
        f'y2="{height - mb:.2f}" stroke="black"/>',
        f'<line x1="{ml:.2f}" y1="{mt:.2f}" x2="{ml:.2f}" '
        f'y2="{height - mb:.2f}" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        t = t0 + frac * (t1 - t0)
        y = y0 + frac * (y1 - y0)
        parts.append(f'<text x="{sx(t):.2f}" y="{height - mb + 18:.2f}" '
                     f'font-size="12" text-anchor="middle">{t:g}</text>')
        parts.append(f'<text x="{ml - 8:.2f}" y="{sy(y) + 4:.2f}" '
                     f'font-size="12" text-anchor="end">{y:g}</text>')
        parts.append(f'<line x1="{sx(t):.2f}" y1="{height - mb:.2f}" '
                     f'x2="{sx(t):.2f}" y2="{height - mb + 5:.2f}" stroke="black"/>')
        parts.append(f'<line x1="{ml - 5:.2f}" y1="{sy(y):.2f}" '
                     f'x2="{ml:.2f}" y2="{sy(y):.2f}" stroke="black"/>')
    parts.append(f'<text x="{(ml + width - mr) / 2:.2f}" '
                 f'y="{height - 8:.2f}" font-size="13" '
                 f'text-anchor="middle">t</text>')

    for idx, (label, times, vals, std, dashed) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        if std is not None:
            upper = [f"{sx(t):.2f},{sy(v + s):.2f}"
                     for t, v, s in zip(times, vals, std)]
            lower = [f"{sx(t):.2f},{sy(v - s):.2f}"
                     for t, v, s in zip(times[::-1], vals[::-1], std[::-1])]
            parts.append(f'<polygon points="{" ".join(upper + lower)}" '
                         f'fill="{color}" fill-opacity="0.2" stroke="none"/>')
        pts = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(times, vals))
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"{dash}/>')
        parts.append(f'<text x="{width - mr - 8:.2f}" '
                     f'y="{mt + 16 + 16 * idx:.2f}" font-size="12" '
                     f'text-anchor="end" fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(out_path, "w") as f:
        f.write("\n".join(parts) + "\n")


def cmd_plot(args) -> int:
    render_svg(args.csv, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_presets(args) -> int:
    for name in sorted(PRESETS):
        print(name)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="netdyn", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("--preset", help="preset name (see `netdyn presets`)")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        p.add_argument("--out", help="output path/prefix")
        p.add_argument("--scale-n", type=int, dest="scale_n",
                       help="override the number of nodes")
        p.add_argument("--scale-r", type=int, dest="scale_r",
                       help="override the number of realizations")

    p = sub.add_parser("simulate", help="single trajectory to CSV")
    add_config_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment",
                       help="ensemble + mean-field comparison artifacts")
    add_config_args(p)
    p.add_argument("--threads", type=int, help="worker threads")
    p.add_argument("--h", type=float, default=0.01,
                   help="mean-field integrator step")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", help="statistical verification suites")
    p.add_argument("suite", help="graphs | oracle | delta | concentration | all")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="render trajectory CSVs as an SVG chart")
    p.add_argument("csv", nargs="+", help="CSV files sharing the t column")
    p.add_argument("--out", required=True, help="output SVG path")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("presets", help="list experiment presets")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RegularGraphError, meanfield.StepSizeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
