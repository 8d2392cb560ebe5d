"""Noisy voter dynamics: parameters, system states, collective variables,
and the exact/reduced transition propensities.

A node with opinion m adopts opinion n at rate
``r[k, m, n] * (fraction of n-neighbors) + r_tilde[k, m, n]`` where k is the
node's (fixed) class. Isolated nodes feel only the noise term.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .graph import Graph, generate_er, generate_regular, generate_sbm


class CnvmParams:
    """Per-class imitation and noise rate matrices.

    ``r`` and ``r_tilde`` have shape (K, M, M); a 2-D (M, M) input is
    treated as a single class (and tiled if ``num_classes`` asks for more).
    Diagonal entries are ignored and stored as zero: exit rates are defined
    purely by the off-diagonals.
    """

    def __init__(self, r, r_tilde, num_classes: Optional[int] = None):
        r = np.asarray(r, dtype=np.float64)
        rt = np.asarray(r_tilde, dtype=np.float64)
        if r.ndim == 2:
            r = r[None, :, :]
        if rt.ndim == 2:
            rt = rt[None, :, :]
        if num_classes is not None:
            if r.shape[0] == 1 and num_classes > 1:
                r = np.repeat(r, num_classes, axis=0)
            if rt.shape[0] == 1 and num_classes > 1:
                rt = np.repeat(rt, num_classes, axis=0)
        if r.ndim != 3 or r.shape[1] != r.shape[2]:
            raise ValueError("r must be an (K, M, M) array")
        if rt.shape != r.shape:
            raise ValueError("r and r_tilde shapes differ")
        if r.shape[1] < 2:
            raise ValueError("need at least two opinions")
        if num_classes is not None and r.shape[0] != num_classes:
            raise ValueError("rate matrices do not match num_classes")
        off = ~np.eye(r.shape[1], dtype=bool)
        if (not np.all(np.isfinite(r[:, off])) or np.any(r[:, off] < 0)
                or not np.all(np.isfinite(rt[:, off])) or np.any(rt[:, off] < 0)):
            raise ValueError("off-diagonal rates must be finite and >= 0")
        self.r = r.copy()
        self.r_tilde = rt.copy()
        diag = np.arange(r.shape[1])
        self.r[:, diag, diag] = 0.0
        self.r_tilde[:, diag, diag] = 0.0

    @property
    def m(self) -> int:
        return self.r.shape[1]

    @property
    def k(self) -> int:
        return self.r.shape[0]

    @property
    def rate_bound(self) -> float:
        """Upper bound B on any single node's per-target transition rate."""
        return float((self.r + self.r_tilde).max())

    def __repr__(self):
        return f"CnvmParams(M={self.m}, K={self.k}, B={self.rate_bound:g})"


@dataclass(frozen=True, eq=False)
class SystemState:
    """Opinions ``x`` and fixed classes ``s``, one entry per node."""

    x: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.int64)
        s = np.ascontiguousarray(self.s, dtype=np.int64)
        if x.shape != s.shape or x.ndim != 1:
            raise ValueError("x and s must be 1-D arrays of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return self.x.size

    def check(self, params: CnvmParams, g: Optional[Graph] = None) -> None:
        if g is not None and self.n != g.n:
            raise ValueError("state length does not match graph size")
        if self.x.size and (self.x.min() < 0 or self.x.max() >= params.m):
            raise ValueError("opinion out of range")
        if self.s.size and (self.s.min() < 0 or self.s.max() >= params.k):
            raise ValueError("class out of range")


@dataclass(frozen=True, eq=False)
class CollectiveState:
    """Counts of each extended state (m, k), flattened m-major.

    Index of (m, k) is ``m * K + k``. ``shares`` divides by n once, so the
    integer counts always sum to exactly n.
    """

    counts: np.ndarray
    n: int
    m: int
    k: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.shape != (self.m * self.k,):
            raise ValueError("counts length must be M*K")
        if counts.sum() != self.n or np.any(counts < 0):
            raise ValueError("counts must be nonnegative and sum to n")

    @property
    def shares(self) -> np.ndarray:
        return self.counts / self.n


def state_index(m: int, k: int, num_classes: int) -> int:
    """Flat index of extended state (m, k) in a collective vector."""
    return m * num_classes + k


def collective_variable(state: SystemState, params: CnvmParams) -> CollectiveState:
    """Count the share of each extended state (opinion, class)."""
    idx = state.x * params.k + state.s
    counts = np.bincount(idx, minlength=params.m * params.k)
    return CollectiveState(counts.astype(np.int64), state.n, params.m, params.k)


def neighbor_opinion_count(g: Graph, state: SystemState, i: int, n: int) -> int:
    """Number of neighbors of node i holding opinion n."""
    return int(np.count_nonzero(state.x[g.neighbors(i)] == n))


def node_rate(g: Graph, state: SystemState, params: CnvmParams,
              i: int, n: int) -> float:
    """Rate at which node i switches to opinion n (n != current opinion)."""
    m = int(state.x[i])
    if n == m:
        raise ValueError("target opinion equals current opinion")
    k = int(state.s[i])
    deg = g.degree(i)
    if deg == 0:
        return float(params.r_tilde[k, m, n])
    frac = neighbor_opinion_count(g, state, i, n) / deg
    return float(params.r[k, m, n] * frac + params.r_tilde[k, m, n])


def neighbor_count_matrix(g: Graph, x: np.ndarray, num_opinions: int) -> np.ndarray:
    """(n, M) matrix whose (i, m) entry counts i's neighbors with opinion m."""
    cnt = np.zeros((g.n, num_opinions), dtype=np.int64)
    src = np.repeat(np.arange(g.n, dtype=np.int64), g.degrees)
    np.add.at(cnt, (src, x[g.indices]), 1)
    return cnt


def propensity_table_exact(g: Graph, state: SystemState,
                           params: CnvmParams) -> np.ndarray:
    """Cumulative transition rates for all transitions, as a (K, M, M) array
    with entry [k, m, n] = sum of node rates m->n over nodes in (m, k)."""
    m_op, k_cl = params.m, params.k
    cnt = neighbor_count_matrix(g, state.x, m_op)
    deg = g.degrees
    frac = np.zeros((g.n, m_op))
    nz = deg > 0
    frac[nz] = cnt[nz] / deg[nz, None]
    group = state.x * k_cl + state.s
    # per-group sums of neighbor fractions and group sizes
    frac_sums = np.zeros((m_op * k_cl, m_op))
    np.add.at(frac_sums, group, frac)
    sizes = np.bincount(group, minlength=m_op * k_cl)
    frac_sums = frac_sums.reshape(m_op, k_cl, m_op)
    sizes = sizes.reshape(m_op, k_cl)
    # alpha[k, m, n] = r[k,m,n] * sum_i frac[i, n] + |group| * rt[k,m,n]
    alpha = (params.r * np.moveaxis(frac_sums, 1, 0)
             + params.r_tilde * sizes.T[:, :, None])
    diag = np.arange(m_op)
    alpha[:, diag, diag] = 0.0
    return alpha


def propensity_exact(g: Graph, state: SystemState, params: CnvmParams,
                     m: int, n: int, k: int = 0) -> float:
    """Cumulative rate of the transition (m, k) -> n over the whole graph."""
    if m == n:
        raise ValueError("target opinion equals source opinion")
    return float(propensity_table_exact(g, state, params)[k, m, n])


# ---------------------------------------------------------------------------
# Graph families and reduced propensities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErFamily:
    """Erdos-Renyi graphs with edge probability p; optional fixed class
    layout in consecutive blocks for heterogeneous populations."""

    p: float
    class_fractions: Optional[tuple] = None

    def sample(self, n: int, seed) -> tuple[Graph, np.ndarray]:
        return generate_er(n, self.p, seed), self.classes(n)

    def classes(self, n: int) -> np.ndarray:
        if self.class_fractions is None:
            return np.zeros(n, dtype=np.int64)
        fr = np.asarray(self.class_fractions, dtype=np.float64)
        sizes_f = fr * n
        sizes = np.rint(sizes_f).astype(np.int64)
        if np.any(np.abs(sizes_f - sizes) > 1e-9) or sizes.sum() != n:
            raise ValueError("class sizes must be integers")
        return np.repeat(np.arange(fr.size, dtype=np.int64), sizes)

    @property
    def num_classes(self) -> int:
        return 1 if self.class_fractions is None else len(self.class_fractions)


@dataclass(frozen=True)
class RegularFamily:
    """Uniformly random d-regular graphs (single class)."""

    d: int
    max_attempts: int = 10_000
    method: str = "auto"

    def sample(self, n: int, seed) -> tuple[Graph, np.ndarray]:
        g = generate_regular(n, self.d, seed, self.max_attempts, self.method)
        return g, self.classes(n)

    def classes(self, n: int) -> np.ndarray:
        return np.zeros(n, dtype=np.int64)

    @property
    def num_classes(self) -> int:
        return 1


@dataclass(frozen=True)
class SbmFamily:
    """Stochastic block model; classes are the blocks. A scalar or per-pair
    ``scale`` thins the edge probabilities used for sampling, and the
    scaled matrix also sets the block coupling of the reduced dynamics
    (a scalar scale cancels there)."""

    block_fractions: tuple
    probs: tuple
    scale: Union[float, tuple] = 1.0

    def sample(self, n: int, seed) -> tuple[Graph, np.ndarray]:
        return generate_sbm(n, self.block_fractions, self.probs, seed,
                            scale=self.scale)

    def classes(self, n: int) -> np.ndarray:
        fr = np.asarray(self.block_fractions, dtype=np.float64)
        sizes = np.rint(fr * n).astype(np.int64)
        if sizes.sum() != n:
            raise ValueError("block sizes must be integers")
        return np.repeat(np.arange(fr.size, dtype=np.int64), sizes)

    @property
    def num_classes(self) -> int:
        return len(self.block_fractions)

    def effective_probs(self) -> np.ndarray:
        p = np.asarray(self.probs, dtype=np.float64)
        s = np.asarray(self.scale, dtype=np.float64)
        return (s * p) if s.ndim else (float(s) * p)

    def mean_block_prob(self) -> np.ndarray:
        """pbar[k] = sum_k' b_k' p_eff[k, k']; must be positive for the
        reduced propensities to exist."""
        b = np.asarray(self.block_fractions, dtype=np.float64)
        return self.effective_probs() @ b


Family = Union[ErFamily, RegularFamily, SbmFamily, None]


def propensity_table_reduced(c: np.ndarray, params: CnvmParams,
                             family: Family = None) -> np.ndarray:
    """Reduced propensities from a collective vector, as (K, M, M).

    For ER / regular graphs (and ``family=None``):
        alpha[k, m, n] = c_(m,k) * (r[k,m,n] * c_n + rt[k,m,n]),
    with c_n the total share of opinion n. For the stochastic block model
    the mixing share c_n is reweighted by the block coupling
    p[k, k'] / pbar_k.
    """
    m_op, k_cl = params.m, params.k
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (m_op * k_cl,):
        raise ValueError("collective vector length must be M*K")
    cmk = c.reshape(m_op, k_cl)
    if isinstance(family, SbmFamily):
        if family.num_classes != k_cl:
            raise ValueError("family block count does not match params K")
        pbar = family.mean_block_prob()
        if np.any(pbar <= 0):
            raise ValueError("every block needs a positive mean edge "
                             "probability")
        mixing = (cmk @ family.effective_probs().T) / pbar  # (M, K)
        mixing = mixing.T  # (K, M): coupling-weighted share of opinion n
    else:
        mixing = np.broadcast_to(cmk.sum(axis=1), (k_cl, m_op))
    alpha = cmk.T[:, :, None] * (params.r * mixing[:, None, :] + params.r_tilde)
    diag = np.arange(m_op)
    alpha[:, diag, diag] = 0.0
    return alpha


def propensity_reduced(c, params: CnvmParams, family: Family,
                       m: int, n: int, k: int = 0) -> float:
    """Reduced (share-only) propensity of the transition (m, k) -> n."""
    if m == n:
        raise ValueError("target opinion equals source opinion")
    return float(propensity_table_reduced(c, params, family)[k, m, n])


# ---------------------------------------------------------------------------
# Parameter files
# ---------------------------------------------------------------------------

def params_to_dict(params: CnvmParams, family: Family = None) -> dict:
    doc = {
        "M": params.m,
        "K": params.k,
        "r": params.r.tolist(),
        "r_tilde": params.r_tilde.tolist(),
    }
    if isinstance(family, ErFamily):
        doc["family"] = "er"
        doc["p"] = family.p
        if family.class_fractions is not None:
            doc["class_fractions"] = list(family.class_fractions)
    elif isinstance(family, RegularFamily):
        doc["family"] = "regular"
        doc["d"] = family.d
    elif isinstance(family, SbmFamily):
        doc["family"] = "sbm"
        doc["block_fractions"] = list(family.block_fractions)
        doc["probs"] = np.asarray(family.probs, dtype=float).tolist()
        scale = np.asarray(family.scale, dtype=float)
        doc["scale"] = scale.tolist() if scale.ndim else float(scale)
    return doc


def family_from_dict(doc: dict) -> Family:
    kind = doc.get("family")
    if kind == "er":
        cf = doc.get("class_fractions")
        return ErFamily(p=float(doc["p"]),
                        class_fractions=tuple(cf) if cf else None)
    if kind == "regular":
        return RegularFamily(d=int(doc["d"]))
    if kind == "sbm":
        probs = tuple(tuple(row) for row in doc["probs"])
        scale = doc.get("scale", 1.0)
        if isinstance(scale, list):
            scale = tuple(tuple(row) for row in scale)
        return SbmFamily(block_fractions=tuple(doc["block_fractions"]),
                         probs=probs, scale=scale)
    if kind is None:
        return None
    raise ValueError(f"unknown graph family {kind!r}")


def params_from_dict(doc: dict) -> tuple[CnvmParams, Family]:
    params = CnvmParams(doc["r"], doc["r_tilde"],
                        num_classes=doc.get("K"))
    if "M" in doc and params.m != int(doc["M"]):
        raise ValueError("rate matrix size disagrees with M")
    return params, family_from_dict(doc)


def save_params(path, params: CnvmParams, family: Family = None) -> None:
    with open(path, "w") as f:
        json.dump(params_to_dict(params, family), f, indent=2)
        f.write("\n")


def load_params(path) -> tuple[CnvmParams, Family]:
    with open(path) as f:
        return params_from_dict(json.load(f))
