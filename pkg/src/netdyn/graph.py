"""Simple undirected graphs and random-graph generators.

Provides the graph container used by the dynamics plus three samplers:
Erdos-Renyi G(n, p), the stochastic block model, and uniformly random
d-regular graphs obtained from the configuration model (half-edge pairing
conditioned on simplicity).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba as nb
import numpy as np


class RegularGraphError(RuntimeError):
    """Regular-graph sampling exhausted its attempt budget."""


# ---------------------------------------------------------------------------
# Graph containers
# ---------------------------------------------------------------------------

class Graph:
    """Immutable simple undirected graph stored as CSR adjacency lists.

    Nodes are ``0..n-1``; ``indices[indptr[i]:indptr[i+1]]`` holds the
    sorted neighbors of node ``i``. No self-loops, no parallel edges,
    and the adjacency is symmetric.
    """

    __slots__ = ("n", "indptr", "indices")

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray):
        self.n = int(n)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        """Build a graph from an array of (i, j) node pairs, one per edge.

        Rejects self-loops and duplicate edges.
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError("edge endpoint out of range")
            lo = edges.min(axis=1)
            hi = edges.max(axis=1)
            if np.any(lo == hi):
                raise ValueError("self-loop in edge list")
            key = lo * n + hi
            if np.unique(key).size != key.size:
                raise ValueError("duplicate edge in edge list")
            src = np.concatenate((lo, hi))
            dst = np.concatenate((hi, lo))
        else:
            src = np.empty(0, dtype=np.int64)
            dst = np.empty(0, dtype=np.int64)
        order = np.lexsort((dst, src))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(n, indptr, dst[order])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def degree(self, i: int) -> int:
        return int(self.indptr[i + 1] - self.indptr[i])

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def num_edges(self) -> int:
        return self.indices.size // 2

    def edge_array(self) -> np.ndarray:
        """All edges as an (m, 2) array with i < j, sorted lexicographically."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        keep = src < self.indices
        return np.column_stack((src[keep], self.indices[keep]))

    def validate(self) -> None:
        """Check all structural invariants; raise ValueError on violation."""
        if self.n < 0 or self.indptr.shape != (self.n + 1,):
            raise ValueError("malformed indptr")
        if self.indptr[0] != 0 or self.indptr[-1] != self.indices.size:
            raise ValueError("indptr does not span indices")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("indptr not monotone")
        if self.indices.size:
            if self.indices.min() < 0 or self.indices.max() >= self.n:
                raise ValueError("neighbor index out of range")
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        if np.any(src == self.indices):
            raise ValueError("self-loop")
        for i in range(self.n):
            row = self.neighbors(i)
            if row.size > 1 and np.any(np.diff(row) <= 0):
                raise ValueError("adjacency row not strictly sorted")
        fwd = np.lexsort((self.indices, src))
        bwd = np.lexsort((src, self.indices))
        if not (np.array_equal(src[fwd], self.indices[bwd])
                and np.array_equal(self.indices[fwd], src[bwd])):
            raise ValueError("adjacency not symmetric")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __hash__(self):
        return hash((self.n, self.indices.size))

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.num_edges})"


@dataclass(frozen=True, eq=False)
class MultiGraph:
    """Multigraph as a list of unordered node pairs; self-loops and parallel
    edges are allowed."""

    n: int
    edges: np.ndarray  # (eta, 2) node pairs

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    def is_simple(self) -> bool:
        lo = self.edges.min(axis=1)
        hi = self.edges.max(axis=1)
        if np.any(lo == hi):
            return False
        key = lo * self.n + hi
        return np.unique(key).size == key.size

    def to_graph(self) -> Graph:
        if not self.is_simple():
            raise ValueError("multigraph has self-loops or parallel edges")
        return Graph.from_edges(self.n, self.edges)


@dataclass(frozen=True, eq=False)
class Configuration:
    """Perfect matching of the half-edge set {0, ..., n*d - 1}.

    Half-edges ``i*d .. i*d + d - 1`` belong to node ``i``. ``pairs`` holds
    the eta = n*d/2 matched pairs, each with the smaller half-edge first.
    """

    n: int
    d: int
    pairs: np.ndarray  # (eta, 2) half-edge ids

    def __post_init__(self):
        w = self.n * self.d
        if w % 2 != 0:
            raise ValueError("n*d must be even")
        flat = self.pairs.ravel()
        if flat.size != w or np.unique(flat).size != w:
            raise ValueError("pairs are not a partition of the half-edge set")
        if flat.size and (flat.min() < 0 or flat.max() >= w):
            raise ValueError("half-edge id out of range")


@dataclass(frozen=True, eq=False)
class SelectionTuple:
    """Integer tuple that encodes a configuration.

    Component ``t[r]`` (0-based position r, values 1-based) selects the
    partner of the smallest remaining half-edge at pairing step r+1 and
    must lie in ``{1, ..., n*d - 2(r+1) + 1}``.
    """

    n: int
    d: int
    t: np.ndarray

    def __post_init__(self):
        w = self.n * self.d
        if w % 2 != 0:
            raise ValueError("n*d must be even")
        t = np.asarray(self.t, dtype=np.int64)
        object.__setattr__(self, "t", t)
        if t.shape != (w // 2,):
            raise ValueError("tuple length must be n*d/2")
        highs = w - 2 * np.arange(1, w // 2 + 1, dtype=np.int64) + 1
        if np.any(t < 1) or np.any(t > highs):
            raise ValueError("tuple component out of range")


# ---------------------------------------------------------------------------
# Bernoulli pair sampling (shared by the ER and SBM generators)
# ---------------------------------------------------------------------------

def _bernoulli_hits(rng: np.random.Generator, total: int, p: float) -> np.ndarray:
    """Indices of successes among ``total`` iid Bernoulli(p) trials.

    Samples geometric inter-success gaps, so the cost is O(expected number
    of successes) rather than O(total).
    """
    if total <= 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(total, dtype=np.int64)
    # geometric gaps via the inverse CDF, in float64 so that tiny p cannot
    # overflow (a gap beyond `total` simply ends the scan)
    log_q = np.log1p(-p)
    chunks = []
    pos = -1.0
    while True:
        size = int((total - pos) * p * 1.1) + 4 * int(np.sqrt((total - pos) * p)) + 16
        with np.errstate(over="ignore"):  # inf gap = no hit before the end
            gaps = np.floor(np.log1p(-rng.random(size)) / log_q) + 1.0
        positions = pos + np.cumsum(gaps)
        inside = positions < total
        chunks.append(positions[inside].astype(np.int64))
        if not inside.all():
            break
        pos = float(positions[-1])
    return np.concatenate(chunks)


def _triangular_pairs(hits: np.ndarray, n: int, offset: int = 0) -> np.ndarray:
    """Decode lexicographic linear indices over unordered pairs (i < j) of
    ``{0, ..., n-1}`` into node pairs, shifted by ``offset``."""
    if hits.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    # row i starts at base(i) = i*(2n - i - 1)/2; invert the quadratic and
    # fix floating-point off-by-ones explicitly
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * hits)) / 2.0).astype(np.int64)
    np.clip(i, 0, n - 2, out=i)
    base = i * (2 * n - i - 1) // 2
    i -= base > hits
    base = i * (2 * n - i - 1) // 2
    i += hits >= base + (n - 1 - i)
    base = i * (2 * n - i - 1) // 2
    j = hits - base + i + 1
    return np.column_stack((i + offset, j + offset))


def _rectangular_pairs(hits: np.ndarray, rows_offset: int, cols_offset: int,
                       num_cols: int) -> np.ndarray:
    if hits.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    return np.column_stack((rows_offset + hits // num_cols,
                            cols_offset + hits % num_cols))


# ---------------------------------------------------------------------------
# Erdos-Renyi and stochastic block model
# ---------------------------------------------------------------------------

def generate_er(n: int, p: float, seed) -> Graph:
    """Sample an Erdos-Renyi graph G(n, p).

    Each of the n(n-1)/2 unordered node pairs becomes an edge independently
    with probability p. Deterministic given the seed.

    Args:
        n: Number of nodes (>= 1).
        p: Edge probability in [0, 1].
        seed: Seed or numpy SeedSequence for the sampling stream.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError("edge probability must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    hits = _bernoulli_hits(rng, n * (n - 1) // 2, p)
    return Graph.from_edges(n, _triangular_pairs(hits, n))


def generate_sbm(n: int, block_fractions, probs, seed,
                 scale=1.0) -> tuple[Graph, np.ndarray]:
    """Sample a stochastic block model graph.

    Nodes are laid out in consecutive blocks: the first ``n*b_1`` nodes form
    block 0, the next ``n*b_2`` block 1, and so on. A pair with one node in
    block k and one in block k' is an edge independently with probability
    ``scale * probs[k, k']``. ``scale`` may be a scalar or a symmetric
    matrix (per-pair thinning).

    Args:
        n: Number of nodes; every ``b_k * n`` must be an integer.
        block_fractions: Positive block sizes as fractions summing to 1.
        probs: Symmetric K x K matrix of edge probabilities in [0, 1];
            every row must contain a positive entry.
        seed: Seed for the sampling stream.
        scale: Thinning factor(s) in [0, 1].

    Returns:
        (graph, classes) where ``classes[i]`` is the block of node i.
    """
    b = np.asarray(block_fractions, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    k = b.size
    if np.any(b <= 0) or abs(b.sum() - 1.0) > 1e-9:
        raise ValueError("block fractions must be positive and sum to 1")
    if probs.shape != (k, k):
        raise ValueError("probs must be K x K")
    if not np.allclose(probs, probs.T, rtol=0, atol=0):
        raise ValueError("probs must be symmetric")
    if np.any(probs < 0) or np.any(probs > 1):
        raise ValueError("probs entries must lie in [0, 1]")
    if np.any(probs.max(axis=1) <= 0):
        raise ValueError("every block needs a positive connection probability")
    scale = np.asarray(scale, dtype=np.float64)
    if scale.ndim == 0:
        scale = np.full((k, k), float(scale))
    if scale.shape != (k, k) or np.any(scale < 0) or np.any(scale > 1):
        raise ValueError("scale must be a scalar or K x K matrix in [0, 1]")
    if not np.allclose(scale, scale.T, rtol=0, atol=0):
        raise ValueError("scale matrix must be symmetric")
    sizes_f = b * n
    sizes = np.rint(sizes_f).astype(np.int64)
    if np.any(np.abs(sizes_f - sizes) > 1e-9) or sizes.sum() != n:
        raise ValueError("block sizes b_k * n must be integers")
    starts = np.concatenate(([0], np.cumsum(sizes)))

    rng = np.random.default_rng(seed)
    effective = scale * probs
    parts = []
    for a in range(k):
        for c in range(a, k):
            pr = effective[a, c]
            if a == c:
                s = int(sizes[a])
                hits = _bernoulli_hits(rng, s * (s - 1) // 2, pr)
                parts.append(_triangular_pairs(hits, s, offset=int(starts[a])))
            else:
                total = int(sizes[a]) * int(sizes[c])
                hits = _bernoulli_hits(rng, total, pr)
                parts.append(_rectangular_pairs(hits, int(starts[a]),
                                                int(starts[c]), int(sizes[c])))
    edges = np.concatenate(parts) if parts else np.empty((0, 2), dtype=np.int64)
    classes = np.repeat(np.arange(k, dtype=np.int64), sizes)
    return Graph.from_edges(n, edges), classes


# ---------------------------------------------------------------------------
# Configuration model
# ---------------------------------------------------------------------------

@nb.njit(cache=True)
def _psi_pairs(t: np.ndarray, w: int) -> np.ndarray:
    """Pairing procedure: at step r, match the smallest remaining half-edge
    with the (t[r]+1)-th smallest remaining one.

    A Fenwick tree over presence flags gives O(log w) order-statistic
    selection, O(w log w) overall.
    """
    tree = np.zeros(w + 1, dtype=np.int64)
    for i in range(1, w + 1):
        tree[i] += 1
        j = i + (i & -i)
        if j <= w:
            tree[j] += tree[i]
    top = 1
    while top * 2 <= w:
        top *= 2
    eta = w // 2
    pairs = np.empty((eta, 2), dtype=np.int64)
    for r in range(eta):
        first = _fenwick_kth(tree, w, top, 0)
        _fenwick_add(tree, w, first + 1, -1)
        partner = _fenwick_kth(tree, w, top, t[r] - 1)
        _fenwick_add(tree, w, partner + 1, -1)
        pairs[r, 0] = first
        pairs[r, 1] = partner
    return pairs


@nb.njit(cache=True)
def _fenwick_kth(tree: np.ndarray, w: int, top: int, k: int) -> int:
    """0-based id of the element with k items of the tree before it."""
    pos = 0
    rem = k + 1
    bit = top
    while bit > 0:
        nxt = pos + bit
        if nxt <= w and tree[nxt] < rem:
            pos = nxt
            rem -= tree[nxt]
        bit >>= 1
    return pos


@nb.njit(cache=True)
def _fenwick_add(tree: np.ndarray, w: int, i: int, delta: int) -> None:
    while i <= w:
        tree[i] += delta
        i += i & -i


def sample_selection_tuple(n: int, d: int, seed) -> SelectionTuple:
    """Draw a uniformly random selection tuple for the (n, d) half-edge set.

    Component r (1-based) is uniform on ``{1, ..., n*d - 2r + 1}``,
    independently of the others.
    """
    w = n * d
    if w % 2 != 0:
        raise ValueError("n*d must be even")
    rng = np.random.default_rng(seed)
    highs = w - 2 * np.arange(1, w // 2 + 1, dtype=np.int64) + 1
    t = rng.integers(1, highs, endpoint=True, dtype=np.int64)
    return SelectionTuple(n, d, t)


def psi(t: SelectionTuple) -> Configuration:
    """Deterministically expand a selection tuple into a configuration."""
    pairs = _psi_pairs(t.t, t.n * t.d)
    return Configuration(t.n, t.d, pairs)


def gamma(f: Configuration) -> MultiGraph:
    """Project a configuration to its multigraph: half-edges i*d..i*d+d-1
    belong to node i, and each matched pair becomes an edge."""
    return MultiGraph(f.n, f.pairs // f.d)


def boundary_crossings(t: SelectionTuple, b: int) -> int:
    """Number of pairs (s, e) of psi(t) crossing boundary b: s <= b < e,
    with half-edges counted 1-based."""
    w = t.n * t.d
    if not 1 <= b <= w:
        raise ValueError("boundary out of range")
    pairs = _psi_pairs(t.t, w) + 1
    return int(np.count_nonzero((pairs[:, 0] <= b) & (b < pairs[:, 1])))


def _suitable_pair_exists(edges: set, stub_counts: dict) -> bool:
    """Whether any two leftover stubs can still form a fresh edge."""
    if not stub_counts:
        return True
    nodes = list(stub_counts)
    for idx, u in enumerate(nodes):
        for v in nodes[idx:]:
            if u == v:
                continue
            a, c = (u, v) if u < v else (v, u)
            if (a, c) not in edges:
                return True
    return False


def _pairing_attempt(n: int, d: int, rng: np.random.Generator) -> Optional[set]:
    """One attempt at building a d-regular simple graph by matching stubs,
    re-shuffling colliding stubs until none are left or no suitable pair
    remains."""
    edges: set = set()
    stubs = np.repeat(np.arange(n), d)
    while stubs.size:
        stubs = rng.permutation(stubs)
        leftover = []
        counts: dict = {}
        for u, v in zip(stubs[::2].tolist(), stubs[1::2].tolist()):
            if u > v:
                u, v = v, u
            if u != v and (u, v) not in edges:
                edges.add((u, v))
            else:
                leftover.append(u)
                leftover.append(v)
                counts[u] = counts.get(u, 0) + 1
                counts[v] = counts.get(v, 0) + 1
        if not _suitable_pair_exists(edges, counts):
            return None
        stubs = np.asarray(leftover, dtype=np.int64)
    return edges


def generate_regular(n: int, d: int, seed, max_attempts: int = 10_000,
                     method: str = "auto") -> Graph:
    """Sample a uniformly random d-regular simple graph on n nodes.

    ``method="exact"`` draws configurations from uniformly random selection
    tuples and rejects any that induce self-loops or parallel edges; this is
    exactly uniform but the acceptance rate decays like exp(-lam*(lam+1))
    with lam = (d-1)/2, so it is only viable for small d. ``method="pairing"``
    matches stubs with local retries (asymptotically uniform, fast for any
    d < n). ``method="auto"`` picks the exact sampler whenever its expected
    number of attempts is below ~1000.

    Raises RegularGraphError when max_attempts is exhausted.
    """
    if n < 1 or d < 0 or d >= n:
        raise ValueError("need 0 <= d < n")
    if (n * d) % 2 != 0:
        raise ValueError("n*d must be even")
    if d == 0:
        return Graph.from_edges(n, np.empty((0, 2), dtype=np.int64))
    if method == "auto":
        lam = (d - 1) / 2.0
        method = "exact" if lam * (lam + 1) <= np.log(1000.0) else "pairing"
    rng = np.random.default_rng(seed)
    if method == "exact":
        w = n * d
        highs = w - 2 * np.arange(1, w // 2 + 1, dtype=np.int64) + 1
        for _ in range(max_attempts):
            t = rng.integers(1, highs, endpoint=True, dtype=np.int64)
            multi = MultiGraph(n, _psi_pairs(t, w) // d)
            if multi.is_simple():
                return multi.to_graph()
        raise RegularGraphError(
            f"no simple graph in {max_attempts} configuration samples "
            f"(n={n}, d={d}); expected attempts grow like exp(lam*(lam+1))")
    if method == "pairing":
        for _ in range(max_attempts):
            edges = _pairing_attempt(n, d, rng)
            if edges is not None:
                return Graph.from_edges(n, sorted(edges))
        raise RegularGraphError(
            f"stub pairing failed {max_attempts} times (n={n}, d={d})")
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Edge-list text format
# ---------------------------------------------------------------------------

def dump_edgelist(g: Graph, f) -> None:
    """Write ``g`` as text: first line "n m", then one "i j" line per edge
    with i < j, sorted lexicographically."""
    close = False
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        f = open(f, "w")
        close = True
    try:
        f.write(f"{g.n} {g.num_edges}\n")
        for i, j in g.edge_array():
            f.write(f"{i} {j}\n")
    finally:
        if close:
            f.close()


def load_edgelist(f) -> Graph:
    """Read a graph written by :func:`dump_edgelist`."""
    close = False
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        f = open(f)
        close = True
    try:
        header = f.readline().split()
        if len(header) != 2:
            raise ValueError("bad edge-list header")
        n, m = int(header[0]), int(header[1])
        edges = np.loadtxt(f, dtype=np.int64, ndmin=2) if m else np.empty((0, 2), np.int64)
    finally:
        if close:
            f.close()
    if edges.shape != (m, 2):
        raise ValueError("edge count does not match header")
    return Graph.from_edges(n, edges)
