"""Directed graphs, incidence operators, Laplacians, lifts, trees and generators.

Conventions: an edge ``e = (u, v)`` has head ``u`` and tail ``v``.  The
signed incidence matrix is ``B = H - T`` with ``B[e, u] = +1`` and
``B[e, v] = -1``.  The directed Laplacian is ``B^T W H`` and the undirected
Laplacian of the underlying graph is ``B^T W B``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    DimensionMismatch,
    Disconnected,
    InfeasibleParameters,
    NonPositiveWeight,
    NotATree,
    ParseError,
    SelfLoop,
    VertexOutOfRange,
)

__all__ = [
    "DirectedGraph",
    "SpanningTree",
    "BipartiteLift",
    "build_graph",
    "degree_imbalance",
    "absolute_degrees",
    "is_eulerian",
    "directed_laplacian_apply",
    "undirected_laplacian_apply",
    "bipartite_lift",
    "spanning_tree",
    "components",
    "is_connected",
    "random_eulerian",
    "random_bidirected",
    "random_undirected",
    "orient_undirected",
    "read_edge_list",
    "write_edge_list",
    "format_edge_list",
    "parse_edge_list",
]


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Weighted directed graph on vertices ``0..n-1``.

    Use :func:`build_graph` to construct one from an arbitrary edge list; it
    validates, merges parallel edges and sorts edges by ``(head, tail)``.
    The constructor itself only validates, so an already canonical edge
    order (for example a subset of another graph's edges) is preserved.
    """

    n: int
    head: np.ndarray
    tail: np.ndarray
    weight: np.ndarray
    _checked: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "head", _frozen(self.head, np.int64))
        object.__setattr__(self, "tail", _frozen(self.tail, np.int64))
        object.__setattr__(self, "weight", _frozen(self.weight, np.float64))
        if not (self.head.shape == self.tail.shape == self.weight.shape):
            raise DimensionMismatch("head, tail and weight must have equal length")
        if self.n < 0:
            raise InfeasibleParameters("vertex count must be nonnegative")
        if self._checked and self.m:
            _validate(self.n, self.head, self.tail, self.weight)

    @property
    def m(self) -> int:
        return int(self.head.shape[0])

    def __repr__(self):
        return f"DirectedGraph(n={self.n}, m={self.m}, total_weight={self.total_weight:.6g})"

    @property
    def total_weight(self) -> float:
        return float(self.weight.sum())

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Signed incidence ``B`` (m x n), ``+1`` at the head."""
        rows = np.concatenate([np.arange(self.m), np.arange(self.m)])
        cols = np.concatenate([self.head, self.tail])
        vals = np.concatenate([np.ones(self.m), -np.ones(self.m)])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.m, self.n))

    @cached_property
    def head_indicator(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (np.ones(self.m), (np.arange(self.m), self.head)), shape=(self.m, self.n)
        )

    @cached_property
    def tail_indicator(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (np.ones(self.m), (np.arange(self.m), self.tail)), shape=(self.m, self.n)
        )

    def directed_laplacian(self) -> sp.csr_matrix:
        """Sparse ``B^T W H``; column ``u`` holds the out-edges of ``u``."""
        w = self.weight
        diag = np.bincount(self.head, weights=w, minlength=self.n)
        off = sp.csr_matrix((-w, (self.tail, self.head)), shape=(self.n, self.n))
        return (sp.diags(diag) + off).tocsr()

    def undirected_laplacian(self) -> sp.csr_matrix:
        """Sparse ``B^T W B`` of the underlying undirected multigraph."""
        return _laplacian_from_edges(self.n, self.head, self.tail, self.weight)

    def with_weights(self, w, drop_zeros: bool = True) -> "DirectedGraph":
        """Same edges with new weights; zero entries are deleted."""
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.m,):
            raise DimensionMismatch(f"expected {self.m} weights, got {w.shape}")
        if np.any(w < 0):
            raise NonPositiveWeight("weights must be nonnegative")
        keep = w > 0 if drop_zeros else np.ones(self.m, dtype=bool)
        return DirectedGraph(self.n, self.head[keep], self.tail[keep], w[keep])

    def subgraph(self, edge_index) -> "DirectedGraph":
        idx = np.sort(np.asarray(edge_index, dtype=np.int64))
        return DirectedGraph(self.n, self.head[idx], self.tail[idx], self.weight[idx])

    def reverse(self) -> "DirectedGraph":
        return build_graph(self.n, np.column_stack([self.tail, self.head]), self.weight)

    def edge_list(self):
        return list(zip(self.head.tolist(), self.tail.tolist(), self.weight.tolist()))


def _validate(n, head, tail, weight):
    if np.any(~np.isfinite(weight)) or np.any(weight <= 0):
        raise NonPositiveWeight("edge weights must be finite and strictly positive")
    if np.any(head == tail):
        e = int(np.flatnonzero(head == tail)[0])
        raise SelfLoop(f"edge {e} is a self-loop at vertex {int(head[e])}")
    lo = min(head.min(), tail.min())
    hi = max(head.max(), tail.max())
    if lo < 0 or hi >= n:
        raise VertexOutOfRange(f"vertex ids must lie in [0, {n})")


def _laplacian_from_edges(n, head, tail, weight) -> sp.csr_matrix:
    deg = np.bincount(head, weights=weight, minlength=n) + np.bincount(
        tail, weights=weight, minlength=n
    )
    rows = np.concatenate([head, tail])
    cols = np.concatenate([tail, head])
    vals = -np.concatenate([weight, weight])
    off = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return (sp.diags(deg) + off).tocsr()


def build_graph(n: int, edges, weights=None) -> DirectedGraph:
    """Validate an edge list, merge parallel edges and sort by (head, tail).

    ``edges`` is either an iterable of ``(head, tail, weight)`` triples or an
    ``(m, 2)`` array of endpoints with ``weights`` given separately.
    """
    n = int(n)
    if weights is None:
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                         dtype=np.float64)
        if arr.size == 0:
            return DirectedGraph(n, [], [], [])
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise DimensionMismatch("edges must be (head, tail, weight) triples")
        hf, tf, w = arr[:, 0], arr[:, 1], arr[:, 2]
    else:
        ends = np.asarray(edges, dtype=np.float64).reshape(-1, 2)
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if ends.shape[0] != w.shape[0]:
            raise DimensionMismatch("endpoint and weight arrays differ in length")
        if w.size == 0:
            return DirectedGraph(n, [], [], [])
        hf, tf = ends[:, 0], ends[:, 1]
    if np.any(hf != np.round(hf)) or np.any(tf != np.round(tf)):
        raise VertexOutOfRange("vertex ids must be integers")
    head = hf.astype(np.int64)
    tail = tf.astype(np.int64)
    _validate(n, head, tail, w)
    key = head * n + tail
    uniq, inv = np.unique(key, return_inverse=True)
    merged = np.bincount(inv, weights=w, minlength=uniq.shape[0])
    return DirectedGraph(n, uniq // n, uniq % n, merged)


def degree_imbalance(G: DirectedGraph, w=None) -> np.ndarray:
    """``B^T w``: weighted out-degree minus weighted in-degree per vertex."""
    w = G.weight if w is None else np.asarray(w, dtype=np.float64)
    return np.bincount(G.head, weights=w, minlength=G.n) - np.bincount(
        G.tail, weights=w, minlength=G.n
    )


def absolute_degrees(G: DirectedGraph, w=None) -> np.ndarray:
    """``|B|^T w``: weighted out-degree plus weighted in-degree per vertex."""
    w = G.weight if w is None else np.asarray(w, dtype=np.float64)
    return np.bincount(G.head, weights=w, minlength=G.n) + np.bincount(
        G.tail, weights=w, minlength=G.n
    )


def is_eulerian(G: DirectedGraph, tol: float = 0.0) -> bool:
    if G.m == 0:
        return True
    return bool(np.abs(degree_imbalance(G)).max() <= tol * G.weight.sum())


def _check_vec(G, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != G.n:
        raise DimensionMismatch(f"vector has length {x.shape[0]}, graph has {G.n} vertices")
    return x


def directed_laplacian_apply(G: DirectedGraph, x) -> np.ndarray:
    """``B^T W H x`` without forming a matrix."""
    x = _check_vec(G, x)
    f = G.weight * x[G.head]
    return np.bincount(G.head, weights=f, minlength=G.n) - np.bincount(
        G.tail, weights=f, minlength=G.n
    )


def undirected_laplacian_apply(G: DirectedGraph, x) -> np.ndarray:
    """``B^T W B x`` without forming a matrix."""
    x = _check_vec(G, x)
    f = G.weight * (x[G.head] - x[G.tail])
    return np.bincount(G.head, weights=f, minlength=G.n) - np.bincount(
        G.tail, weights=f, minlength=G.n
    )


def components(n: int, head, tail) -> tuple[int, np.ndarray]:
    """Connected components of the undirected graph on the given edges."""
    head = np.asarray(head, dtype=np.int64)
    tail = np.asarray(tail, dtype=np.int64)
    A = sp.csr_matrix((np.ones(head.shape[0]), (head, tail)), shape=(n, n))
    k, labels = connected_components(A, directed=False)
    return int(k), labels


def is_connected(G: DirectedGraph) -> bool:
    if G.n <= 1:
        return True
    return components(G.n, G.head, G.tail)[0] == 1


# ---------------------------------------------------------------------------
# bipartite lift


@dataclass(frozen=True, eq=False)
class BipartiteLift:
    """Lift of a directed graph: edge ``(u, v)`` becomes ``(u, v + n)``.

    ``edge_map[i]`` is the index of the original edge that lifted edge ``i``
    came from.  Heads lie in ``A = [0, n)`` and tails in ``B = [n, 2n)``.
    """

    graph: DirectedGraph
    base_n: int
    edge_map: np.ndarray

    def collapse_matrix(self) -> sp.csr_matrix:
        """``Q = [I; I]`` of shape (2n, n), so ``B = B_lift Q``."""
        n = self.base_n
        return sp.vstack([sp.identity(n), sp.identity(n)]).tocsr()

    def base_weights(self, lifted_weights) -> np.ndarray:
        """Map a lifted weight vector back onto the original edge order."""
        out = np.zeros(self.graph.m)
        out[self.edge_map] = np.asarray(lifted_weights, dtype=np.float64)
        return out


def bipartite_lift(G: DirectedGraph) -> BipartiteLift:
    n = G.n
    lifted = DirectedGraph(2 * n, G.head, G.tail + n, G.weight)
    # (head, tail + n) keeps the canonical order, so the map is the identity
    return BipartiteLift(lifted, n, np.arange(G.m))


def check_bipartite_lift(G: DirectedGraph, base_n: int) -> bool:
    return bool(
        G.n == 2 * base_n
        and np.all(G.head < base_n)
        and np.all(G.tail >= base_n)
    )


# ---------------------------------------------------------------------------
# spanning trees


@dataclass(frozen=True, eq=False)
class SpanningTree:
    """Spanning tree (or forest) of the undirected graph underlying ``G``.

    ``parent[v]`` and ``parent_edge[v]`` are ``-1`` at roots; ``order`` lists
    vertices so that every vertex appears after its parent.
    """

    n: int
    edges: np.ndarray
    parent: np.ndarray
    parent_edge: np.ndarray
    order: np.ndarray

    @property
    def roots(self) -> np.ndarray:
        return np.flatnonzero(self.parent < 0)

    @cached_property
    def preorder(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Depth-first order with each subtree as a contiguous block.

        Returns ``(seq, start, size)``: the subtree of ``v`` is
        ``seq[start[v] : start[v] + size[v]]``.
        """
        children = [[] for _ in range(self.n)]
        for v in self.order.tolist():
            p = int(self.parent[v])
            if p >= 0:
                children[p].append(v)
        seq = []
        stack = [int(r) for r in reversed(self.roots.tolist())]
        while stack:
            v = stack.pop()
            seq.append(v)
            stack.extend(reversed(children[v]))
        seq = np.asarray(seq, dtype=np.int64)
        start = np.empty(self.n, dtype=np.int64)
        start[seq] = np.arange(self.n)
        size = np.ones(self.n, dtype=np.int64)
        for v in self.order[::-1].tolist():
            p = int(self.parent[v])
            if p >= 0:
                size[p] += size[v]
        return seq, start, size


def _orient_tree(n, head, tail, tree_edges, roots_first=0):
    adj = [[] for _ in range(n)]
    for e in tree_edges.tolist():
        u, v = int(head[e]), int(tail[e])
        adj[u].append((v, e))
        adj[v].append((u, e))
    parent = np.full(n, -1, dtype=np.int64)
    parent_edge = np.full(n, -1, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    order = []
    starts = [roots_first] + [v for v in range(n) if v != roots_first] if n else []
    for s in starts:
        if seen[s]:
            continue
        seen[s] = True
        order.append(s)
        i = len(order) - 1
        while i < len(order):
            u = order[i]
            i += 1
            for v, e in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    parent[v] = u
                    parent_edge[v] = e
                    order.append(v)
    return parent, parent_edge, np.asarray(order, dtype=np.int64)


def spanning_tree(G: DirectedGraph, allow_forest: bool = False, weights=None) -> SpanningTree:
    """Spanning tree chosen by scanning edges in canonical order.

    An edge joins the tree when it connects two different components of
    the edges taken so far.  With ``weights`` given, edges with nonpositive
    weight are skipped.  The tree is rooted at vertex 0.
    """
    n = G.n
    uf = np.arange(n)

    def find(a):
        root = a
        while uf[root] != root:
            root = uf[root]
        while uf[a] != root:
            uf[a], a = root, uf[a]
        return root

    chosen = []
    usable = np.ones(G.m, dtype=bool) if weights is None else np.asarray(weights) > 0
    for e, (u, v) in enumerate(zip(G.head.tolist(), G.tail.tolist())):
        if not usable[e]:
            continue
        ru, rv = find(u), find(v)
        if ru != rv:
            uf[ru] = rv
            chosen.append(e)
            if len(chosen) == n - 1:
                break
    if len(chosen) < n - 1 and not allow_forest:
        raise Disconnected("underlying undirected graph is disconnected")
    edges = np.asarray(chosen, dtype=np.int64)
    parent, parent_edge, order = _orient_tree(n, G.head, G.tail, edges)
    return SpanningTree(n, edges, parent, parent_edge, order)


def validate_tree(G: DirectedGraph, T: SpanningTree, allow_forest: bool = True) -> None:
    """Raise :class:`NotATree` unless ``T`` is a spanning forest of ``G``."""
    if T.n != G.n:
        raise NotATree("tree and graph have different vertex counts")
    e = np.asarray(T.edges)
    if e.size and (e.min() < 0 or e.max() >= G.m):
        raise NotATree("tree edge index out of range")
    k, _ = components(G.n, G.head[e], G.tail[e])
    if e.size != G.n - k:
        raise NotATree("edge set contains a cycle")
    if not allow_forest and k != 1:
        raise NotATree("edge set does not span the graph")


# ---------------------------------------------------------------------------
# generators


def random_eulerian(n: int, m: int, U: int = 1, seed=None) -> DirectedGraph:
    """Union of random directed cycles with integer weights in ``[1, U]``.

    A Hamiltonian cycle through a random permutation comes first, so the
    result is strongly connected.  Further cycles are added until at least
    ``m`` distinct edges exist; a cycle whose weight would push some edge
    above ``U`` gets its weight reduced, or is skipped.
    """
    n, m, U = int(n), int(m), int(U)
    if n < 2 or m < n or U < 1 or m > n * (n - 1):
        raise InfeasibleParameters(f"need 2 <= n <= m <= n(n-1) and U >= 1, got n={n} m={m} U={U}")
    rng = np.random.default_rng(seed)
    W = {}

    def add_cycle(verts, c):
        k = len(verts)
        for i in range(k):
            key = (int(verts[i]), int(verts[(i + 1) % k]))
            W[key] = W.get(key, 0) + c

    perm = rng.permutation(n)
    add_cycle(perm, int(rng.integers(1, U + 1)))
    attempts = 0
    max_attempts = 200 * m + 1000
    while len(W) < m:
        attempts += 1
        if attempts > max_attempts:
            raise InfeasibleParameters("could not reach the requested edge count")
        k = int(rng.integers(2, n + 1))
        verts = rng.choice(n, size=k, replace=False)
        used = [W.get((int(verts[i]), int(verts[(i + 1) % k])), 0) for i in range(k)]
        room = U - max(used)
        if room < 1:
            continue
        add_cycle(verts, int(rng.integers(1, room + 1)))
    keys = np.array(sorted(W), dtype=np.int64).reshape(-1, 2)
    vals = np.array([W[tuple(k)] for k in keys.tolist()], dtype=np.float64)
    return build_graph(n, keys, vals)


def random_bidirected(n: int, m: int | None = None, U: int = 1, seed=None) -> DirectedGraph:
    """Symmetric digraph: every chosen pair carries the same weight both ways.

    ``m`` counts directed edges and defaults to the complete digraph
    ``n(n-1)``.  A random spanning tree is always included.
    """
    n = int(n)
    full = n * (n - 1)
    m = full if m is None else int(m)
    if n < 2 or m < 2 * (n - 1) or m > full or U < 1:
        raise InfeasibleParameters(f"need 2(n-1) <= m <= n(n-1), got n={n} m={m}")
    rng = np.random.default_rng(seed)
    pairs = m // 2
    iu, ju = np.triu_indices(n, 1)
    if pairs == iu.shape[0]:
        chosen = np.arange(iu.shape[0])
    else:
        perm = rng.permutation(n)
        tree = {(min(perm[i], perm[j]), max(perm[i], perm[j]))
                for i, j in ((i, int(rng.integers(0, i))) for i in range(1, n))}
        index = {(int(a), int(b)): k for k, (a, b) in enumerate(zip(iu, ju))}
        must = np.array(sorted(index[(int(a), int(b))] for a, b in tree), dtype=np.int64)
        rest = np.setdiff1d(np.arange(iu.shape[0]), must)
        extra = rng.choice(rest, size=pairs - must.shape[0], replace=False)
        chosen = np.sort(np.concatenate([must, extra]))
    w = rng.integers(1, U + 1, size=chosen.shape[0]).astype(np.float64)
    a, b = iu[chosen], ju[chosen]
    ends = np.concatenate([np.column_stack([a, b]), np.column_stack([b, a])])
    return build_graph(n, ends, np.concatenate([w, w]))


def random_undirected(n: int, m: int, U: int = 1, seed=None) -> DirectedGraph:
    """Connected simple undirected graph stored with head < tail."""
    n, m = int(n), int(m)
    full = n * (n - 1) // 2
    if n < 2 or m < n - 1 or m > full or U < 1:
        raise InfeasibleParameters(f"need n-1 <= m <= n(n-1)/2, got n={n} m={m}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    keys = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        a, b = int(perm[i]), int(perm[j])
        keys.add((min(a, b), max(a, b)))
    while len(keys) < m:
        a, b = (int(x) for x in rng.choice(n, size=2, replace=False))
        keys.add((min(a, b), max(a, b)))
    ends = np.array(sorted(keys), dtype=np.int64)
    w = rng.integers(1, U + 1, size=ends.shape[0]).astype(np.float64)
    return build_graph(n, ends, w)


def orient_undirected(G: DirectedGraph) -> DirectedGraph:
    """Orient every edge from its smaller to its larger endpoint."""
    lo = np.minimum(G.head, G.tail)
    hi = np.maximum(G.head, G.tail)
    return build_graph(G.n, np.column_stack([lo, hi]), G.weight)


# ---------------------------------------------------------------------------
# edge-list text format


def _fmt_weight(w: float) -> str:
    if float(w).is_integer() and abs(w) < 2**53:
        return str(int(w))
    return repr(float(w))


def format_edge_list(G: DirectedGraph) -> str:
    out = io.StringIO()
    out.write(f"{G.n} {G.m}\n")
    for u, v, w in zip(G.head.tolist(), G.tail.tolist(), G.weight.tolist()):
        out.write(f"{u} {v} {_fmt_weight(w)}\n")
    return out.getvalue()


def parse_edge_list(text: str) -> DirectedGraph:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ParseError("empty edge list")
    header = lines[0].split()
    if len(header) != 2:
        raise ParseError("first line must be 'n m'")
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError as exc:
        raise ParseError(f"bad header: {lines[0]!r}") from exc
    if len(lines) - 1 != m:
        raise ParseError(f"header announces {m} edges, found {len(lines) - 1}")
    heads, tails, ws = [], [], []
    for k, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 3:
            raise ParseError(f"line {k}: expected 'head tail weight'")
        try:
            heads.append(int(parts[0]))
            tails.append(int(parts[1]))
            ws.append(float(parts[2]))
        except ValueError as exc:
            raise ParseError(f"line {k}: {ln!r}") from exc
    if m == 0:
        return DirectedGraph(n, [], [], [])
    return build_graph(n, np.column_stack([heads, tails]), ws)


def read_edge_list(path) -> DirectedGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_edge_list(fh.read())


def write_edge_list(G: DirectedGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_edge_list(G))


def log_ratio(w) -> float:
    """Natural log of the max/min ratio of the positive entries of ``w``."""
    w = np.asarray(w, dtype=np.float64)
    w = w[w > 0]
    if w.size == 0:
        return 0.0
    return math.log(w.max() / w.min())
