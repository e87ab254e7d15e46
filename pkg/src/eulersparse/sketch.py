"""Graphical spectral sketches of Eulerian and undirected graphs.

A sketch preserves ``a^T vL z`` for vectors fixed before it is drawn, which
is weaker than a sparsifier but needs fewer edges.  The construction works
on the bipartite lift, where every edge runs from the out-copy of a vertex
to its in-copy.  Circulations of the lift preserve in- and out-degrees
separately, so the reweighting walk keeps both ``B^T w`` and ``|B|^T w``.

Inside each expander piece only vertices of combinatorial degree at least
``beta`` take part.  Edges between them have small resistance relative to
their weight, which is what lets the walk run with the same schedule as
the sparsifier.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .decomposition import Decomposition, Piece, expander_decomp
from .dense_oracle import dense_directed_laplacian, dense_undirected_laplacian, pinv
from .errors import (Disconnected, InfeasibleParameters, NotBipartiteLift, NotEulerian,
                     PreconditionViolated, QualityNotMet)
from .graph_core import (DirectedGraph, SpanningTree, absolute_degrees, bipartite_lift,
                         check_bipartite_lift, degree_imbalance, is_connected, orient_undirected,
                         spanning_tree)
from .projection_rounding import rounding
from .sparsify import SparsifyConfig, _electrical_cleanup, phase_schedule, two_phase

__all__ = [
    "SketchConfig",
    "SketchResult",
    "expander_spectral_sketch",
    "spectral_sketch",
    "run_spectral_sketch",
    "undirected_sketch",
    "paper_beta",
    "practical_beta",
    "sketch_bound",
    "bilinear_errors",
    "quadratic_errors",
    "inverse_quadratic_errors",
    "pair_family",
]


def paper_beta(n: int, U_max: float, eps: float, delta: float, C_ESS: float = 1.0,
               C_ADK: float = 1.0) -> float:
    """Degree threshold with the theoretical constant 400000."""
    a = math.log(n * U_max / delta)
    return 400000.0 * C_ESS ** 2 / (C_ADK ** 2 * eps) * math.log(n) ** 6 * a * math.log(a) ** 2


def practical_beta(n: int, eps: float) -> int:
    """``max(8, ceil(4/eps) * ceil(ln^2 n))``."""
    return max(8, math.ceil(4.0 / eps) * math.ceil(math.log(n) ** 2))


@dataclass
class SketchConfig:
    """Parameters of the sketch; the walk itself is configured by ``sparsify``.

    ``beta`` overrides the degree threshold.  ``target_constant`` sets the
    practical stopping rule ``nnz <= target_constant * n * beta``; the
    theoretical rule ``4 C_ESS n beta log2(32 m n U_max / eps)`` is used by
    ``paper_faithful``.
    """

    eps: float = 0.5
    delta: float = 0.1
    beta: float | None = None
    C_ESS: float = 1.0
    C_ADK: float = 1.0
    phi_min: float | None = None
    seed: int | None = 0
    profile: str = "practical"
    rounds: int | None = None
    target_constant: float = 2.0
    sparsify: SparsifyConfig | None = None

    def __post_init__(self):
        if not 0 < self.eps < 1 or not 0 < self.delta < 1:
            raise InfeasibleParameters("eps and delta must lie in (0, 1)")
        if self.sparsify is None:
            self.sparsify = SparsifyConfig(eps=self.eps, delta=self.delta, seed=self.seed,
                                           profile=self.profile)
        self.profile = self.sparsify.profile
        if self.seed is None:
            self.seed = self.sparsify.seed

    def beta_for(self, n: int, U_max: float, eps: float, delta: float) -> float:
        if self.beta is not None:
            return float(self.beta)
        if self.profile == "paper_faithful":
            return paper_beta(n, U_max, eps, delta, self.C_ESS, self.C_ADK)
        return float(practical_beta(n, eps))

    def target(self, n: int, m: int, U_max: float, beta: float, eps: float) -> float:
        if self.profile == "paper_faithful":
            return 4.0 * self.C_ESS * n * beta * math.log2(32.0 * m * n * U_max / eps)
        return self.target_constant * n * beta

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sparsify"] = self.sparsify.to_dict()
        return d


def sketch_bound(beta: float, phi: float, n: int, W: float, delta: float, eps: float,
                 C_ESS: float = 1.0) -> float:
    """Per-pair error factor ``C beta^-1 phi^-2 sqrt(log(nW/(delta eps))) loglog(nW/eps) + eps``."""
    a = math.log(n * W / eps)
    return (C_ESS / (beta * phi ** 2) * math.sqrt(math.log(n * W / (delta * eps)))
            * math.log(max(a, math.e)) + eps)


def _core_edges(G: DirectedGraph, piece: Piece, beta: float, w) -> np.ndarray:
    """Edges of ``piece`` between vertices of combinatorial degree ``>= beta``."""
    e = np.asarray(piece.edges, dtype=np.int64)
    e = e[w[e] > 0]
    if e.size == 0:
        return e
    deg = np.bincount(G.head[e], minlength=G.n) + np.bincount(G.tail[e], minlength=G.n)
    keep = deg >= beta
    return e[keep[G.head[e]] & keep[G.tail[e]]]


def _ess_weights(pieces, G, T, delta, eps, W, beta, cfg: SketchConfig, weights, phi=None,
                 key=(), stats=None):
    scfg = cfg.sparsify
    w = np.array(weights, dtype=np.float64)
    n = G.n
    m = int(np.count_nonzero(w))
    I = max(len(pieces), 1)
    st = stats if stats is not None else {}
    st.update(pieces=len(pieces), processed=0, core_edges=0, calls=0, trials=0, steps=0,
              dichotomy_failures=0, violations=[])
    schedule = phase_schedule(n, m, W, eps)
    if phi is not None and math.isfinite(phi) and phi > 0:
        a = math.log(n * W / eps)
        h = cfg.C_ESS / (beta * phi ** 2) * math.log(n * W / (delta * eps)) * math.log(max(a, math.e)) ** 2
        st["hypothesis"] = h
        if h > 1:
            msg = f"C_ESS * beta^-1 * phi^-2 * log * loglog^2 = {h:.3g} > 1"
            if scfg.check_preconditions:
                raise PreconditionViolated(msg)
            st["violations"].append(msg)
    removed = np.zeros(G.m, dtype=bool)
    for i, piece in enumerate(pieces):
        EH = _core_edges(G, piece, beta, w)
        if EH.size == 0:
            continue
        n_hat = np.unique(np.concatenate([G.head[EH], G.tail[EH]])).size
        if EH.size < scfg.min_piece_density * n_hat:
            continue
        st["processed"] += 1
        st["core_edges"] += int(EH.size)
        w = two_phase(EH, G, T, w, schedule, delta / 2, eps / 4, I, scfg, key=(*key, i), stats=st)
        removed[EH[w[EH] <= eps / (4.0 * n * m)]] = True
    zR = np.where(removed, w, 0.0)
    w = w - zR + rounding(G, zR, T, check=False)
    w[removed] = 0.0
    st["removed"] = int(removed.sum())
    return w


def expander_spectral_sketch(decomp: Decomposition, G: DirectedGraph, T: SpanningTree,
                             delta: float, eps: float, W: float, beta: float,
                             config: SketchConfig | None = None, key=(),
                             stats: dict | None = None) -> DirectedGraph:
    """Reweight the degree-``beta`` core of every expander piece of a bipartite lift.

    ``G`` must be a lift: ``2k`` vertices with every edge from ``[0, k)``
    to ``[k, 2k)``.  The output has the same in- and out-degrees as ``G``.
    """
    cfg = config or SketchConfig()
    if G.n % 2 or not check_bipartite_lift(G, G.n // 2):
        raise NotBipartiteLift("edges must run from the first half of the vertices to the second")
    w = _ess_weights(decomp.pieces, G, T, delta, eps, W, beta, cfg, G.weight,
                     phi=decomp.quality if decomp.kind == "Expander" else None,
                     key=key, stats=stats)
    return G.with_weights(np.maximum(w, 0.0))


@dataclass
class SketchResult:
    """Sketch graph with the per-round record."""

    graph: DirectedGraph
    weights: np.ndarray
    trajectory: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"trajectory": self.trajectory, "info": self.info}


def _decompose(Gt, sub, delta, phi_min, seed):
    """Expander decomposition, lowering ``phi_min`` until at most half the edges are cut."""
    for _ in range(20):
        try:
            return expander_decomp(Gt, 2.0, delta, phi_min=phi_min, seed=seed, edges=sub,
                                   require_connected=False)
        except QualityNotMet:
            phi_min /= 2.0
    return expander_decomp(Gt, 2.0, delta, phi_min=0.0, seed=seed, edges=sub,
                           require_connected=False)


def _sketch_lifted(G: DirectedGraph, eps: float, delta: float, cfg: SketchConfig) -> SketchResult:
    n, m = G.n, G.m
    if G.m and G.weight.min() < 1.0:
        raise PreconditionViolated("weights must be at least 1; rescale the graph first")
    lift = bipartite_lift(G)
    Gl = lift.graph
    w = Gl.weight.astype(np.float64).copy()
    T = spanning_tree(Gl, allow_forest=True)
    hat = np.ones(m, dtype=bool)
    hat[T.edges] = False
    R = cfg.rounds if cfg.rounds is not None else math.ceil(6 * math.log(max(n, 2)))
    U = float(w.max()) if m else 1.0
    U_max = U * cfg.C_ESS ** R
    beta = cfg.beta_for(n, U_max, eps, delta)
    target = cfg.target(n, m, U_max, beta, eps)
    phi_min = cfg.phi_min if cfg.phi_min is not None else 1.0 / max(math.log(max(n, 3)) ** 2, 1.0)
    scfg = cfg.sparsify
    trajectory = []
    t0 = time.perf_counter()
    t = 0
    while t < R and np.count_nonzero(w[hat]) > target:
        tic = time.perf_counter()
        w_round = w.copy()
        kept = np.flatnonzero(w > 0)
        Gt = DirectedGraph(Gl.n, Gl.head[kept], Gl.tail[kept], w[kept])
        sub = np.flatnonzero(hat[kept])
        seed_t = int(np.random.SeedSequence([cfg.seed % (2 ** 63), t, 1]).generate_state(1)[0])
        S = _decompose(Gt, sub, delta / (4 * R), phi_min, seed_t)
        pieces = [Piece(p.vertices, kept[np.asarray(p.edges, dtype=np.int64)], p.quality)
                  for p in S.pieces]
        st = {}
        w = _ess_weights(pieces, Gl, T, delta / (4 * R), eps / (4 * R), U_max, beta, cfg, w,
                         phi=S.quality, key=(t,), stats=st)
        small = (w > 0) & (w <= eps / (4.0 * m * n))
        zD = np.where(small, w, 0.0)
        w = w - zD + rounding(Gl, zD, T, check=False)
        w[small] = 0.0
        cleaned = 0
        if scfg.cleanup_ratio > 0:
            w, cleaned = _electrical_cleanup(Gl, T, w, hat & (w > 0) & (w <= scfg.cleanup_ratio * w_round))
        t += 1
        row = {"round": t, "nnz": int(np.count_nonzero(w)), "pieces": len(pieces),
               "processed": st["processed"], "core_edges": st["core_edges"],
               "removed": st["removed"] + int(small.sum()) + cleaned, "cleaned": cleaned,
               "phi": S.quality, "calls": st["calls"], "steps": st["steps"],
               "dichotomy_failures": st["dichotomy_failures"],
               "seconds": time.perf_counter() - tic}
        if st["violations"]:
            row["violations"] = st["violations"]
        trajectory.append(row)
        if st["processed"] == 0 and row["removed"] == 0:
            break
    out = G.with_weights(np.maximum(w, 0.0))
    info = {
        "rounds": t,
        "round_budget": R,
        "beta": beta,
        "target": target,
        "U_max": U_max,
        "nnz_in": m,
        "nnz_out": out.m,
        "degree_residual_linf": float(np.abs(degree_imbalance(out) - degree_imbalance(G)).max()) if m else 0.0,
        "abs_degree_residual_linf": float(np.abs(absolute_degrees(out) - absolute_degrees(G)).max()) if m else 0.0,
        "seconds": time.perf_counter() - t0,
        "profile": cfg.profile,
    }
    return SketchResult(out, w, trajectory, info)


def run_spectral_sketch(G: DirectedGraph, eps: float | None = None, delta: float | None = None,
                        config: SketchConfig | None = None) -> SketchResult:
    """Eulerian graphical sketch with its per-round record."""
    cfg = config or SketchConfig()
    eps = cfg.eps if eps is None else eps
    delta = cfg.delta if delta is None else delta
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise InfeasibleParameters("eps and delta must lie in (0, 1)")
    if G.n > 1 and not is_connected(G):
        raise Disconnected("sketching requires a connected graph")
    tol = 0.0 if np.all(G.weight == np.round(G.weight)) else 1e-12
    if G.m and np.abs(degree_imbalance(G)).max() > tol * max(G.total_weight, 1.0):
        raise NotEulerian("spectral_sketch requires an Eulerian graph")
    return _sketch_lifted(G, eps, delta, cfg)


def spectral_sketch(G: DirectedGraph, eps: float | None = None, delta: float | None = None,
                    config: SketchConfig | None = None) -> DirectedGraph:
    """Reweighted subgraph of ``G`` with the same degrees that preserves fixed bilinear forms."""
    return run_spectral_sketch(G, eps, delta, config).graph


def undirected_sketch(G: DirectedGraph, eps: float | None = None, delta: float | None = None,
                      config: SketchConfig | None = None) -> DirectedGraph:
    """Graphical sketch of an undirected graph.

    Each edge is oriented from its smaller endpoint, the oriented graph is
    sketched with ``eps / 30`` (it need not be Eulerian: only its in- and
    out-degrees are preserved) and the result is read back as undirected.
    """
    cfg = config or SketchConfig()
    eps = cfg.eps if eps is None else eps
    delta = cfg.delta if delta is None else delta
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise InfeasibleParameters("eps and delta must lie in (0, 1)")
    if G.n > 1 and not is_connected(G):
        raise Disconnected("sketching requires a connected graph")
    D = orient_undirected(G)
    return _sketch_lifted(D, eps / 30.0, delta, cfg).graph


# ---------------------------------------------------------------------------
# dense evaluation


def pair_family(n: int, count: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """``count`` Gaussian vector pairs, drawn before any sketch is sampled."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((count, n)), rng.standard_normal((count, n))


def bilinear_errors(G: DirectedGraph, H: DirectedGraph, A, Z, max_n=None) -> np.ndarray:
    """``|a^T (vL_H - vL_G) z| / (||a||_L ||z||_L)`` per row pair, ``L`` of ``und(G)``."""
    A = np.atleast_2d(A)
    Z = np.atleast_2d(Z)
    L = dense_undirected_laplacian(G, max_n)
    diff = dense_directed_laplacian(H, max_n) - dense_directed_laplacian(G, max_n)
    num = np.abs(np.einsum("ij,jk,ik->i", A, diff, Z))
    na = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", A, L, A), 0.0))
    nz = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", Z, L, Z), 0.0))
    return num / np.maximum(na * nz, 1e-300)


def quadratic_errors(G: DirectedGraph, H: DirectedGraph, X, max_n=None) -> np.ndarray:
    """``|x^T (L_H - L_G) x| / x^T L_G x`` per row."""
    X = np.atleast_2d(X)
    LG = dense_undirected_laplacian(G, max_n)
    LH = dense_undirected_laplacian(H, max_n)
    num = np.abs(np.einsum("ij,jk,ik->i", X, LH - LG, X))
    return num / np.maximum(np.einsum("ij,jk,ik->i", X, LG, X), 1e-300)


def inverse_quadratic_errors(G: DirectedGraph, H: DirectedGraph, X, max_n=None) -> np.ndarray:
    """``|x^T (L_H^+ - L_G^+) x| / x^T L_G^+ x`` per row."""
    X = np.atleast_2d(X)
    PG = pinv(dense_undirected_laplacian(G, max_n))
    PH = pinv(dense_undirected_laplacian(H, max_n))
    num = np.abs(np.einsum("ij,jk,ik->i", X, PH - PG, X))
    return num / np.maximum(np.einsum("ij,jk,ik->i", X, PG, X), 1e-300)
