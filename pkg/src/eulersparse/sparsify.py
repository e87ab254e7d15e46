"""Eulerian sparsification by repeated random reweighting of clusters.

Three layers:

``basic_fast_sparsify``
    Random sign walks inside one low-resistance cluster.  Each step moves
    the weights by ``w <- w o (1 + x)`` with ``x`` a projected Rademacher
    vector, so degrees and total weight stay fixed while weights drift
    toward zero.  Edges that shrank (or grew) too much are frozen.
``decomp_sparsify``
    Two phases of such calls per piece of a resistance decomposition:
    first push a quarter of the edges down by a polylog factor, then push
    a quarter of those down by a polynomial factor and delete them.
``fast_sparsify``
    Alternates decompositions and ``decomp_sparsify`` until the edge count
    reaches the target or the round budget runs out.

Degree imbalance from inexact arithmetic and from deletions is always
routed through a fixed spanning tree, so the output has exactly the input
degrees (up to floating point).
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .decomposition import Decomposition, Piece, er_decomp
from .dense_oracle import MAX_N, sparsifier_error
from .errors import Disconnected, InfeasibleParameters, NotEulerian, PreconditionViolated
from .graph_core import DirectedGraph, SpanningTree, degree_imbalance, is_connected, spanning_tree
from .lap_solver import DirectSolver
from .projection_rounding import local_projection, rounding

__all__ = [
    "SparsifyConfig",
    "Cluster",
    "SparsifyResult",
    "basic_fast_sparsify",
    "decomp_sparsify",
    "fast_sparsify",
    "run_fast_sparsify",
    "paper_eta_tau",
    "paper_target",
]

PROFILES = ("paper_faithful", "practical")
_ALIASES = {"paper": "paper_faithful", "paper_faithful": "paper_faithful", "practical": "practical"}

# profile defaults; None means "use the theoretical formula"
_DEFAULTS = {
    "paper_faithful": dict(eta=None, tau=None, target_constant=None, min_piece_density=40.0,
                           growth_cap=50.0, piece_guard=False, cleanup_ratio=0.0, C_BFS=1.0, max_trials=10_000, check_preconditions=True),
    "practical": dict(eta=0.2, tau=1024, target_constant=0.1, min_piece_density=2.0,
                      growth_cap=3.0, piece_guard=True, cleanup_ratio=0.05, C_BFS=0.5, max_trials=8, check_preconditions=False),
}


def paper_eta_tau(m: int, delta: float, C_sign: float = 1.0) -> tuple[float, int]:
    """Solve ``eta = 1/(20 C sqrt(log(60 m tau/delta)))``, ``tau = ceil(720/eta^2)``."""
    tau = 1
    for _ in range(100):
        eta = 1.0 / (20.0 * C_sign * math.sqrt(math.log(60.0 * max(m, 1) * tau / delta)))
        new = math.ceil(720.0 / eta ** 2)
        if new == tau:
            break
        tau = new
    return eta, tau


def paper_target(n: int, m: int, U_max: float, R: float, eps: float, delta: float,
                 C_PS: float = 1.0) -> float:
    """Edge-count threshold of the outer loop with the theoretical constants."""
    a = math.log(32.0 * R * R * m * n * U_max / (delta * eps))
    b = math.log(max(math.log(32.0 * R * m * n * U_max / eps), 1.0))
    return n * math.log(n) * a * b * b * (2.0 ** 22) * C_PS ** 2 / eps ** 2


@dataclass
class SparsifyConfig:
    """Parameters of the sparsifier; ``profile`` picks the defaults.

    ``paper_faithful`` derives ``eta`` and ``tau`` from the failure
    probability and uses the theoretical edge-count target, which exceeds
    ``m`` for every graph that fits in memory.  ``practical`` uses a fixed
    step size, a calibrated target ``target_constant * n ln^2 n / eps^2``,
    a lower piece-density guard, a per-piece hypothesis guard and an
    electrical cleanup of edges that shrank by ``cleanup_ratio`` in a
    round.  Degree repair is exact in both.
    """

    eps: float = 0.25
    delta: float = 0.01
    seed: int | None = 0
    profile: str = "practical"
    C_sign: float = 1.0
    C_BFS: float | None = None
    C_PS: float = 1.0
    eta: float | None = None
    tau: int | None = None
    target_constant: float | None = None
    min_piece_density: float | None = None
    growth_cap: float | None = None
    piece_guard: bool | None = None
    cleanup_ratio: float | None = None
    max_trials: int | None = None
    rounds: int | None = None
    check_preconditions: bool | None = None
    step_damping: bool = True
    track_error: bool = False

    def __post_init__(self):
        if self.profile not in _ALIASES:
            raise InfeasibleParameters(f"unknown profile {self.profile!r}")
        self.profile = _ALIASES[self.profile]
        if not 0 < self.eps < 1 or not 0 < self.delta < 1:
            raise InfeasibleParameters("eps and delta must lie in (0, 1)")
        for name, value in _DEFAULTS[self.profile].items():
            if getattr(self, name) is None:
                setattr(self, name, value)
        if self.seed is None:
            self.seed = int(np.random.SeedSequence().entropy % (2 ** 63))

    @classmethod
    def paper_faithful(cls, **kw) -> "SparsifyConfig":
        return cls(profile="paper_faithful", **kw)

    @classmethod
    def practical(cls, **kw) -> "SparsifyConfig":
        return cls(profile="practical", **kw)

    def step_parameters(self, m: int, n: int, delta: float, eps: float, ell: float):
        """``(eta, tau, xi)`` for one reweighting call."""
        if self.eta is None or self.tau is None:
            eta_p, tau_p = paper_eta_tau(m, delta, self.C_sign)
        eta = self.eta if self.eta is not None else eta_p
        tau = self.tau if self.tau is not None else tau_p
        xi = min(ell / 10.0,
                 1.0 / (1000.0 * self.C_sign * math.log(60.0 * m * tau / delta)),
                 eps / (200.0 * m * n * n * tau))
        return float(eta), int(tau), float(xi)

    def target(self, n: int, m: int, U_max: float, R: float, eps: float, delta: float) -> float:
        if self.target_constant is None:
            return paper_target(n, m, U_max, R, eps, delta, self.C_PS)
        return self.target_constant * n * math.log(n) ** 2 / eps ** 2

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Cluster:
    """Edge set with weights in ``[w_bar, 2 w_bar]`` and a resistance certificate."""

    edges: np.ndarray
    w_bar: float
    rho: float

    @classmethod
    def from_piece(cls, G: DirectedGraph, piece: Piece, rho: float, weights=None) -> "Cluster":
        w = G.weight if weights is None else np.asarray(weights)
        e = np.asarray(piece.edges, dtype=np.int64)
        return cls(e, float(w[e].min()) if e.size else 0.0, float(rho))

    def check(self, G: DirectedGraph, weights=None, Lp=None) -> dict:
        """Weight band and ``max w * ER diameter`` measured with the dense oracle."""
        from .dense_oracle import er_diameter

        w = G.weight if weights is None else np.asarray(weights)
        we = w[self.edges]
        verts = np.unique(np.concatenate([G.head[self.edges], G.tail[self.edges]]))
        product = float(we.max()) * er_diameter(G.with_weights(w), verts, Lp=Lp) if we.size else 0.0
        return {
            "band": bool(np.all(we >= self.w_bar * (1 - 1e-12)) and np.all(we <= 2 * self.w_bar * (1 + 1e-12))),
            "product": product,
            "rho_ok": product <= self.rho * (1 + 1e-12),
        }


def _rng(seed, key):
    return np.random.default_rng([int(seed) % (2 ** 63), *[int(k) for k in key]])


def _damping(wl, ws, ell, x, top):
    """Largest ``c <= 1`` keeping ``w o (1 + c x)`` and ``w o (1 - c x)`` in the band.

    The band is ``[ell/2, top]`` times the reference.  Symmetric in the
    sign of ``x``, so ``E[c x] = 0`` still holds.
    """
    up = top * ws / wl - 1.0
    down = 1.0 - 0.5 * ell * ws / wl
    room = np.minimum(up, down)
    ax = np.abs(x)
    nz = ax > 0
    if not nz.any():
        return 1.0
    return float(min(1.0, 0.99 * np.min(room[nz] / ax[nz])))


def _potential(wl, w0):
    return math.fsum(np.log(wl / w0).tolist())


def basic_fast_sparsify(H, G: DirectedGraph, w_star, ell: float, delta: float, eps: float,
                        F, T: SpanningTree, config: SparsifyConfig | None = None,
                        weights=None, rho: float | None = None, key=(), stats: dict | None = None
                        ) -> np.ndarray:
    """Random reweighting of one cluster followed by tree degree repair.

    Parameters
    ----------
    H : array_like of int or Piece
        Edge indices of the cluster in ``G``.
    G : DirectedGraph
        Host graph; only its structure is used when ``weights`` is given.
    w_star : array_like, shape (m,)
        Reference weights defining the frozen sets and the band.
    ell : float
        Shrink factor defining the small set ``S_t``.
    F : array_like of int
        Edges of ``H`` that may move.
    T : SpanningTree
        Tree of ``G`` used for degree repair; disjoint from ``H``.
    weights : array_like, optional
        Current weights (defaults to ``G.weight``).
    rho : float, optional
        Resistance certificate, used only for the precondition check.
    key : tuple of int
        Extra RNG key, combined with ``config.seed``.
    stats : dict, optional
        Receives counters: trials, steps, exit reason, violations.

    Returns
    -------
    ndarray, shape (m,)
        New weights with the same degree imbalance as the input.
    """
    cfg = config or SparsifyConfig()
    w = np.array(G.weight if weights is None else weights, dtype=np.float64)
    w_star = np.asarray(w_star, dtype=np.float64)
    EH = np.unique(np.asarray(H.edges if isinstance(H, Piece) else H, dtype=np.int64))
    F = np.unique(np.asarray(F, dtype=np.int64))
    posF = np.searchsorted(EH, F)
    if F.size and (posF.max() >= EH.size or np.any(EH[posF] != F)):
        raise PreconditionViolated("F must be a subset of the cluster edges")
    m_sup = int(np.count_nonzero(w))
    eta, tau, xi = cfg.step_parameters(m_sup, G.n, delta, eps, ell)
    verts, inv = np.unique(np.concatenate([G.head[EH], G.tail[EH]]), return_inverse=True)
    hl, tl = inv[: EH.size], inv[EH.size:]
    m_hat, n_hat = EH.size, verts.size

    w_in = w[EH].copy()
    ws = w_star[EH]
    violations = _bfs_violations(cfg, w, w_star, EH, F, T, m_hat, n_hat, ell, rho, m_sup, delta, w_in)
    info = {"trials": 0, "steps": 0, "exit": None, "eta": eta, "tau": tau, "xi": xi,
            "violations": violations}

    wF = w_in[posF]
    mean = float(wF.sum() / F.size) if F.size else 0.0
    # theoretical rule: freeze at 50x, band top 60x; the cap scales both
    big = cfg.growth_cap * np.minimum(ws[posF], mean)
    top = 1.2 * cfg.growth_cap
    small = ell * ws[posF]
    quarter = F.size / 4.0

    def status(wl):
        S = wl[posF] <= small
        L = wl[posF] >= big
        pot = _potential(wl, w_in)
        return S, L, pot, (S.sum() < quarter and pot > -m_hat)

    wl = w_in.copy()
    S, L, pot, go = status(wl)
    if not go:
        info["exit"] = "immediate"
    while go:
        if info["trials"] >= cfg.max_trials:
            info["exit"] = "exhausted"
            break
        rng = _rng(cfg.seed, (*key, info["trials"]))
        wl = w_in.copy()
        stuck = False
        for _ in range(tau + 1):
            S, L, pot, go = status(wl)
            if not go:
                break
            act = posF[~S & ~L]
            if act.size == 0:
                stuck = True
                break
            s = rng.integers(0, 2, size=act.size) * 2.0 - 1.0
            ah, at = hl[act], tl[act]
            lv, linv = np.unique(np.concatenate([ah, at]), return_inverse=True)
            if act.size < lv.size:
                # a forest on the active edges has no circulations to move along
                stuck = True
                break
            x, _ = local_projection(lv.size, linv[: act.size], linv[act.size:],
                                    wl[act], wl[act], eta * s, fallback=True)
            if np.abs(x).max() <= 1e-12 * eta:
                # the only circulation is parallel to the weights, which the step must keep
                stuck = True
                break
            c = _damping(wl[act], ws[act], ell, x, top) if cfg.step_damping else 1.0
            wl[act] *= 1.0 + c * x
            info["steps"] += 1
        info["trials"] += 1
        S, L, pot, go = status(wl)
        if stuck and go:
            info["exit"] = "stuck"
            break
    if info["exit"] is None:
        info["exit"] = "small" if S.sum() >= quarter else "potential"
    info.update(small_fraction=float(S.sum() / F.size) if F.size else 1.0,
                potential=pot, m_hat=m_hat, n_hat=n_hat, F=int(F.size))

    # degree repair: route B^T (w - w_t) through the tree
    z = np.zeros(G.m)
    z[EH] = w_in - wl
    y = rounding(G, z, T, check=False)
    w[EH] = wl
    w += y
    if stats is not None:
        stats.update(info)
    return w


def _bfs_violations(cfg, w, w_star, EH, F, T, m_hat, n_hat, ell, rho, m_sup, delta, w_in):
    bad = []
    if m_hat < 40 * n_hat:
        bad.append(f"cluster has {m_hat} edges on {n_hat} vertices, fewer than 40 per vertex")
    if F.size < m_hat / 4:
        bad.append("|F| is below a quarter of the cluster edges")
    ratio = w.sum() / max(w_star.sum(), 1e-300)
    if not 0.99 <= ratio <= 1.01:
        bad.append(f"weight ratio {ratio:.4f} outside [0.99, 1.01]")
    ws = w_star[EH]
    if np.any(w_in < 0.5 * ell * ws * (1 - 1e-12)) or np.any(w_in > 1.2 * cfg.growth_cap * ws * (1 + 1e-12)):
        bad.append("cluster weights outside the band around the reference")
    if T.edges.size and w[T.edges].min() < 1 - 1e-6:
        bad.append("tree weight below 1")
    if rho is not None and F.size:
        alpha = w[F].sum() / (F.size * max(ws.min(), 1e-300))
        h = cfg.C_BFS * alpha * rho * math.log(m_sup / delta)
        if h > 1:
            bad.append(f"C_BFS * alpha * rho * log(m/delta) = {h:.3g} > 1")
    if bad and cfg.check_preconditions:
        raise PreconditionViolated("; ".join(bad))
    return bad


def _length_diameter(G, EH, lengths):
    """Upper bound on the resistance diameter of a piece from its edge lengths.

    Resistance is a metric, so shortest paths under resistance
    overestimates bound it from above.  Exact all-pairs for small pieces,
    twice one eccentricity otherwise.
    """
    verts, inv = np.unique(np.concatenate([G.head[EH], G.tail[EH]]), return_inverse=True)
    k = EH.size
    A = sp.csr_matrix((lengths[EH], (inv[:k], inv[k:])), shape=(verts.size, verts.size))
    if verts.size <= 400:
        d = csgraph.dijkstra(A, directed=False)
        return float(d[np.isfinite(d)].max())
    d = csgraph.dijkstra(A, directed=False, indices=0)
    return 2.0 * float(d[np.isfinite(d)].max())


def phase_schedule(n: int, m: int, W: float, eps: float) -> tuple[float, int, float, int]:
    """``(l_1, tau_1, l_2, tau_2)`` of the two reweighting phases."""
    log_nwe = math.log(n * W / eps)
    ell1 = 1.0 / (2.0 * log_nwe ** 2)
    ell2 = eps / (4.0 * n * m * W)
    return ell1, math.ceil(math.log(2.0 / ell1)), ell2, math.ceil(math.log(2.0 / ell2))


def two_phase(EH, G: DirectedGraph, T: SpanningTree, w, schedule, delta: float, eps: float,
              I: int, config: SparsifyConfig, key=(), stats: dict | None = None) -> np.ndarray:
    """Drive a quarter of ``EH`` below ``l_1 w*``, then push those edges below ``l_2 w*``.

    Each call receives ``delta / (I tau)`` and ``eps / (I tau)`` for the
    phase length ``tau``.  Counters accumulate into ``stats``.
    """
    cfg = config
    st = stats if stats is not None else {}
    for k in ("calls", "trials", "steps", "dichotomy_failures"):
        st.setdefault(k, 0)
    st.setdefault("violations", [])
    ell1, tau1, ell2, tau2 = schedule
    EH = np.asarray(EH, dtype=np.int64)
    w_star = np.array(w, dtype=np.float64)
    w = w_star.copy()
    for phase, ell, tau_c in ((1, ell1, tau1), (2, ell2, tau2)):
        if phase == 1:
            F = EH
        else:
            F = EH[w[EH] <= ell1 * w_star[EH]]
            if F.size == 0:
                break
        for t in range(tau_c):
            s = {}
            w = basic_fast_sparsify(EH, G, w_star, ell, delta / (I * tau_c),
                                    eps / (I * tau_c), F, T, cfg, weights=w,
                                    key=(*key, phase, t), stats=s)
            st["calls"] += 1
            st["trials"] += s["trials"]
            st["steps"] += s["steps"]
            for v in s["violations"]:
                if v not in st["violations"]:
                    st["violations"].append(v)
            if s["exit"] in ("exhausted", "stuck"):
                # later calls would restart from the same weights and fail again
                st["dichotomy_failures"] += 1
                break
    return w


def _decomp_sparsify_weights(pieces, G, T, delta, eps, W, cfg, weights, rho=None, key=(),
                             stats=None, lengths=None):
    w = np.array(weights, dtype=np.float64)
    n = G.n
    m = int(np.count_nonzero(w))
    I = max(len(pieces), 1)
    removed = np.zeros(G.m, dtype=bool)
    log_nwe = math.log(n * W / eps)
    ell1, tau1, ell2, tau2 = phase_schedule(n, m, W, eps)
    st = stats if stats is not None else {}
    st.update(pieces=len(pieces), processed=0, calls=0, trials=0, steps=0, dichotomy_failures=0,
              violations=[], ell1=ell1, tau1=tau1, ell2=ell2, tau2=tau2)
    if rho is not None:
        h = cfg.C_PS * rho * math.log(n * W / (delta * eps)) * math.log(max(log_nwe, 1.0)) ** 2
        st["hypothesis"] = h
        if h > 1:
            msg = f"C_PS * rho * log * loglog^2 = {h:.3g} > 1"
            if cfg.check_preconditions:
                raise PreconditionViolated(msg)
            st["violations"].append(msg)
    st["skipped_hypothesis"] = 0
    for i, piece in enumerate(pieces):
        EH = np.asarray(piece.edges, dtype=np.int64)
        n_hat = int(np.asarray(piece.vertices).size)
        if EH.size < cfg.min_piece_density * n_hat:
            continue
        if cfg.piece_guard and lengths is not None:
            # cluster hypothesis with alpha = mean / min weight and rho from the length estimates
            we = w[EH]
            rho_hat = float(we.max() * _length_diameter(G, EH, lengths))
            alpha = float(we.mean() / we.min())
            if cfg.C_BFS * alpha * rho_hat * math.log(m / delta) > 1.0:
                st["skipped_hypothesis"] += 1
                continue
        st["processed"] += 1
        w = two_phase(EH, G, T, w, (ell1, tau1, ell2, tau2), delta / 4, eps / 4, I, cfg,
                      key=(*key, i), stats=st)
        removed[EH[w[EH] <= eps / (4.0 * n * m)]] = True
    zR = np.where(removed, w, 0.0)
    y = rounding(G, zR, T, check=False)
    w = w - zR + y
    w[removed] = 0.0
    st["removed"] = int(removed.sum())
    return w


def decomp_sparsify(decomp: Decomposition, G: DirectedGraph, T: SpanningTree, delta: float,
                    eps: float, W: float, config: SparsifyConfig | None = None,
                    key=(), stats: dict | None = None) -> DirectedGraph:
    """Two-phase reweighting of every sufficiently dense piece, then deletion.

    Pieces with fewer than ``min_piece_density * n_hat`` edges are skipped.
    Edges ending at weight ``<= eps / (4 n m)`` are deleted and their
    degree imbalance is routed through ``T``.  Zero-weight edges are
    dropped from the returned graph.
    """
    cfg = config or SparsifyConfig()
    w = _decomp_sparsify_weights(decomp.pieces, G, T, delta, eps, W, cfg, G.weight,
                                 rho=decomp.quality, key=key, stats=stats, lengths=decomp.lengths)
    return G.with_weights(np.maximum(w, 0.0))


@dataclass
class SparsifyResult:
    """Output graph with the per-round trajectory and counters."""

    graph: DirectedGraph
    weights: np.ndarray
    trajectory: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"trajectory": self.trajectory, "info": self.info}


def _electrical_cleanup(G, T, w, drop, max_shift=0.5):
    """Delete ``drop`` edges and absorb their imbalance by an electrical flow.

    The correction on surviving edge ``e`` is ``w_e (phi_head - phi_tail)``
    with ``L phi = B^T z``, so every edge moves in proportion to its own
    weight.  Skipped (returning ``w`` unchanged) when some edge would move
    by more than ``max_shift`` of its weight.
    """
    if not drop.any():
        return w, 0
    z = np.where(drop, w, 0.0)
    keep = (w > 0) & ~drop
    idx = np.flatnonzero(keep)
    d = degree_imbalance(G, z)
    phi = DirectSolver(G.n, G.head[idx], G.tail[idx], w[idx])(d)
    rel = phi[G.head[idx]] - phi[G.tail[idx]]
    if np.abs(rel).max() > max_shift:
        return w, 0
    out = w.copy()
    out[drop] = 0.0
    out[idx] = w[idx] * (1.0 + rel)
    # exact repair of the floating-point residual
    resid = np.zeros(G.m)
    resid[:] = w - out
    out += rounding(G, resid, T, check=False)
    return out, int(drop.sum())


def _check_input(G, cfg):
    if G.n > 1 and not is_connected(G):
        raise Disconnected("input graph is disconnected")
    w = G.weight
    integral = bool(np.all(w == np.round(w)))
    tol = 0.0 if integral else 1e-12
    imb = np.abs(degree_imbalance(G)).max() if G.n else 0.0
    if imb > tol * max(G.total_weight, 1.0):
        raise NotEulerian(f"degree imbalance {imb:.3e}")
    if G.m and w.min() < 1.0:
        raise PreconditionViolated("weights must be at least 1; rescale the graph first")


def run_fast_sparsify(G: DirectedGraph, eps: float | None = None, delta: float | None = None,
                      config: SparsifyConfig | None = None) -> SparsifyResult:
    """Sparsify an Eulerian graph and keep the per-round record.

    ``eps`` and ``delta`` override the values in ``config``.
    """
    cfg = config or SparsifyConfig()
    eps = cfg.eps if eps is None else eps
    delta = cfg.delta if delta is None else delta
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise InfeasibleParameters("eps and delta must lie in (0, 1)")
    _check_input(G, cfg)
    n, m = G.n, G.m
    w = G.weight.astype(np.float64).copy()
    if n < 2 or m == 0:
        return SparsifyResult(G, w, [], {"rounds": 0})
    T = spanning_tree(G)
    hat = np.ones(m, dtype=bool)
    hat[T.edges] = False
    R = cfg.rounds if cfg.rounds is not None else math.ceil(6 * math.log(n))
    U = float(w.max())
    U_max = U * cfg.C_PS ** R
    target = cfg.target(n, m, U_max, R, eps, delta)
    track = cfg.track_error and n <= MAX_N
    trajectory = []
    t0 = time.perf_counter()
    t = 0
    while t < R and np.count_nonzero(w[hat]) > target:
        tic = time.perf_counter()
        w_round = w.copy()
        kept = np.flatnonzero(w > 0)
        Gt = DirectedGraph(n, G.head[kept], G.tail[kept], w[kept])
        sub = np.flatnonzero(hat[kept])
        seed_t = int(np.random.SeedSequence([cfg.seed % (2 ** 63), t, 0]).generate_state(1)[0])
        D = er_decomp(Gt, 2.0, delta / (2 * R), seed=seed_t, edges=sub)
        pieces = [Piece(p.vertices, kept[np.asarray(p.edges, dtype=np.int64)], p.quality)
                  for p in D.pieces]
        lengths = np.zeros(m)
        lengths[kept] = D.lengths
        st = {}
        w = _decomp_sparsify_weights(pieces, G, T, delta / (2 * R), eps / (4 * R), U_max, cfg, w,
                                     rho=D.quality, key=(t,), stats=st, lengths=lengths)
        small = hat & (w > 0) & (w <= eps / (4.0 * m * n))
        zD = np.where(small, w, 0.0)
        y = rounding(G, zD, T, check=False)
        w = w - zD + y
        w[small] = 0.0
        cleaned = 0
        if cfg.cleanup_ratio > 0:
            w, cleaned = _electrical_cleanup(G, T, w, hat & (w > 0) & (w <= cfg.cleanup_ratio * w_round))
        t += 1
        row = {"round": t, "nnz": int(np.count_nonzero(w)), "pieces": len(pieces),
               "processed": st["processed"], "skipped_hypothesis": st["skipped_hypothesis"],
               "removed": st["removed"] + int(small.sum()) + cleaned, "cleaned": cleaned,
               "calls": st["calls"], "trials": st["trials"], "steps": st["steps"],
               "dichotomy_failures": st["dichotomy_failures"],
               "seconds": time.perf_counter() - tic}
        if track:
            row["error"] = sparsifier_error(G, G.with_weights(np.maximum(w, 0.0)))
        if st["violations"]:
            row["violations"] = st["violations"]
        trajectory.append(row)
        if st["processed"] == 0 and row["removed"] == 0:
            # weights are unchanged, so later rounds would only redraw the decomposition
            break
    out = G.with_weights(np.maximum(w, 0.0))
    wpos = w[w > 0]
    info = {
        "rounds": t,
        "round_budget": R,
        "target": target,
        "U_max": U_max,
        "nnz_in": m,
        "nnz_out": out.m,
        "weight_ratio_log": float(math.log(wpos.max() / wpos.min())) if wpos.size else 0.0,
        "degree_residual_linf": float(np.abs(degree_imbalance(out) - degree_imbalance(G)).max()),
        "seconds": time.perf_counter() - t0,
        "profile": cfg.profile,
    }
    return SparsifyResult(out, w, trajectory, info)


def fast_sparsify(G: DirectedGraph, eps: float | None = None, delta: float | None = None,
                  config: SparsifyConfig | None = None) -> DirectedGraph:
    """Sparse reweighted subgraph with the same degrees and ``eps`` spectral error."""
    return run_fast_sparsify(G, eps, delta, config).graph
