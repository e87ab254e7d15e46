"""Projection onto weighted circulations and exact degree repair on a tree.

For a subgraph ``H`` with edge set ``F`` and weights ``w`` the circulation
projection is ``P_H = I - W B L_{H^2}^+ B^T W`` where ``H^2`` carries the
squared weights.  ``W P_H z`` is always a circulation.  Removing the
direction ``P_H v`` as well gives ``P_{H,v}``, whose image is also
orthogonal to ``v``; with ``v = w`` the reweighting ``w o (1 + x)`` keeps
the total weight fixed.

Rounding routes the degree imbalance of an edge vector through a spanning
tree.  It is how every stage of the sparsifier restores exact degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .dense_oracle import (
    _directed_dense_weighted,
    _gate,
    circulation_projection,
    pinv_half,
    rank_one_projection,
)
from .errors import DegenerateConstraint, DimensionMismatch, InfeasibleParameters, NotATree, PreconditionViolated
from .graph_core import DirectedGraph, SpanningTree, degree_imbalance, validate_tree
from .lap_solver import DirectSolver

__all__ = [
    "ProjectionContext",
    "projection_context",
    "project_exact",
    "proj_minus_rank_one",
    "pmro_conditions",
    "local_projection",
    "rounding",
    "rounding_error_bound",
    "RoundingBound",
]

DEGENERATE_TOL = 1e-12
# local Laplacians up to this size are factored densely
DENSE_LIMIT = 700


@dataclass(frozen=True, eq=False)
class ProjectionContext:
    """Edge subset ``F`` of ``G`` with weights and the constraint vector.

    ``w`` and ``v`` are stored in the order of ``F``.  Vertices are
    relabelled to ``0 .. n_local - 1``.
    """

    G: DirectedGraph
    F: np.ndarray
    w: np.ndarray
    v: np.ndarray
    vertices: np.ndarray = field(repr=False)
    head_local: np.ndarray = field(repr=False)
    tail_local: np.ndarray = field(repr=False)

    @property
    def n_local(self) -> int:
        return int(self.vertices.size)

    def restrict(self, z) -> np.ndarray:
        """Edge vector of ``G`` (or of ``F``) as an ``|F|`` vector; checks support."""
        return _restrict(self.G, self.F, z, "z")

    def expand(self, x) -> np.ndarray:
        out = np.zeros(self.G.m)
        out[self.F] = x
        return out


def _restrict(G, F, z, name):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector")
    if z.size == F.size and z.size != G.m:
        return z.copy()
    if z.size != G.m:
        raise DimensionMismatch(f"{name} has length {z.size}, expected {G.m} or {F.size}")
    mask = np.ones(G.m, dtype=bool)
    mask[F] = False
    if np.any(z[mask] != 0):
        raise PreconditionViolated(f"{name} is not supported on F")
    return z[F].copy()


def projection_context(G: DirectedGraph, F, v=None, w=None) -> ProjectionContext:
    """Build the context for the edge subset ``F``.

    ``v`` defaults to the weights (the total-weight constraint).  Both
    ``v`` and ``w`` may be given edge-indexed over ``G`` or over ``F``.
    """
    F = np.unique(np.asarray(F, dtype=np.int64))
    if F.size and (F[0] < 0 or F[-1] >= G.m):
        raise DimensionMismatch("edge index out of range")
    wF = G.weight[F].astype(np.float64) if w is None else _restrict(G, F, w, "w")
    if np.any(wF <= 0):
        raise PreconditionViolated("weights on F must be positive")
    vF = wF.copy() if v is None else _restrict(G, F, v, "v")
    verts, inv = np.unique(np.concatenate([G.head[F], G.tail[F]]), return_inverse=True)
    hl, tl = inv[: F.size], inv[F.size:]
    return ProjectionContext(G, F, wF, vF, verts, hl, tl)


def project_exact(ctx: ProjectionContext, z, fallback: bool = False) -> np.ndarray:
    """``P_{H,v} z`` with a dense pseudoinverse (reference path).

    Raises :class:`DegenerateConstraint` when ``P_H v = 0`` unless
    ``fallback`` is set, in which case ``P_H z`` is returned.
    """
    zF = ctx.restrict(z)
    if ctx.F.size == 0:
        return ctx.expand(zF)
    _gate(ctx.n_local, None)
    P = circulation_projection(ctx.G, ctx.F, ctx.w)
    try:
        P = rank_one_projection(P, ctx.v)
    except DegenerateConstraint:
        if not fallback:
            raise
    return ctx.expand(P @ zF)


def _dense_labels(adj):
    """Component labels (smallest member) of a dense boolean adjacency."""
    n = adj.shape[0]
    lab = np.arange(n)
    big = np.int64(n)
    for _ in range(n):
        new = np.where(adj, lab[None, :], big).min(axis=1)
        new = np.minimum(new, lab)
        new = new[new]
        if np.array_equal(new, lab):
            break
        lab = new
    return lab


def _dense_h2_solver(n, hl, tl, w2):
    """Solve ``L_{H^2} a = r`` exactly for ``r`` balanced on every component.

    Adding a multiple of each component's averaging matrix makes the
    Laplacian positive definite without changing the solution on
    balanced right-hand sides (up to a per-component constant).
    """
    flat = np.bincount(hl * n + tl, weights=w2, minlength=n * n).reshape(n, n)
    A = flat + flat.T
    L = -A
    L[np.diag_indices(n)] = A.sum(axis=1)
    scale = max(float(L.diagonal().max()), 1e-300) if n else 1.0
    lab = _dense_labels(A > 0)
    sizes = np.bincount(lab, minlength=n)
    L += (lab[:, None] == lab[None, :]) * (scale / sizes[lab])[None, :]
    fac = sla.cho_factor(L, lower=True, check_finite=False)
    return lambda r: sla.cho_solve(fac, r, check_finite=False)


def local_projection(n, hl, tl, w, v, z, fallback: bool = True):
    """Core of :func:`proj_minus_rank_one` on a relabelled edge set.

    ``z`` may be a vector or an ``(|F|, k)`` block.  Returns ``(x, degenerate)``.
    """
    w = np.asarray(w, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    Z = z[:, None] if z.ndim == 1 else z
    cols = np.column_stack([w * v, w[:, None] * Z])
    rhs = np.empty((n, cols.shape[1]))
    for j in range(cols.shape[1]):
        rhs[:, j] = (np.bincount(hl, weights=cols[:, j], minlength=n)
                     - np.bincount(tl, weights=cols[:, j], minlength=n))
    if n <= DENSE_LIMIT:
        sol = _dense_h2_solver(n, hl, tl, w * w)(rhs)
    else:
        sol = DirectSolver(n, hl, tl, w * w)(rhs)
    flows = w[:, None] * (sol[hl] - sol[tl])
    pv = v - flows[:, 0]
    X = Z - flows[:, 1:]
    nrm = float(np.linalg.norm(pv))
    degenerate = nrm <= DEGENERATE_TOL * max(float(np.linalg.norm(v)), 1e-300)
    if degenerate:
        if not fallback:
            raise DegenerateConstraint("constraint vector has no circulation component")
    else:
        u = pv / nrm
        X = X - np.outer(u, u @ X)
    return (X[:, 0] if z.ndim == 1 else X), degenerate


def proj_minus_rank_one(ctx: ProjectionContext, z, delta: float = 0.01, xi: float = 1e-6,
                        u: float | None = None, fallback: bool = True,
                        return_info: bool = False):
    """Approximate ``P_{H,v} z`` with entrywise error at most ``xi``.

    Parameters
    ----------
    ctx : ProjectionContext
    z : array_like
        Edge vector supported on ``F`` with ``||z||_inf <= 1``.
    delta : float
        Failure probability budget of the two Laplacian solves.  The
        solves here are exact factorizations, so it is only recorded.
    xi : float
        Target accuracy in ``(0, 1)``.
    u : float, optional
        Weight cap; defaults to ``max(w_F)``.  Enters the inner accuracy
        ``xi' = xi / (9 n u sqrt(m))``.
    fallback : bool
        Return ``P_H z`` instead of raising when ``P_H v = 0``.

    Returns
    -------
    ndarray, or (ndarray, dict) with ``return_info``
        Edge-indexed ``x`` supported on ``F``.
    """
    if not 0 < xi < 1:
        raise InfeasibleParameters("xi must lie in (0, 1)")
    zF = ctx.restrict(z)
    if zF.size and np.abs(zF).max() > 1 + 1e-12:
        raise PreconditionViolated("||z||_inf must be at most 1")
    u = float(ctx.w.max()) if u is None and ctx.F.size else (1.0 if u is None else float(u))
    xi_inner = xi / (9 * ctx.G.n * u * math.sqrt(max(ctx.G.m, 1)))
    info = {"xi": xi, "xi_inner": xi_inner, "delta": delta, "u": u, "degenerate": False}
    if ctx.F.size == 0 or not np.any(zF):
        x = ctx.expand(np.zeros_like(zF))
    else:
        xF, deg = local_projection(ctx.n_local, ctx.head_local, ctx.tail_local,
                                   ctx.w, ctx.v, zF, fallback=fallback)
        info["degenerate"] = deg
        x = ctx.expand(xF)
    return (x, info) if return_info else x


def pmro_conditions(ctx: ProjectionContext, z, x) -> dict:
    """Measured left-hand sides of the four accuracy conditions.

    Keys: ``support`` (mass of ``x`` outside ``F``), ``linf_error``
    (against the dense projection), ``circulation`` (``||B^T W x||_inf``
    on ``G``) and ``orthogonality`` (``|<x, v>| / ||v||_2``).
    """
    x = np.asarray(x, dtype=np.float64)
    mask = np.ones(ctx.G.m, dtype=bool)
    mask[ctx.F] = False
    ref = project_exact(ctx, z, fallback=True)
    xF = x[ctx.F]
    wx = np.zeros(ctx.G.m)
    wx[ctx.F] = ctx.w * xF
    vn = float(np.linalg.norm(ctx.v))
    return {
        "support": float(np.abs(x[mask]).max()) if mask.any() else 0.0,
        "linf_error": float(np.abs(x - ref).max()) if x.size else 0.0,
        "circulation": float(np.abs(degree_imbalance(ctx.G, wx)).max()) if ctx.G.n else 0.0,
        "orthogonality": abs(float(xF @ ctx.v)) / vn if vn > 0 else 0.0,
    }


# ---------------------------------------------------------------------------
# rounding


def rounding(G: DirectedGraph, z, T: SpanningTree, check: bool = True) -> np.ndarray:
    """The unique flow ``y`` on the tree edges with ``B^T y = B^T z``.

    Subtree demands are prefix differences along a depth-first order,
    accumulated in extended precision, so every tree edge carries the
    demand of its subtree to near machine accuracy.  Each tree component
    must have zero total demand, which holds whenever ``z`` lives on the
    edges of ``G``.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (G.m,):
        raise DimensionMismatch(f"z must have length {G.m}")
    if check:
        validate_tree(G, T, allow_forest=True)
    y = np.zeros(G.m)
    if G.n == 0 or not np.any(z):
        return y
    d = degree_imbalance(G, z)
    seq, start, size = T.preorder
    P = np.zeros(G.n + 1, dtype=np.longdouble)
    np.cumsum(d[seq].astype(np.longdouble), out=P[1:])
    s = (P[start + size] - P[start]).astype(np.float64)
    child = np.flatnonzero(T.parent >= 0)
    e = T.parent_edge[child]
    sign = np.where(G.head[e] == child, 1.0, -1.0)
    if np.any((G.head[e] != child) & (G.tail[e] != child)):
        raise NotATree("parent edge does not touch its child vertex")
    y[e] = sign * s[child]
    return y


@dataclass(frozen=True)
class RoundingBound:
    """Dense measurements for the two spectral rounding bounds."""

    residual_norm: float
    residual_bound: float
    flow_norm: float
    flow_bound: float

    @property
    def holds(self) -> bool:
        return self.residual_norm <= self.residual_bound and self.flow_norm <= self.flow_bound

    def __float__(self) -> float:
        return self.residual_norm


def rounding_error_bound(G: DirectedGraph, z, y, max_n=None, check: bool = True) -> RoundingBound:
    """``||L^{+/2} B^T (Y - Z) H L^{+/2}||`` and ``||L^{+/2} B^T Y H L^{+/2}||``.

    ``L`` is the undirected Laplacian of ``G``.  The bounds are ``n ||z||_1``
    and ``n ||y||_1``; with ``check`` a violation raises
    :class:`PreconditionViolated`.
    """
    _gate(G.n, max_n)
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    S = pinv_half(G.undirected_laplacian().toarray())
    R = S @ _directed_dense_weighted(G, y - z) @ S
    Q = S @ _directed_dense_weighted(G, y) @ S
    out = RoundingBound(
        residual_norm=float(np.linalg.norm(R, 2)),
        residual_bound=G.n * float(np.abs(z).sum()),
        flow_norm=float(np.linalg.norm(Q, 2)),
        flow_bound=G.n * float(np.abs(y).sum()),
    )
    tol = 1e-12 * max(out.residual_bound, out.flow_bound, 1.0)
    if check and (out.residual_norm > out.residual_bound + tol or out.flow_norm > out.flow_bound + tol):
        raise PreconditionViolated("rounding bound violated; are the tree weights at least 1?")
    return out
