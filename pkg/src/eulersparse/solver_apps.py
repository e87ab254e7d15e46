"""Eulerian Laplacian systems and stationary distributions.

``eulerian_solve`` runs conjugate gradient on the normal equations
``vL^T Lt^+ vL x = vL^T Lt^+ b``, where ``Lt`` is an undirected Laplacian
spectrally close to ``L = B^T W B``.  For Eulerian graphs ``vL + vL^T = L``
and ``L <= 4 vL^T L^+ vL``, so the normal operator is well conditioned
whenever the skew part of ``L^{+/2} vL L^{+/2}`` is bounded.  This is a
one-level substitute for the recursive solver, with the same accuracy
contract and without its running-time guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .dense_oracle import MAX_N, dense_directed_laplacian, dense_undirected_laplacian, pinv, pinv_half
from .errors import (DimensionMismatch, Disconnected, InfeasibleParameters, NoConvergence,
                     NotEulerian, NotIrreducible)
from .graph_core import DirectedGraph, build_graph, degree_imbalance, is_connected
from .lap_solver import DirectSolver
from .sparsify import SparsifyConfig, fast_sparsify

__all__ = [
    "EulerianSolveResult",
    "eulerian_solve",
    "undirected_preconditioner",
    "stationary_distribution",
    "StationaryResult",
]


@dataclass
class EulerianSolveResult:
    """Solution of ``vL x = b`` with its diagnostics.

    ``achieved_error`` is ``||x - vL^+ b||_L / ||vL^+ b||_L`` from the dense
    oracle and ``None`` beyond oracle scale.  ``condition`` is the measured
    condition number of the normal operator on ``1^perp``, also oracle only.
    """

    x: np.ndarray
    iterations: int
    preconditioner_nnz: int
    achieved_error: float | None = None
    condition: float | None = None
    residuals: list = field(default_factory=list, repr=False)


def _symmetrized(G: DirectedGraph) -> DirectedGraph:
    """Bidirected graph with ``w/2`` each way, so its undirected Laplacian is ``L_G``."""
    edges = np.concatenate([np.column_stack([G.head, G.tail]), np.column_stack([G.tail, G.head])])
    return build_graph(G.n, edges, np.concatenate([G.weight, G.weight]) / 2.0)


def undirected_preconditioner(G: DirectedGraph, mode: str = "sparsify",
                              config: SparsifyConfig | None = None):
    """Exact solver for a Laplacian spectrally close to ``L_G``.

    ``mode="sparsify"`` sparsifies the bidirected version of ``G``
    (rescaled so every weight is at least 1); ``mode="exact"`` uses ``L_G``.
    Returns ``(solve, nnz)``.
    """
    if mode == "exact":
        return DirectSolver.from_graph(G), G.m
    if mode != "sparsify":
        raise InfeasibleParameters(f"unknown preconditioner mode {mode!r}")
    S = _symmetrized(G)
    scale = 1.0 / float(S.weight.min())
    H = fast_sparsify(S.with_weights(S.weight * scale), config=config or SparsifyConfig(eps=0.5))
    return DirectSolver(H.n, H.head, H.tail, H.weight / scale), H.m


def _check_eulerian(G: DirectedGraph):
    if G.n > 1 and not is_connected(G):
        raise Disconnected("solver requires a connected graph")
    tol = 1e-12 * max(G.total_weight, 1.0)
    if G.m and np.abs(degree_imbalance(G)).max() > tol:
        raise NotEulerian("eulerian_solve requires an Eulerian graph")


def _normal_cg(vL: sp.csr_matrix, Lt_solve, b, rtol, maxiter, center: bool = True):
    n = vL.shape[0]
    vLT = vL.T.tocsr()

    def matvec(x):
        x = np.asarray(x).ravel()
        return vLT @ Lt_solve(vL @ x)

    M = spla.LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    rhs = vLT @ Lt_solve(b)
    residuals = []
    norm = float(np.linalg.norm(rhs))
    if norm == 0.0:
        return np.zeros(n), 0, residuals
    x, info = spla.cg(M, rhs, rtol=rtol, atol=0.0, maxiter=maxiter,
                      callback=lambda xk: residuals.append(
                          float(np.linalg.norm(rhs - matvec(xk)) / norm)))
    if info != 0:
        raise NoConvergence(f"normal-equation CG stopped after {info} iterations, "
                            f"last relative residual {residuals[-1] if residuals else float('nan'):.3e}")
    return (x - x.mean() if center else x), len(residuals), residuals


def eulerian_solve(G: DirectedGraph, b, eps: float = 1e-6, delta: float = 0.01,
                   preconditioner: str = "sparsify", config: SparsifyConfig | None = None,
                   rtol: float | None = None, maxiter: int | None = None,
                   check: bool | None = None) -> EulerianSolveResult:
    """Solve ``vL x = b`` for an Eulerian graph.

    Parameters
    ----------
    b : array_like, shape (n,)
        Right-hand side orthogonal to the all-ones vector.
    eps : float
        Target ``||x - vL^+ b||_L <= eps ||vL^+ b||_L``.
    preconditioner : {"sparsify", "exact"}
        Source of the undirected Laplacian inside the normal equations.
    rtol : float, optional
        Relative CG residual; defaults to ``eps * 1e-3``.
    check : bool, optional
        Measure the achieved error with the dense oracle.  Defaults to
        ``n <= 512``.

    Returns
    -------
    EulerianSolveResult
    """
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise InfeasibleParameters("eps and delta must lie in (0, 1)")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (G.n,):
        raise DimensionMismatch(f"rhs has shape {b.shape}, expected ({G.n},)")
    _check_eulerian(G)
    if abs(b.sum()) > 1e-10 * max(np.abs(b).sum(), 1.0):
        raise InfeasibleParameters("b must be orthogonal to the all-ones vector")
    cfg = config or SparsifyConfig(eps=0.5, delta=delta)
    solve, nnz = undirected_preconditioner(G, preconditioner, cfg)
    vL = G.directed_laplacian().tocsr()
    x, its, res = _normal_cg(vL, solve, b - b.mean(), rtol if rtol is not None else eps * 1e-3,
                             maxiter if maxiter is not None else 10 * G.n + 1000)
    out = EulerianSolveResult(x, its, nnz, residuals=res)
    if check if check is not None else G.n <= MAX_N:
        Ld = dense_undirected_laplacian(G, max_n=None)
        vLd = dense_directed_laplacian(G, max_n=None)
        xs = np.linalg.lstsq(vLd, b - b.mean(), rcond=None)[0]
        xs -= xs.mean()
        e = x - xs
        den = math.sqrt(max(float(xs @ Ld @ xs), 0.0))
        out.achieved_error = math.sqrt(max(float(e @ Ld @ e), 0.0)) / den if den > 0 else 0.0
        S = pinv_half(Ld)
        K = S @ vLd.T @ pinv(Ld) @ vLd @ S
        lam = np.linalg.eigvalsh((K + K.T) / 2)
        lam = lam[lam > 1e-9 * lam.max()]
        out.condition = float(lam.max() / lam.min()) if lam.size else 1.0
    return out


# ---------------------------------------------------------------------------
# stationary distributions


@dataclass
class StationaryResult:
    """Stationary vector with the refinement record."""

    pi: np.ndarray
    iterations: int
    residual: float


def _transition(P) -> sp.csr_matrix:
    P = sp.csr_matrix(P, dtype=np.float64)
    if P.shape[0] != P.shape[1]:
        raise DimensionMismatch("transition matrix must be square")
    if P.nnz and P.data.min() < 0:
        raise InfeasibleParameters("transition probabilities must be nonnegative")
    rows = np.asarray(P.sum(axis=1)).ravel()
    if np.any(np.abs(rows - 1.0) > 1e-9):
        raise InfeasibleParameters("rows of the transition matrix must sum to 1")
    return P


def stationary_distribution(P, eps: float = 1e-8, max_iter: int = 20,
                            return_info: bool = False):
    """Stationary distribution of an irreducible chain.

    With a candidate ``p`` the graph with weights ``p_u P_uv`` has
    directed Laplacian ``(I - P^T) diag(p)``; its kernel vector ``y``
    gives ``pi = p o y``.  Writing ``y = 1 + c`` turns this into
    ``vL_p c = -d`` with ``d`` the degree imbalance, solved by the
    normal-equation CG of ``eulerian_solve`` against the symmetrized
    Laplacian.  A few rounds, then power steps, reach the ``l2`` target.

    Self-loops are allowed; they cancel in ``I - P^T``.
    """
    P = _transition(P)
    n = P.shape[0]
    if n == 1:
        pi = np.ones(1)
        return StationaryResult(pi, 0, 0.0) if return_info else pi
    ncomp, _ = connected_components(P, directed=True, connection="strong")
    if ncomp != 1:
        raise NotIrreducible(f"transition graph has {ncomp} strongly connected components")
    # self-loops cancel in I - P^T, so the graph uses off-diagonal entries only
    off = P.copy()
    off.setdiag(0.0)
    off.eliminate_zeros()
    coo = off.tocoo()
    head, tail, prob = coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data
    PT = P.T.tocsr()
    p = np.full(n, 1.0 / n)
    resid = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        w = p[head] * prob
        G = DirectedGraph(n, head, tail, w)
        d = degree_imbalance(G)
        solve = DirectSolver(n, head, tail, w)
        vL = G.directed_laplacian().tocsr()
        # kernel of vL_p is spanned by pi / p, not by the all-ones vector
        c, _, _ = _normal_cg(vL, solve, -d, eps * 1e-3, 10 * n + 1000, center=False)
        y = 1.0 + c
        q = np.maximum(p * (y if y.sum() > 0 else -y), 0.0)
        q /= q.sum()
        for _ in range(3):
            q = PT @ q
            q /= q.sum()
        resid = float(np.linalg.norm(PT @ q - q))
        p = q
        if resid <= eps * 1e-2:
            break
    if resid > eps:
        raise NoConvergence(f"stationary residual {resid:.3e} above {eps:.1e}")
    return StationaryResult(p, it, resid) if return_info else p
