"""Effective-resistance estimates from sketched electrical flows.

For a pair ``(u, v)`` the electrical potential ``x = L^+ (e_u - e_v)`` has
energy ``||W^{1/2} B x||^2 = ER(u, v)``.  A scaled Gaussian sketch of the
flow vector estimates that energy; the median of independent sketches
concentrates it.  The pseudoinverse is replaced by a fixed-step Chebyshev
operator, which is linear and symmetric, so one batch of solves against
the sketched incidence serves every pair at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleParameters
from .graph_core import DirectedGraph
from .lap_solver import LaplacianSolver

__all__ = ["EROverestimate", "approx_er", "er_overestimate", "median_count", "DEFAULT_ROWS"]

# 20 rows keep each single estimate inside [2/3, 4/3] of the truth with
# probability above 0.84 even after a 1% solver error, which makes the
# median of 4 log(|S|/delta) sketches fail with probability below delta/|S|.
DEFAULT_ROWS = 20


def median_count(num_pairs: int, delta: float) -> int:
    """Number of independent sketches ``ceil(4 log(|S| / delta))``."""
    return max(1, math.ceil(4 * math.log(max(num_pairs, 1) / delta)))


def approx_er(G: DirectedGraph, pairs, delta: float, seed=None, rows: int = DEFAULT_ROWS,
              solver: LaplacianSolver | None = None, xi: float = 0.01,
              repeats: int | None = None) -> np.ndarray:
    """Estimate effective resistances of vertex pairs.

    Parameters
    ----------
    G : DirectedGraph
        Connected graph; directions are ignored.
    pairs : array_like, shape (k, 2)
        Vertex pairs to estimate.
    delta : float
        Target failure probability for the whole batch.
    rows : int
        Gaussian rows per sketch.
    xi : float
        Relative energy error of the Chebyshev operator.

    Returns
    -------
    ndarray
        One estimate per pair; each lies within ``[2/3, 4/3]`` of the
        true resistance with joint probability at least ``1 - delta``.
    """
    if not 0 < delta < 1:
        raise InfeasibleParameters("delta must lie in (0, 1)")
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.shape[0] == 0:
        return np.zeros(0)
    if solver is None:
        solver = LaplacianSolver(G, seed=seed)
    M = solver.linear_operator(xi=xi)
    K = median_count(pairs.shape[0], delta) if repeats is None else int(repeats)
    rng = np.random.default_rng(seed)
    sw = np.sqrt(G.weight)
    a, b = pairs[:, 0], pairs[:, 1]
    est = np.empty((K, pairs.shape[0]))
    for j in range(K):
        q = rng.standard_normal((G.m, rows)) * (sw[:, None] / math.sqrt(rows))
        # B^T W^{1/2} Q^T, one column per sketch row
        Yt = np.zeros((G.n, rows))
        np.add.at(Yt, G.head, q)
        np.subtract.at(Yt, G.tail, q)
        Z = M(Yt)
        diff = Z[a] - Z[b]
        est[j] = np.einsum("ij,ij->i", diff, diff)
    return np.median(est, axis=0)


@dataclass(frozen=True)
class EROverestimate:
    """Edge-indexed resistance upper bounds with the budget certificate."""

    values: np.ndarray
    certificate: float
    budget: float

    @property
    def within_budget(self) -> bool:
        return self.certificate <= self.budget


def er_overestimate(G: DirectedGraph, delta: float, seed=None, weights=None,
                    **kw) -> EROverestimate:
    """``1.5 x`` the sketched resistances of every edge.

    When the estimates are within their band, each value upper-bounds the
    true resistance and ``w^T r <= 2 n`` follows from ``sum_e w_e ER_e = n - 1``.
    """
    pairs = np.column_stack([G.head, G.tail])
    r = 1.5 * approx_er(G, pairs, delta, seed=seed, **kw)
    w = G.weight if weights is None else np.asarray(weights)
    return EROverestimate(r, float(w @ r), 2.0 * G.n)
