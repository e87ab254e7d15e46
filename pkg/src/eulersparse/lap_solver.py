"""Undirected Laplacian solvers.

Three ways to apply an approximate pseudoinverse of ``L = B^T W B``:

* :meth:`LaplacianSolver.solve` runs preconditioned conjugate gradient and
  stops on a rigorous a posteriori bound for the relative energy error.
* :meth:`LaplacianSolver.linear_operator` runs a fixed number of Jacobi
  preconditioned Chebyshev steps, so the map ``b -> x`` is exactly linear.
* :class:`DirectSolver` factors a grounded Laplacian once per connected
  component and is used where many right-hand sides share one matrix.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components, minimum_spanning_tree

from .errors import DimensionMismatch, Disconnected, InfeasibleParameters, NoConvergence
from .graph_core import DirectedGraph

__all__ = [
    "LaplacianSolver",
    "ChebyshevOperator",
    "DirectSolver",
    "TreeSolver",
    "solve",
    "linear_operator",
    "chebyshev_steps",
]


def _laplacian(n, head, tail, w):
    deg = np.bincount(head, weights=w, minlength=n) + np.bincount(tail, weights=w, minlength=n)
    rows = np.concatenate([head, tail, np.arange(n)])
    cols = np.concatenate([tail, head, np.arange(n)])
    vals = np.concatenate([-w, -w, deg])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n)), deg


def _center(x):
    return x - x.mean(axis=0, keepdims=True)


class TreeSolver:
    """Exact pseudoinverse of a spanning-tree Laplacian in O(n).

    ``parent``/``parent_weight`` describe a rooted tree; vertices are
    processed level by level so each sweep is a handful of numpy calls.
    """

    def __init__(self, parent: np.ndarray, parent_weight: np.ndarray, depth: np.ndarray):
        self.parent = parent
        self.parent_weight = parent_weight
        order = np.argsort(depth, kind="stable")
        d = depth[order]
        cuts = np.flatnonzero(np.diff(d)) + 1
        self.levels = [lvl for lvl in np.split(order, cuts) if lvl.size and depth[lvl[0]] > 0]

    def apply(self, r: np.ndarray) -> np.ndarray:
        s = _center(np.array(r, dtype=np.float64, copy=True))
        vec = s.ndim == 1
        if vec:
            s = s[:, None]
        for lvl in reversed(self.levels):
            np.add.at(s, self.parent[lvl], s[lvl])
        z = np.zeros_like(s)
        for lvl in self.levels:
            z[lvl] = z[self.parent[lvl]] + s[lvl] / self.parent_weight[lvl, None]
        z = _center(z)
        return z[:, 0] if vec else z


def _max_weight_tree(n, head, tail, w):
    """Parent arrays of a maximum-weight spanning tree rooted at 0."""
    W = sp.csr_matrix((w, (head, tail)), shape=(n, n))
    W = (W + W.T).tocsr()
    R = W.copy()
    R.data = 1.0 / R.data
    T = minimum_spanning_tree(sp.triu(R).tocsr()).tocoo()
    tw = 1.0 / T.data
    adj = sp.csr_matrix((np.concatenate([tw, tw]),
                         (np.concatenate([T.row, T.col]), np.concatenate([T.col, T.row]))),
                        shape=(n, n))
    order, pred = sp.csgraph.breadth_first_order(adj, 0, directed=False, return_predecessors=True)
    parent = np.where(pred < 0, -1, pred).astype(np.int64)
    parent_weight = np.ones(n)
    depth = np.zeros(n, dtype=np.int64)
    for v in order[1:]:
        depth[v] = depth[parent[v]] + 1
    nonroot = parent >= 0
    parent_weight[nonroot] = np.asarray(adj[np.flatnonzero(nonroot), parent[nonroot]]).ravel()
    return parent, parent_weight, depth


def _tree_lambda2_lower(n, parent, parent_weight, depth):
    """Lower bound on lambda_2 of any graph containing this weighted tree.

    For ``x`` orthogonal to ones, ``n ||x||^2`` equals the sum of squared
    differences over all pairs, and each pair is bounded by its tree
    resistance times the energy.  Summing tree resistances edge by edge
    gives ``sum_e s_e (n - s_e) / w_e``.
    """
    size = np.ones(n)
    for v in np.argsort(-depth, kind="stable"):
        if parent[v] >= 0:
            size[parent[v]] += size[v]
    nonroot = parent >= 0
    total = float(np.sum(size[nonroot] * (n - size[nonroot]) / parent_weight[nonroot]))
    return n / total if total > 0 else math.inf


def chebyshev_steps(kappa: float, xi: float) -> int:
    """Smallest ``k`` with ``2 q^k <= xi`` for ``q = (sqrt(kappa)-1)/(sqrt(kappa)+1)``."""
    if kappa <= 1.0:
        return 1
    s = math.sqrt(kappa)
    q = (s - 1) / (s + 1)
    return max(1, math.ceil(math.log(xi / 2) / math.log(q)))


class ChebyshevOperator:
    """Fixed-step Chebyshev iteration on ``D^{-1/2} L D^{-1/2}``.

    The step count and spectral interval are fixed at construction, so
    calling the operator is a linear map of its argument.  Inputs are
    projected onto the complement of the all-ones vector first.
    """

    def __init__(self, L: sp.csr_matrix, deg: np.ndarray, k: int, lam_lo: float, lam_hi: float = 2.0):
        if k < 1:
            raise InfeasibleParameters("iteration count must be at least 1")
        self.L = L
        self.k = int(k)
        self.lam_lo = float(lam_lo)
        self.lam_hi = float(lam_hi)
        self._dinv_half = 1.0 / np.sqrt(deg)
        self._A = sp.diags(self._dinv_half) @ L @ sp.diags(self._dinv_half)

    @property
    def error_bound(self) -> float:
        """Worst-case relative energy error implied by the spectral interval."""
        kappa = self.lam_hi / self.lam_lo
        s = math.sqrt(kappa)
        q = (s - 1) / (s + 1)
        return 2 * q ** self.k / (1 + q ** (2 * self.k))

    def __call__(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.L.shape[0]:
            raise DimensionMismatch(f"rhs has {b.shape[0]} rows, expected {self.L.shape[0]}")
        vec = b.ndim == 1
        c = _center(b[:, None] if vec else b)
        c = c * self._dinv_half[:, None]
        theta = (self.lam_hi + self.lam_lo) / 2
        half = (self.lam_hi - self.lam_lo) / 2
        sigma = theta / half
        rho = 1.0 / sigma
        d = c / theta
        y = d.copy()
        r = c
        for _ in range(self.k - 1):
            r = r - self._A @ d
            rho_next = 1.0 / (2 * sigma - rho)
            d = (rho_next * rho) * d + (2 * rho_next / half) * r
            y = y + d
            rho = rho_next
        x = _center(y * self._dinv_half[:, None])
        return x[:, 0] if vec else x

    matvec = __call__


class LaplacianSolver:
    """Solver handle for the undirected Laplacian of a connected graph.

    Parameters
    ----------
    G : DirectedGraph
        Graph whose underlying undirected Laplacian ``B^T W B`` is solved.
    preconditioner : {"tree", "jacobi"}
        Preconditioner for conjugate gradient.  ``"tree"`` uses a maximum
        weight spanning tree solved exactly.
    max_iter : int, optional
        Iteration cap for conjugate gradient; ``NoConvergence`` beyond it.
    """

    def __init__(self, G: DirectedGraph, preconditioner: str = "tree", seed=None,
                 max_iter: int | None = None, weights=None):
        w = G.weight if weights is None else np.asarray(weights, dtype=np.float64)
        self.n = G.n
        if G.n > 1 and (G.m == 0 or connected_components(
                sp.csr_matrix((np.ones(G.m), (G.head, G.tail)), shape=(G.n, G.n)),
                directed=False)[0] != 1):
            raise Disconnected("solver requires a connected graph")
        self.L, self.deg = _laplacian(G.n, G.head, G.tail, w)
        self.seed = seed
        self.preconditioner = preconditioner
        self.max_iter = max_iter if max_iter is not None else 20 * G.n + 2000
        if G.n > 1:
            parent, pw, depth = _max_weight_tree(G.n, G.head, G.tail, w)
            self._tree = TreeSolver(parent, pw, depth)
            self.lambda2_lower = _tree_lambda2_lower(G.n, parent, pw, depth)
        else:
            self._tree = None
            self.lambda2_lower = math.inf
        self.lambda_max_upper = 2.0 * float(self.deg.max()) if G.n else 0.0
        self._lam_norm = None
        self.last_info: dict = {}

    # -- adaptive mode -------------------------------------------------------

    def _precondition(self, r):
        if self.preconditioner == "tree" and self._tree is not None:
            return self._tree.apply(r)
        if self.preconditioner == "jacobi":
            return _center(r / self.deg)
        raise InfeasibleParameters(f"unknown preconditioner {self.preconditioner!r}")

    def residual_target(self, xi: float) -> float:
        """Relative residual that certifies relative energy error ``xi``."""
        return xi * math.sqrt(self.lambda2_lower / self.lambda_max_upper)

    def solve(self, b, xi: float = 1e-8, delta: float | None = None) -> np.ndarray:
        """Return ``x`` with ``||x - L^+ b||_L <= xi ||L^+ b||_L``.

        The stopping rule uses ``||e||_L^2 <= ||r||^2 / lambda_2`` and
        ``||L^+ b||_L^2 >= ||b||^2 / lambda_max`` with certified bounds on
        both eigenvalues, and is checked on the true residual.  ``delta``
        is accepted for interface compatibility; the bound is deterministic.
        """
        if not 0 < xi < 1:
            raise InfeasibleParameters("xi must lie in (0, 1)")
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise DimensionMismatch(f"rhs has {b.shape[0]} rows, expected {self.n}")
        if b.ndim == 2:
            return np.column_stack([self.solve(b[:, j], xi) for j in range(b.shape[1])])
        b = _center(b)
        bnorm = np.linalg.norm(b)
        if bnorm == 0 or self.n <= 1:
            self.last_info = {"iterations": 0, "relative_residual": 0.0}
            return np.zeros(self.n)
        target = self.residual_target(xi) * bnorm
        x = np.zeros(self.n)
        r = b.copy()
        total = 0
        while True:
            z = self._precondition(r)
            p = z.copy()
            rz = r @ z
            while np.linalg.norm(r) > target:
                if total >= self.max_iter:
                    raise NoConvergence(
                        f"conjugate gradient hit {self.max_iter} iterations; "
                        f"relative residual {np.linalg.norm(r) / bnorm:.3e}"
                    )
                Ap = self.L @ p
                pAp = p @ Ap
                if pAp <= 0:
                    break
                alpha = rz / pAp
                x += alpha * p
                r -= alpha * Ap
                z = self._precondition(r)
                rz_new = r @ z
                p = z + (rz_new / rz) * p
                rz = rz_new
                total += 1
            true_r = b - self.L @ x
            if np.linalg.norm(true_r) <= target:
                break
            if total >= self.max_iter:
                raise NoConvergence(f"conjugate gradient hit {self.max_iter} iterations")
            r = true_r
        self.last_info = {"iterations": total,
                          "relative_residual": float(np.linalg.norm(true_r) / bnorm)}
        return _center(x)

    # -- linear mode ---------------------------------------------------------

    def normalized_lambda2(self) -> float:
        """Estimate of the smallest nonzero eigenvalue of ``D^{-1/2} L D^{-1/2}``."""
        if self._lam_norm is None:
            self._lam_norm = _normalized_lambda2(self.L, self.deg, self.seed)
        return self._lam_norm

    def linear_operator(self, k: int | None = None, xi: float = 0.01,
                        safety: float = 0.5) -> ChebyshevOperator:
        """Fixed-step Chebyshev operator.

        With ``k`` omitted, the step count is the smallest meeting the
        Chebyshev bound for relative energy error ``xi`` on the interval
        ``[safety * lambda_2_estimate, 2]``.
        """
        lam_lo = safety * self.normalized_lambda2()
        if k is None:
            k = chebyshev_steps(2.0 / lam_lo, xi)
        return ChebyshevOperator(self.L, self.deg, k, lam_lo, 2.0)


def _normalized_lambda2(L, deg, seed, dense_limit: int = 1500) -> float:
    n = L.shape[0]
    if n <= 1:
        return 1.0
    dih = 1.0 / np.sqrt(deg)
    A = sp.diags(dih) @ L @ sp.diags(dih)
    if n <= dense_limit:
        return float(np.linalg.eigvalsh(A.toarray())[1])
    rng = np.random.default_rng(seed)
    kern = np.sqrt(deg)[:, None] / np.linalg.norm(np.sqrt(deg))
    X = rng.standard_normal((n, 4))
    X -= kern @ (kern.T @ X)
    vals, _ = spla.lobpcg(A, X, Y=kern, largest=False, tol=1e-4, maxiter=400)
    return float(np.min(vals))


class DirectSolver:
    """Exact Laplacian pseudoinverse via one factorization per component.

    Works on disconnected graphs: each component is grounded at its first
    vertex, the right-hand side is projected to be balanced on every
    component and the solution is centered per component.  Components up
    to ``dense_limit`` vertices use dense Cholesky, larger ones sparse LU.
    """

    def __init__(self, n: int, head, tail, w, dense_limit: int = 600):
        head = np.asarray(head, dtype=np.int64)
        tail = np.asarray(tail, dtype=np.int64)
        w = np.asarray(w, dtype=np.float64)
        self.n = int(n)
        L, _ = _laplacian(self.n, head, tail, w)
        A = sp.csr_matrix((np.ones(head.size), (head, tail)), shape=(n, n))
        self.ncomp, self.labels = connected_components(A, directed=False)
        order = np.argsort(self.labels, kind="stable")
        cuts = np.flatnonzero(np.diff(self.labels[order])) + 1
        self.groups = np.split(order, cuts) if n else []
        self._factors = []
        L = L.tocsc()
        for g in self.groups:
            if g.size <= 1:
                self._factors.append(None)
                continue
            inner = g[1:]
            sub = L[inner][:, inner]
            if g.size <= dense_limit:
                self._factors.append(("dense", sla.cho_factor(sub.toarray(), lower=True)))
            else:
                self._factors.append(("lu", spla.splu(sub.tocsc())))

    @classmethod
    def from_graph(cls, G: DirectedGraph, weights=None, **kw) -> "DirectSolver":
        w = G.weight if weights is None else weights
        return cls(G.n, G.head, G.tail, w, **kw)

    def __call__(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise DimensionMismatch(f"rhs has {b.shape[0]} rows, expected {self.n}")
        vec = b.ndim == 1
        B = b[:, None] if vec else b
        X = np.zeros_like(B)
        for g, fac in zip(self.groups, self._factors):
            if fac is None:
                continue
            rhs = B[g] - B[g].mean(axis=0, keepdims=True)
            kind, f = fac
            if kind == "dense":
                sol = sla.cho_solve(f, rhs[1:])
            else:
                sol = f.solve(rhs[1:])
            xg = np.zeros_like(rhs)
            xg[1:] = sol
            X[g] = xg - xg.mean(axis=0, keepdims=True)
        return X[:, 0] if vec else X

    solve = __call__


def solve(handle: LaplacianSolver, b, xi: float, delta: float | None = None) -> np.ndarray:
    return handle.solve(b, xi, delta)


def linear_operator(handle: LaplacianSolver, k: int) -> ChebyshevOperator:
    return handle.linear_operator(k)
