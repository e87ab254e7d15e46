"""Dense ground truth: pseudoinverses, operator-norm errors, Loewner checks.

Everything here is O(n^3) and meant for certification at small scale.  The
default size gate is ``MAX_N``; pass ``max_n`` to override it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import Disconnected, InfeasibleParameters, NotPSD, PreconditionViolated
from .graph_core import DirectedGraph, components, degree_imbalance

__all__ = [
    "MAX_N",
    "VerificationReport",
    "dense_directed_laplacian",
    "dense_undirected_laplacian",
    "pinv",
    "pinv_half",
    "sparsifier_error",
    "symmetric_error",
    "exact_er",
    "exact_edge_er",
    "er_diameter",
    "loewner_leq",
    "circulation_projection",
    "rank_one_projection",
    "verify_variance_bound",
    "verify_sparsifier",
]

MAX_N = 512
EPS_MACHINE = 2.0 ** -52
SCHEMA = "eulersparse.verification/1"


@dataclass
class VerificationReport:
    """Dense-oracle measurements with one pass flag per check."""

    opnorm_error: float | None = None
    degree_residual_linf: float | None = None
    nnz: int | None = None
    loewner_margin: float | None = None
    checks: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "opnorm_error": self.opnorm_error,
            "degree_residual_linf": self.degree_residual_linf,
            "nnz": self.nnz,
            "loewner_margin": self.loewner_margin,
            "checks": {k: bool(v) for k, v in self.checks.items()},
            "details": self.details,
            "pass": self.passed,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _gate(n, max_n):
    limit = MAX_N if max_n is None else max_n
    if n > limit:
        raise InfeasibleParameters(f"dense oracle is limited to n <= {limit}, got n = {n}")


def dense_directed_laplacian(G: DirectedGraph, max_n=None) -> np.ndarray:
    _gate(G.n, max_n)
    return G.directed_laplacian().toarray()


def dense_undirected_laplacian(G: DirectedGraph, max_n=None) -> np.ndarray:
    _gate(G.n, max_n)
    return G.undirected_laplacian().toarray()


def _psd_eig(L):
    L = np.asarray(L, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise InfeasibleParameters("expected a square matrix")
    scale = np.abs(L).max(initial=0.0)
    if np.abs(L - L.T).max(initial=0.0) > 1e-10 * scale:
        raise InfeasibleParameters("expected a symmetric matrix")
    vals, vecs = np.linalg.eigh((L + L.T) / 2)
    top = max(abs(vals[-1]), abs(vals[0])) if vals.size else 0.0
    cutoff = L.shape[0] * EPS_MACHINE * top
    if vals.size and vals[0] < -max(cutoff, 1e-10 * top):
        raise NotPSD(f"matrix has eigenvalue {vals[0]:.3e} < 0")
    keep = vals > cutoff
    return vals, vecs, keep


def pinv(L) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix."""
    vals, vecs, keep = _psd_eig(L)
    V = vecs[:, keep]
    return (V / vals[keep]) @ V.T


def pinv_half(L) -> np.ndarray:
    """Square root of the pseudoinverse, ``L^{+/2}``."""
    vals, vecs, keep = _psd_eig(L)
    V = vecs[:, keep]
    return (V / np.sqrt(vals[keep])) @ V.T


def _require_connected(G):
    if G.n > 1 and components(G.n, G.head, G.tail)[0] != 1:
        raise Disconnected("reference graph is disconnected")


def _directed_dense_weighted(G, w):
    L = np.zeros((G.n, G.n))
    np.add.at(L, (G.head, G.head), w)
    np.add.at(L, (G.tail, G.head), -w)
    return L


def _normalized_difference(Gref, Gtest, directed, max_n, require_connected):
    if Gref.n != Gtest.n:
        raise InfeasibleParameters("graphs must share the vertex set")
    _gate(Gref.n, max_n)
    if require_connected:
        _require_connected(Gref)
    S = pinv_half(Gref.undirected_laplacian().toarray())
    if directed:
        D = Gref.directed_laplacian().toarray() - Gtest.directed_laplacian().toarray()
    else:
        D = Gref.undirected_laplacian().toarray() - Gtest.undirected_laplacian().toarray()
    return S @ D @ S


def sparsifier_error(Gref: DirectedGraph, Gtest: DirectedGraph, max_n=None,
                     require_connected: bool = True) -> float:
    """``||L^{+/2} (vL_ref - vL_test) L^{+/2}||_op`` with ``L = L_und(ref)``."""
    M = _normalized_difference(Gref, Gtest, True, max_n, require_connected)
    return float(np.linalg.norm(M, 2))


def symmetric_error(Gref: DirectedGraph, Gtest: DirectedGraph, max_n=None,
                    require_connected: bool = True) -> float:
    """Same as :func:`sparsifier_error` for the undirected Laplacians."""
    M = _normalized_difference(Gref, Gtest, False, max_n, require_connected)
    return float(np.linalg.norm(M, 2))


def exact_er(G: DirectedGraph, pairs, max_n=None) -> np.ndarray:
    """Effective resistances ``b_uv^T L^+ b_uv`` of the undirected graph."""
    _gate(G.n, max_n)
    _require_connected(G)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    Lp = pinv(G.undirected_laplacian().toarray())
    a, b = pairs[:, 0], pairs[:, 1]
    return Lp[a, a] + Lp[b, b] - 2 * Lp[a, b]


def exact_edge_er(G: DirectedGraph, max_n=None) -> np.ndarray:
    return exact_er(G, np.column_stack([G.head, G.tail]), max_n=max_n)


def er_diameter(G: DirectedGraph, vertices, Lp=None) -> float:
    """Largest effective resistance in ``G`` between two of ``vertices``."""
    U = np.unique(np.asarray(vertices, dtype=np.int64))
    if U.size < 2:
        return 0.0
    if Lp is None:
        _gate(G.n, None)
        _require_connected(G)
        Lp = pinv(G.undirected_laplacian().toarray())
    S = Lp[np.ix_(U, U)]
    d = np.diag(S)
    return float((d[:, None] + d[None, :] - 2 * S).max())


def loewner_leq(A, B, tol: float = 1e-10) -> tuple[bool, float]:
    """Check ``A <= B``; returns the flag and ``lambda_min(B - A)``."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise InfeasibleParameters("matrices differ in shape")
    D = B - A
    margin = float(np.linalg.eigvalsh((D + D.T) / 2)[0])
    scale = float(np.linalg.norm(B, 2)) if B.size else 0.0
    return margin >= -tol * scale, margin


def circulation_projection(G: DirectedGraph, F, w=None) -> np.ndarray:
    """Dense ``P_H = I - W B L_{H^2}^+ B^T W`` on the edge subset ``F``.

    Returned as an ``|F| x |F|`` matrix in the order of ``F``.  ``W x`` is a
    circulation on ``F`` for every ``x`` in the image.
    """
    F = np.asarray(F, dtype=np.int64)
    w = G.weight[F] if w is None else np.asarray(w, dtype=np.float64)
    B = G.incidence[F].toarray()
    Z = w[:, None] * B
    L2 = Z.T @ Z
    return np.eye(F.size) - Z @ pinv(L2) @ Z.T


def rank_one_projection(P: np.ndarray, v) -> np.ndarray:
    """``P_{H,v} = P - u u^T`` with ``u = P v / ||P v||``."""
    from .errors import DegenerateConstraint

    v = np.asarray(v, dtype=np.float64)
    pv = P @ v
    nrm = np.linalg.norm(pv)
    if nrm <= 1e-12 * max(np.linalg.norm(v), 1e-300):
        raise DegenerateConstraint("constraint vector has no circulation component")
    u = pv / nrm
    return P - np.outer(u, u)


def variance_matrices(G: DirectedGraph, F, P=None, S=None):
    """Stack of the projected edge matrices ``A~_e`` for ``e`` in ``F``."""
    F = np.asarray(F, dtype=np.int64)
    if S is None:
        S = pinv_half(G.undirected_laplacian().toarray())
    if P is None:
        P = circulation_projection(G, F)
    w = G.weight[F]
    Bf = G.incidence[F].toarray()
    hf = G.head[F]
    # (S b_f) and (S e_{h(f)}) for every f in F
    SB = S @ Bf.T
    SH = S[:, hf]
    # A~_e = sum_f P[f, e] w_f (S b_f)(S e_h(f))^T
    coef = P * w[:, None]
    return np.einsum("fe,if,jf->eij", coef, SB, SH, optimize=True)


def verify_variance_bound(G: DirectedGraph, F, rho: float, P=None,
                          tol: float = 1e-8, max_n=None) -> VerificationReport:
    """Check both projected variance sums against ``rho L^{+/2} L_H L^{+/2}``.

    ``F`` indexes the cluster edges inside ``G``.  Raises
    :class:`PreconditionViolated` when the cluster's weight times its
    effective-resistance diameter exceeds ``rho``.
    """
    _gate(G.n, max_n)
    _require_connected(G)
    F = np.asarray(F, dtype=np.int64)
    Lfull = G.undirected_laplacian().toarray()
    Lp = pinv(Lfull)
    S = pinv_half(Lfull)
    U = np.unique(np.concatenate([G.head[F], G.tail[F]])) if F.size else np.array([], int)
    wmax = float(G.weight[F].max()) if F.size else 0.0
    product = wmax * er_diameter(G, U, Lp=Lp)
    if product > rho * (1 + 1e-12):
        raise PreconditionViolated(
            f"max weight times ER diameter is {product:.6g}, exceeds rho = {rho:.6g}"
        )
    report = VerificationReport(details={"weight_times_er_diameter": product, "rho": rho})
    if F.size == 0:
        report.loewner_margin = 0.0
        report.checks.update(left=True, right=True)
        return report
    A = variance_matrices(G, F, P=P, S=S)
    left = np.einsum("eij,ekj->ik", A, A)
    right = np.einsum("eji,ejk->ik", A, A)
    LH = G.subgraph(F).undirected_laplacian().toarray()
    bound = rho * (S @ LH @ S)
    ok_l, m_l = loewner_leq(left, bound, tol=0.0)
    ok_r, m_r = loewner_leq(right, bound, tol=0.0)
    report.loewner_margin = min(m_l, m_r)
    report.checks["left"] = m_l >= -tol
    report.checks["right"] = m_r >= -tol
    report.details.update(left_margin=m_l, right_margin=m_r)
    return report


def verify_sparsifier(Gref: DirectedGraph, Gtest: DirectedGraph, eps: float,
                      degree_tol: float = 1e-9, max_n=None) -> VerificationReport:
    """Operator-norm error, degree residual and edge count in one report.

    The Loewner margin is ``eps - error``: the smallest eigenvalue of
    ``eps I`` minus the symmetric dilation of the normalized difference.
    """
    err = sparsifier_error(Gref, Gtest, max_n=max_n)
    resid = float(np.abs(degree_imbalance(Gtest) - degree_imbalance(Gref)).max()) if Gref.n else 0.0
    scale = max(Gref.total_weight, 1e-300)
    report = VerificationReport(
        opnorm_error=err,
        degree_residual_linf=resid,
        nnz=Gtest.m,
        loewner_margin=eps - err,
    )
    report.checks["opnorm"] = err <= eps
    report.checks["degree"] = resid <= degree_tol * scale
    report.details.update(eps=eps, m_ref=Gref.m, n=Gref.n)
    return report
