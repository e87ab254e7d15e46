"""Dense reference computations used as the oracle by every other test."""

import numpy as np
import pytest

from eulersparse.dense_oracle import (circulation_projection, exact_er, loewner_leq, pinv,
                                      pinv_half, sparsifier_error, verify_sparsifier,
                                      verify_variance_bound)
from eulersparse.errors import InfeasibleParameters, PreconditionViolated
from eulersparse.graph_core import build_graph, random_eulerian, spanning_tree
from eulersparse.projection_rounding import rounding, rounding_error_bound

from conftest import complete_bidirected, cycle, path, random_connected

K3 = build_graph(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])


class TestPseudoinverse:
    def test_rejects_directed_laplacian(self):
        with pytest.raises(InfeasibleParameters):
            pinv(cycle(4).directed_laplacian().toarray())

    def test_single_edge_projection(self):
        # [TRIVIAL] L^{+/2} L^{+/2} L is the projection off the ones vector
        L = path(1).undirected_laplacian().toarray()
        S = pinv_half(L)
        np.testing.assert_allclose(S @ S @ L, np.eye(2) - 0.5, atol=1e-12)

    def test_k3_entries(self):
        # [DERIVED] L^2 = 3L for K3, so L^+ = L / 9
        Lp = pinv(K3.undirected_laplacian().toarray())
        np.testing.assert_allclose(np.diag(Lp), 2 / 9, atol=1e-12)
        np.testing.assert_allclose(Lp[0, 1], -1 / 9, atol=1e-12)

    def test_half_squares_to_pinv(self, rng):
        G = random_connected(20, 60, seed=8, U=7)
        L = G.undirected_laplacian().toarray()
        S = pinv_half(L)
        np.testing.assert_allclose(S @ S, pinv(L), atol=1e-9)


class TestSparsifierError:
    def test_identical_graphs(self):
        G = random_eulerian(16, 60, U=3, seed=2)
        assert sparsifier_error(G, G) == 0.0

    @pytest.mark.parametrize("c", [0.01, 0.1, 0.5])
    def test_uniform_scaling(self, c):
        # [DERIVED] error is c ||L^{+/2} vL L^{+/2}||, at least c/2 since the symmetric part is Pi/2
        G = random_eulerian(16, 60, U=3, seed=2)
        L = G.undirected_laplacian().toarray()
        S = pinv_half(L)
        expect = c * np.linalg.norm(S @ G.directed_laplacian().toarray() @ S, 2)
        got = sparsifier_error(G, G.with_weights(G.weight * (1 + c)))
        np.testing.assert_allclose(got, expect, rtol=1e-10)
        assert got >= c / 2 - 1e-12

    def test_four_cycle_rounding_within_bound(self):
        # [DERIVED] delete one edge, route its imbalance through the tree
        G = cycle(4, w=2.0)
        T = spanning_tree(G)
        off = np.setdiff1d(np.arange(4), T.edges)[0]
        z = np.zeros(4)
        z[off] = G.weight[off]
        y = rounding(G, z, T)
        H = G.with_weights(G.weight - z + y)
        err = sparsifier_error(G, H)
        bound = rounding_error_bound(G, z, y)
        assert err <= bound.residual_bound
        assert err > 0

    def test_oracle_gate(self):
        G = cycle(10)
        with pytest.raises(InfeasibleParameters):
            sparsifier_error(G, G, max_n=5)

    def test_verify_report(self):
        G = random_eulerian(16, 60, U=3, seed=2)
        rep = verify_sparsifier(G, G, 0.1)
        assert rep.passed and rep.opnorm_error == 0.0
        assert rep.to_dict()["pass"] is True


class TestExactER:
    def test_triangle(self):
        np.testing.assert_allclose(exact_er(cycle(3), [(0, 1), (1, 2), (2, 0)]), 2 / 3)

    @pytest.mark.parametrize("k", [1, 4, 9])
    def test_path_series(self, k):
        np.testing.assert_allclose(exact_er(path(k), [(0, k)]), k)

    @pytest.mark.parametrize("n", [4, 7, 12])
    def test_complete(self, n):
        G = complete_bidirected(n, w=0.5)  # two half-weight arcs per pair
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        np.testing.assert_allclose(exact_er(G, pairs), 2 / n, rtol=1e-10)


class TestLoewner:
    def test_zero_below_laplacian(self):
        L = K3.undirected_laplacian().toarray()
        ok, margin = loewner_leq(np.zeros((3, 3)), L)
        assert ok and margin >= -1e-12

    def test_twice_not_below(self):
        L = K3.undirected_laplacian().toarray()
        ok, margin = loewner_leq(2 * L, L)
        assert not ok
        np.testing.assert_allclose(margin, -np.linalg.norm(L, 2))


class TestVarianceBound:
    def test_single_edge_cluster_is_empty(self):
        # one edge carries no circulation, so P_H = 0 and both sums vanish
        G = cycle(3)
        P = circulation_projection(G, [0])
        np.testing.assert_allclose(P, 0, atol=1e-12)
        rep = verify_variance_bound(G, [0], rho=1.0)
        assert rep.passed
        assert abs(rep.loewner_margin) < 1e-12

    def test_whole_cycle(self):
        G = cycle(3)
        rep = verify_variance_bound(G, [0, 1, 2], rho=2 / 3)
        assert rep.passed and rep.loewner_margin >= -1e-12

    def test_rho_too_small(self):
        with pytest.raises(PreconditionViolated):
            verify_variance_bound(cycle(3), [0, 1, 2], rho=0.1)

    @pytest.mark.parametrize("s", range(20))
    def test_random_clusters(self, s):
        # [DERIVED] dense eigendecomposition sweep, n <= 24
        rng = np.random.default_rng(s)
        n = int(rng.integers(6, 25))
        G = random_eulerian(n, int(rng.integers(2 * n, 4 * n)), U=2, seed=s)
        F = np.flatnonzero(rng.random(G.m) < 0.5)
        if F.size == 0:
            F = np.array([0])
        Lp = pinv(G.undirected_laplacian().toarray())
        verts = np.unique(np.concatenate([G.head[F], G.tail[F]]))
        d = np.diag(Lp)[verts]
        diam = float((d[:, None] + d[None, :] - 2 * Lp[np.ix_(verts, verts)]).max())
        rep = verify_variance_bound(G, F, rho=float(G.weight[F].max()) * diam)
        assert rep.passed, rep.details
