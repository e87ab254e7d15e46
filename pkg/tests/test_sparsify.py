"""Cluster reweighting, decomposition-driven sparsification and the outer loop."""

import math

import numpy as np
import pytest

from eulersparse.decomposition import er_decomp
from eulersparse.dense_oracle import sparsifier_error
from eulersparse.errors import InfeasibleParameters, NotEulerian, PreconditionViolated
from eulersparse.graph_core import (build_graph, degree_imbalance, is_eulerian, random_eulerian,
                                    spanning_tree)
from eulersparse.sparsify import (SparsifyConfig, basic_fast_sparsify, decomp_sparsify,
                                  fast_sparsify, paper_eta_tau, phase_schedule, run_fast_sparsify)

from conftest import complete_bidirected, cycle


def cluster_in(G, pairs):
    idx = np.array([int(np.flatnonzero((G.head == u) & (G.tail == v))[0]) for u, v in pairs])
    mask = np.ones(G.m)
    mask[idx] = 0.0
    return idx, spanning_tree(G, weights=mask)


class TestConfig:
    def test_profiles(self):
        assert SparsifyConfig.practical().tau == 1024
        p = SparsifyConfig.paper_faithful()
        assert p.eta is None and p.check_preconditions

    def test_alias_and_bad_profile(self):
        assert SparsifyConfig(profile="paper").profile == "paper_faithful"
        with pytest.raises(InfeasibleParameters):
            SparsifyConfig(profile="fast")

    def test_theoretical_step_parameters_are_a_fixed_point(self):
        eta, tau = paper_eta_tau(1000, 0.01)
        assert tau == math.ceil(720 / eta ** 2)
        np.testing.assert_allclose(eta, 1 / (20 * math.sqrt(math.log(60 * 1000 * tau / 0.01))))

    def test_phase_schedule(self):
        ell1, tau1, ell2, tau2 = phase_schedule(64, 1000, 4.0, 0.25)
        np.testing.assert_allclose(ell1, 1 / (2 * math.log(64 * 4 / 0.25) ** 2))
        np.testing.assert_allclose(ell2, 0.25 / (4 * 64 * 1000 * 4))
        assert (tau1, tau2) == (math.ceil(math.log(2 / ell1)), math.ceil(math.log(2 / ell2)))


class TestBasicFastSparsify:
    G = complete_bidirected(16)

    def test_saturated_returns_immediately(self):
        idx, T = cluster_in(self.G, [(i, j) for i in range(8) for j in range(8) if i != j])
        w_star = self.G.weight * 4.0  # every edge already below ell * w_star
        st = {}
        w = basic_fast_sparsify(idx, self.G, w_star, 0.5, 0.01, 0.25, idx, T, stats=st)
        assert st["exit"] == "immediate" and st["trials"] == 0
        np.testing.assert_array_equal(w, self.G.weight)

    @pytest.mark.parametrize("pairs", [[(i, (i + 1) % 8) for i in range(8)],
                                       [(i, j) for i in range(8) for j in range(8) if i != j]],
                             ids=["cycle8", "clique8"])
    def test_degrees_and_band(self, pairs):
        idx, T = cluster_in(self.G, pairs)
        cfg = SparsifyConfig()
        w = basic_fast_sparsify(idx, self.G, self.G.weight, 0.5, 0.01, 0.25, idx, T, cfg)
        assert np.abs(degree_imbalance(self.G, w)).max() <= 1e-9
        assert np.all(w[idx] > 0)
        assert np.all(w[idx] <= 1.2 * cfg.growth_cap * self.G.weight[idx])

    def test_trials_are_geometric(self):
        # [DERIVED] mean trial count against the Geom(1/2) bound
        idx, T = cluster_in(self.G, [(i, j) for i in range(8) for j in range(8) if i != j])
        trials = []
        for s in range(20):
            st = {}
            basic_fast_sparsify(idx, self.G, self.G.weight, 0.5, 0.01, 0.25, idx, T,
                                SparsifyConfig(seed=s), stats=st)
            trials.append(st["trials"])
        assert np.mean(trials) <= 2.5

    def test_F_must_lie_in_cluster(self):
        idx, T = cluster_in(self.G, [(0, 1), (1, 0)])
        with pytest.raises(PreconditionViolated):
            basic_fast_sparsify(idx, self.G, self.G.weight, 0.5, 0.01, 0.25, [idx[0], 200], T)


@pytest.fixture(scope="module")
def instance():
    G = random_eulerian(64, 2000, U=4, seed=1)
    T = spanning_tree(G)
    D = er_decomp(G, seed=0, edges=np.setdiff1d(np.arange(G.m), T.edges))
    return G, T, D


class TestDecompSparsify:
    def test_sparse_pieces_are_skipped(self, instance):
        G, T, D = instance
        st = {}
        H = decomp_sparsify(D, G, T, 0.01, 0.25, 4.0, SparsifyConfig(min_piece_density=1e6),
                            stats=st)
        assert st["processed"] == 0
        np.testing.assert_array_equal(H.weight, G.weight)

    def test_edges_drop(self, instance):
        # [DERIVED] counted deletions against the 1/32 in-piece floor
        G, T, D = instance
        st = {}
        H = decomp_sparsify(D, G, T, 0.01, 0.25, 4.0, SparsifyConfig(), stats=st)
        in_piece = sum(p.edges.size for p in D.pieces)
        assert G.m - H.m >= in_piece / 32
        assert np.abs(degree_imbalance(H)).max() <= 1e-9 * G.total_weight
        # every phase ended on the small-set or potential exit
        assert st["dichotomy_failures"] == 0


class TestFastSparsify:
    def test_cycle_untouched(self):
        G = cycle(30, w=2.0)
        res = run_fast_sparsify(G, 0.25)
        assert res.info["rounds"] == 0
        np.testing.assert_array_equal(res.graph.weight, G.weight)

    def test_complete_64(self):
        # [DERIVED] dense oracle
        G = complete_bidirected(64)
        H = fast_sparsify(G, config=SparsifyConfig(eps=0.3, seed=0))
        assert is_eulerian(H, tol=1e-12)
        assert sparsifier_error(G, H) <= 0.3
        assert H.m < G.m / 2

    def test_seed_replay(self):
        G = random_eulerian(48, 1500, U=3, seed=5)
        a = fast_sparsify(G, config=SparsifyConfig(eps=0.5, seed=4))
        b = fast_sparsify(G, config=SparsifyConfig(eps=0.5, seed=4))
        np.testing.assert_array_equal(a.weight, b.weight)

    def test_rejects_non_eulerian(self):
        with pytest.raises(NotEulerian):
            fast_sparsify(build_graph(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)]))

    def test_rejects_small_weights(self):
        with pytest.raises(PreconditionViolated):
            fast_sparsify(cycle(5, w=0.5))

    @pytest.mark.slow
    def test_random_128_sweep(self):
        # [DERIVED] dense oracle over 20 seeds
        eps = 0.5
        ok = 0
        for s in range(20):
            G = random_eulerian(128, 4096, U=1, seed=s)
            H = fast_sparsify(G, config=SparsifyConfig(eps=eps, seed=s))
            ok += sparsifier_error(G, H) <= eps
        assert ok >= 19
