"""Graphical spectral sketches on lifted, Eulerian and undirected inputs."""

import math

import numpy as np
import pytest

from eulersparse.decomposition import expander_decomp
from eulersparse.errors import NotBipartiteLift, NotEulerian
from eulersparse.graph_core import (absolute_degrees, bipartite_lift, build_graph,
                                    degree_imbalance, random_eulerian, random_undirected,
                                    spanning_tree)
from eulersparse.sketch import (SketchConfig, bilinear_errors, expander_spectral_sketch,
                                inverse_quadratic_errors, pair_family, practical_beta,
                                quadratic_errors, run_spectral_sketch, sketch_bound,
                                spectral_sketch, undirected_sketch)

from conftest import complete_bidirected, cycle, random_connected


def test_practical_beta():
    assert practical_beta(64, 0.5) == 8 * math.ceil(math.log(64) ** 2)
    assert practical_beta(2, 0.99) == 8


def test_pair_family_is_replayable():
    A1, Z1 = pair_family(10, 5, seed=3)
    A2, Z2 = pair_family(10, 5, seed=3)
    np.testing.assert_array_equal(A1, A2)
    np.testing.assert_array_equal(Z1, Z2)


def test_bilinear_error_of_scaling():
    G = random_eulerian(12, 40, U=2, seed=0)
    A, Z = pair_family(12, 20, seed=1)
    e = bilinear_errors(G, G.with_weights(2 * G.weight), A, Z)
    assert np.all(e <= 1.0 + 1e-12)  # |a^T vL z| <= ||a||_L ||z||_L for Eulerian G


@pytest.fixture(scope="module")
def lifted():
    L = bipartite_lift(complete_bidirected(32)).graph
    T = spanning_tree(L)
    D = expander_decomp(L, edges=np.setdiff1d(np.arange(L.m), T.edges),
                        require_connected=False, seed=0)
    return L, T, D


class TestExpanderSketch:
    def test_low_degree_piece_untouched(self, lifted):
        L, T, D = lifted
        H = expander_spectral_sketch(D, L, T, 0.1, 0.5, 1.0, beta=64)
        np.testing.assert_array_equal(H.weight, L.weight)

    def test_degree_identities(self, lifted):
        L, T, D = lifted
        H = expander_spectral_sketch(D, L, T, 0.1, 0.5, 1.0, beta=16)
        assert H.m < L.m
        assert np.abs(degree_imbalance(H) - degree_imbalance(L)).max() <= 1e-9
        assert np.abs(absolute_degrees(H) - absolute_degrees(L)).max() <= 1e-9

    def test_per_pair_error(self, lifted):
        # [DERIVED] dense bilinear forms against the instantiated bound
        L, T, D = lifted
        beta = 16
        H = expander_spectral_sketch(D, L, T, 0.1, 0.5, 1.0, beta=beta)
        A, Z = pair_family(L.n, 200, seed=17)
        bound = sketch_bound(beta, D.quality, L.n, 1.0, 0.1, 0.5)
        assert np.mean(bilinear_errors(L, H, A, Z) <= bound) >= 0.9

    def test_requires_lift(self):
        G = complete_bidirected(6)
        D = expander_decomp(G, seed=0)
        with pytest.raises(NotBipartiteLift):
            expander_spectral_sketch(D, G, spanning_tree(G), 0.1, 0.5, 1.0, beta=2)


class TestSpectralSketch:
    def test_cycle_is_identity(self):
        G = cycle(20)
        H = spectral_sketch(G, 0.5, 0.1)
        np.testing.assert_array_equal(H.weight, G.weight)

    def test_rejects_non_eulerian(self):
        with pytest.raises(NotEulerian):
            spectral_sketch(build_graph(3, [(0, 1, 1), (1, 2, 1)]))

    def test_small_beta_sketch(self):
        # [DERIVED] dense bilinear sweep on a lowered degree threshold
        G = random_eulerian(48, 1600, U=1, seed=2)
        res = run_spectral_sketch(G, config=SketchConfig(eps=0.5, delta=0.1, beta=12, seed=0))
        H = res.graph
        assert H.m < G.m
        assert np.abs(degree_imbalance(H) - degree_imbalance(G)).max() <= 1e-9
        A, Z = pair_family(G.n, 200, seed=[7919, 2])
        assert np.mean(bilinear_errors(G, H, A, Z) <= 0.5) >= 0.9


class TestUndirectedSketch:
    def test_tree_is_identity(self):
        G = random_connected(30, 29, seed=1, U=3)
        H = undirected_sketch(G, 0.5, 0.1)
        np.testing.assert_allclose(H.undirected_laplacian().toarray(),
                                   G.undirected_laplacian().toarray())

    def test_quadratic_forms(self):
        # [DERIVED] dense quadratic forms and pseudoinverses
        G = random_undirected(64, 2016, U=1, seed=0)
        H = undirected_sketch(G, config=SketchConfig(eps=0.5, delta=0.1, beta=8, seed=0))
        assert H.m < G.m
        X = np.random.default_rng(4).standard_normal((500, 64))
        assert np.mean(quadratic_errors(G, H, X) <= 0.5) >= 0.9
        assert inverse_quadratic_errors(G, H, X[:50]).max() <= 7 * 0.5
