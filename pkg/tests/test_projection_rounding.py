import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from eulersparse.graph_core import degree_imbalance, random_eulerian, spanning_tree
from eulersparse.projection_rounding import (pmro_conditions, proj_minus_rank_one,
                                             project_exact, projection_context, rounding,
                                             rounding_error_bound)

from conftest import complete_bidirected, cycle, random_connected


class TestProjectExact:
    def setup_method(self):
        self.G = complete_bidirected(5)
        rng = np.random.default_rng(1)
        self.v = rng.uniform(0.5, 2.0, size=self.G.m)
        self.ctx = projection_context(self.G, np.arange(self.G.m), v=self.v)

    def test_constraint_maps_to_zero(self):
        np.testing.assert_allclose(project_exact(self.ctx, self.v), 0, atol=1e-12)

    def test_fixes_its_image(self):
        z = project_exact(self.ctx, np.random.default_rng(2).standard_normal(self.G.m))
        np.testing.assert_allclose(project_exact(self.ctx, z), z, atol=1e-12)

    def test_directed_four_cycle(self):
        # [DERIVED] dense projection: circulation and orthogonal to v
        G = cycle(4, w=1.0).with_weights(np.array([1.0, 2.0, 3.0, 4.0]))
        ctx = projection_context(G, np.arange(4), v=np.array([1.0, -1.0, 2.0, 0.5]))
        x = project_exact(ctx, np.random.default_rng(3).standard_normal(4))
        assert np.abs(degree_imbalance(G, G.weight * x)).max() <= 1e-10
        assert abs(x @ ctx.v) <= 1e-10


class TestProjMinusRankOne:
    def test_zero(self):
        G = complete_bidirected(4)
        ctx = projection_context(G, np.arange(G.m))
        np.testing.assert_array_equal(proj_minus_rank_one(ctx, np.zeros(G.m)), np.zeros(G.m))

    def test_triangle_matches_exact(self):
        # on a single cycle with v = w the rank-one removal leaves nothing
        G = cycle(3)
        ctx = projection_context(G, np.arange(3))
        z = np.array([1.0, -1.0, 0.0])
        xi = 1e-6
        x = proj_minus_rank_one(ctx, z, xi=xi)
        np.testing.assert_allclose(x, project_exact(ctx, z, fallback=True), atol=xi)

    @pytest.mark.parametrize("s", range(50))
    def test_conditions(self, s):
        # [DERIVED] all four accuracy conditions measured directly
        rng = np.random.default_rng(s)
        n = int(rng.integers(4, 65))
        G = random_eulerian(n, min(int(rng.integers(2 * n, 5 * n)), n * (n - 1)), U=6, seed=s)
        F = np.flatnonzero(rng.random(G.m) < 0.7)
        z = np.zeros(G.m)
        z[F] = rng.uniform(-1, 1, size=F.size)
        ctx = projection_context(G, F)
        xi = 1e-6
        cond = pmro_conditions(ctx, z, proj_minus_rank_one(ctx, z, xi=xi))
        assert max(cond.values()) <= xi, cond


class TestRounding:
    def test_zero(self):
        G = cycle(5)
        np.testing.assert_array_equal(rounding(G, np.zeros(5), spanning_tree(G)), np.zeros(5))

    def test_triangle_tree_flow(self):
        G = cycle(3)
        T = spanning_tree(G)
        y = rounding(G, np.array([0.0, 0.0, 1.0]), T)
        np.testing.assert_array_equal(y, [-1.0, -1.0, 0.0])
        np.testing.assert_array_equal(degree_imbalance(G, y), degree_imbalance(G, [0, 0, 1.0]))

    @seed(42)
    @settings(max_examples=30, deadline=None)
    @given(st.integers(5, 80), st.integers(0, 2 ** 32 - 1))
    def test_random(self, n, s):
        rng = np.random.default_rng(s)
        G = random_connected(n, min(3 * n, n * (n - 1) // 2), seed=s, U=5)
        z = rng.standard_normal(G.m) * 10.0 ** rng.uniform(-3, 3, size=G.m)
        y = rounding(G, z, spanning_tree(G))
        d = degree_imbalance(G, z)
        assert np.abs(degree_imbalance(G, y) - d).max() <= 1e-12 * np.abs(z).sum()
        assert np.abs(y).max() <= 0.5 * np.abs(d).sum() * (1 + 1e-12)


class TestRoundingBound:
    def test_tree_flow_has_zero_residual(self):
        G = cycle(6)
        T = spanning_tree(G)
        z = np.zeros(6)
        z[T.edges] = np.arange(1.0, 6.0)
        y = rounding(G, z, T)
        np.testing.assert_allclose(y, z, atol=1e-12)
        assert float(rounding_error_bound(G, z, y)) <= 1e-12

    def test_triangle(self):
        G = cycle(3)
        z = np.array([0.0, 0.0, 1.0])
        b = rounding_error_bound(G, z, rounding(G, z, spanning_tree(G)))
        assert b.residual_norm <= 3 * np.abs(z).sum()

    @pytest.mark.parametrize("s", range(20))
    def test_random_instances(self, s):
        rng = np.random.default_rng(s)
        n = int(rng.integers(12, 40))
        G = random_eulerian(n, 3 * n, U=8, seed=s)
        z = rng.uniform(-1, 1, size=G.m)
        b = rounding_error_bound(G, z, rounding(G, z, spanning_tree(G)))
        assert b.holds
        assert b.residual_norm / b.residual_bound < 1.0
