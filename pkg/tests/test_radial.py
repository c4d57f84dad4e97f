import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from specmult.errors import ParameterError
from specmult.radial import (
    LorentzParams,
    RadialField,
    build_grid,
    fractional_integral,
    fractional_kernel,
    holder_lorentz,
    lorentz_norm,
    lp_norm,
    radial_derivative,
    radial_gradient_norm,
)

BALL = 4.0 / 3.0 * math.pi


class TestGrid:
    def test_uniform_nodes_are_midpoints(self):
        g = build_grid(10.0, 100)
        assert np.allclose(g.nodes, (np.arange(1, 101) - 0.5) * 0.1)
        assert abs(g.weights.sum() / (BALL * 1000) - 1) < 0.01

    def test_volume_error_shrinks_under_refinement(self):
        e1 = abs(build_grid(10.0, 100).weights.sum() - BALL * 1000)
        e2 = abs(build_grid(10.0, 200).weights.sum() - BALL * 1000)
        assert e2 <= e1 / 2

    def test_graded_clusters_near_origin(self):
        g = build_grid(10.0, 100, "graded")
        assert np.min(np.diff(g.edges)) < 0.1
        assert np.all(np.diff(g.nodes) > 0) and np.all(g.nodes > 0) and np.all(g.weights > 0)

    @pytest.mark.parametrize("r_max, n", [(0.0, 100), (-1.0, 100), (10.0, 8)])
    def test_rejects_bad_parameters(self, r_max, n):
        with pytest.raises(ParameterError):
            build_grid(r_max, n)


class TestLebesgue:
    def test_zero(self):
        g = build_grid(10.0, 100)
        assert lp_norm(RadialField(g, np.zeros(g.n)), 2) == 0.0

    def test_indicator_volume(self):
        g = build_grid(10.0, 1000)
        f = RadialField(g, (g.nodes <= 1.0).astype(float))
        # midpoint weights 4 pi r^2 h sum to 4 pi (R^3/3 - R h^2/12) over [0, R]
        h = 0.01
        assert lp_norm(f, 1) == pytest.approx(4 * math.pi * (1 / 3 - h * h / 12), rel=1e-12)
        assert lp_norm(f, 1) == pytest.approx(BALL, rel=1e-4)

    def test_gaussian_l2(self):
        g = build_grid(12.0, 600)
        f = RadialField(g, np.exp(-0.5 * g.nodes**2))
        assert lp_norm(f, 2) == pytest.approx(math.pi**0.75, rel=1e-6)

    def test_sup_norm_and_bad_exponent(self):
        g = build_grid(5.0, 50)
        f = RadialField(g, np.linspace(-3, 1, g.n))
        assert lp_norm(f, np.inf) == 3.0
        with pytest.raises(ParameterError):
            lp_norm(f, 0.5)

    def test_refinement_matches_midpoint_order(self):
        f = lambda r: np.exp(-0.5 * r**2) * (1 + r)  # not even in r: second order
        exact = quad(lambda r: 4 * math.pi * r**2 * f(r) ** 2, 0, np.inf)[0] ** 0.5
        errs = [abs(lp_norm(RadialField(g, f(g.nodes)), 2) - exact) for g in (build_grid(10, 100), build_grid(10, 200))]
        assert errs[1] <= errs[0] / 3


class TestLorentz:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.floats(1.0, 8.0))
    def test_pp_equals_lp(self, seed, p):
        rng = np.random.default_rng(seed)
        w = rng.uniform(0.1, 2.0, 64)
        f = rng.standard_normal(64)
        assert lorentz_norm(f, (p, p), w) == pytest.approx(lp_norm(f, p, w), rel=1e-10)

    def test_substep_identity(self):
        g = build_grid(4.0, 400)
        H = 2.0
        f = RadialField(g, np.where(g.nodes <= 1.0, H, 0.0))
        W = g.weights[g.nodes <= 1.0].sum()
        for p in (1.2, 1.5, 2.0, 4.0):
            assert lorentz_norm(f, (p, 1.0)) == pytest.approx(p * H * W ** (1 / p), rel=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.floats(1.0, 6.0))
    def test_nested_in_second_index(self, seed, p):
        # ||f||_{p,q2} <= (q1/p)^{1/q1 - 1/q2} ||f||_{p,q1} for q1 <= q2
        rng = np.random.default_rng(seed)
        w = rng.uniform(0.1, 2.0, 40)
        f = rng.standard_normal(40) * np.exp(rng.uniform(-2, 2, 40))
        qs = (1.0, 2.0, 4.0, np.inf)
        norms = {q: lorentz_norm(f, (p, q), w) for q in qs}
        for i, q1 in enumerate(qs):
            for q2 in qs[i + 1:]:
                const = (q1 / p) ** (1 / q1 - (0.0 if np.isinf(q2) else 1 / q2))
                assert norms[q2] <= const * norms[q1] * (1 + 1e-12)

    def test_weak_norm_of_inverse_square(self):
        # cut at r >= 1: mu(|f| >= lam) = (4/3) pi (lam^{-3/2} - 1), so the weak norm tends to ((4/3) pi)^{2/3}
        vals = []
        for r_max, n in ((20.0, 2000), (40.0, 4000)):
            g = build_grid(r_max, n)
            f = RadialField(g, np.where(g.nodes >= 1, g.nodes**-2.0, 0.0))
            vals.append((lorentz_norm(f, (1.5, np.inf)), lp_norm(f, 1.5)))
        assert vals[1][0] == pytest.approx(vals[0][0], rel=0.02)
        assert vals[0][0] == pytest.approx(BALL ** (2 / 3), rel=0.02)
        assert vals[1][1] > vals[0][1] * 1.05  # the strong norm grows like log r_max

    def test_weak_norm_of_singular_profile_is_stable(self):
        # uncut, the sup sits on the first cell and scales out under refinement at fixed spacing ratio
        vals = []
        for r_max, n in ((10.0, 1000), (20.0, 4000)):
            g = build_grid(r_max, n)
            vals.append(lorentz_norm(RadialField(g, g.nodes**-2.0), (1.5, np.inf)))
        assert vals[1] == pytest.approx(vals[0], rel=0.10)

    def test_params_validation(self):
        with pytest.raises(ParameterError):
            LorentzParams(0.5, 1.0)
        with pytest.raises(ParameterError):
            LorentzParams(2.0, 0.5)


class TestHolder:
    def test_indicator_idempotent(self):
        g = build_grid(4.0, 400)
        f = RadialField(g, (g.nodes <= 1.0).astype(float))
        assert holder_lorentz(f, f, (2, 2, 2, 2)) == pytest.approx(1.0, rel=1e-12)

    def test_gaussian_times_inverse(self):
        g = build_grid(6.0, 600)
        f = RadialField(g, np.exp(-0.5 * g.nodes**2))
        h = RadialField(g, np.where(g.nodes <= 1, 1 / g.nodes, 0.0))
        assert holder_lorentz(f, h, (2, 2, 2, 2)) <= 1 + 1e-12

    def test_zero(self):
        g = build_grid(4.0, 100)
        f = RadialField(g, np.zeros(g.n))
        h = RadialField(g, np.ones(g.n))
        assert holder_lorentz(f, h, (2, 2, 2, 2)) == 0.0

    def test_exponent_mismatch(self):
        g = build_grid(4.0, 100)
        f = RadialField(g, np.ones(g.n))
        with pytest.raises(ParameterError):
            holder_lorentz(f, f, (1.2, 1.0, 1.5, 1.0))

    def test_rearrangement_bound(self, rng):
        # (fg)*(t) <= f*(t/2) g*(t/2) gives ratio <= 2^{1/p}
        for _ in range(50):
            w = rng.uniform(0.1, 2.0, 80)
            f, g = rng.standard_normal((2, 80))
            p1, p2 = rng.uniform(2.0, 6.0, 2)
            p = 1 / (1 / p1 + 1 / p2)
            assert holder_lorentz(f, g, (p1, p1, p2, p2), w) <= 2 ** (1 / p) + 1e-12


class TestFractional:
    @pytest.mark.parametrize("s", [0.5, 1.0, 1.5, 2.0, 2.5])
    def test_kernel_matches_cosine_quadrature(self, s):
        g = build_grid(5.0, 50)
        K = fractional_kernel(g, s)
        for i, j in ((3, 10), (20, 7), (40, 45)):
            r, rp = g.nodes[i], g.nodes[j]
            avg = 0.5 * quad(lambda c: (r * r + rp * rp - 2 * r * rp * c) ** (-(3 - s) / 2), -1, 1, limit=200)[0]
            assert K[i, j] == pytest.approx(avg, rel=1e-9)

    def test_coulomb_case_is_newton(self):
        g = build_grid(5.0, 200)
        K = fractional_kernel(g, 2.0)
        R, Rp = np.meshgrid(g.nodes, g.nodes, indexing="ij")
        off = ~np.eye(g.n, dtype=bool)
        assert np.allclose(K[off], 1 / np.maximum(R, Rp)[off], rtol=1e-12)

    def test_bump_reproduces_coulomb_potential(self):
        g = build_grid(6.0, 600)
        r0, width = 2.0, 0.05
        bump = np.exp(-0.5 * ((g.nodes - r0) / width) ** 2)
        bump /= np.sum(bump * g.weights)
        out = fractional_integral(RadialField(g, bump), 2.0).values
        far = np.abs(g.nodes - r0) > 0.5
        assert np.allclose(out[far], 1 / np.maximum(g.nodes, r0)[far], rtol=1e-3)

    def test_linear_and_zero(self, rng):
        g = build_grid(5.0, 100)
        f, h = (RadialField(g, v) for v in rng.standard_normal((2, g.n)))
        a, b = 0.7, -1.3
        lhs = fractional_integral(f.with_values(a * f.values + b * h.values), 1.5).values
        rhs = a * fractional_integral(f, 1.5).values + b * fractional_integral(h, 1.5).values
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))
        assert np.all(fractional_integral(f.with_values(np.zeros(g.n)), 1.5).values == 0)

    def test_order_range(self):
        g = build_grid(5.0, 50)
        with pytest.raises(ParameterError):
            fractional_kernel(g, 3.0)

    def test_weak_type_endpoint(self, rng):
        # ||I_s f||_{L^{q,inf}} / ||f||_1 with q = 3/(3-s) stays bounded over random data
        g = build_grid(10.0, 200)
        s = 1.5
        ratios = []
        for _ in range(20):
            c, wd = rng.uniform(0, 6), rng.uniform(0.2, 2)
            f = RadialField(g, np.exp(-0.5 * ((g.nodes - c) / wd) ** 2))
            ratios.append(lorentz_norm(fractional_integral(f, s), (3 / (3 - s), np.inf)) / lp_norm(f, 1))
        assert max(ratios) < 10 * min(ratios)


class TestGradient:
    def test_constant_has_zero_gradient(self):
        g = build_grid(5.0, 100)
        assert radial_gradient_norm(RadialField(g, np.ones(g.n)), 2) == pytest.approx(0.0, abs=1e-12)

    def test_linear_profile(self):
        g = build_grid(2.0, 200)
        d = radial_derivative(g.nodes.copy(), g)
        assert np.allclose(d[g.nodes < 1], 1.0)

    @pytest.mark.parametrize("p", [1.2, 2.0, 30 / 13])
    def test_gaussian_gradient(self, p):
        g = build_grid(12.0, 1200)
        f = RadialField(g, np.exp(-0.5 * g.nodes**2))
        exact = quad(lambda r: 4 * math.pi * r**2 * (r * math.exp(-0.5 * r * r)) ** p, 0, np.inf)[0] ** (1 / p)
        assert radial_gradient_norm(f, p) == pytest.approx(exact, rel=1e-4)
