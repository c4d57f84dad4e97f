import math

import numpy as np
import pytest
from scipy.integrate import quad

from specmult.errors import DivergenceError, ParameterError
from specmult.kato import Potential, kato_split, potential_from_spec, zero_potential
from specmult.oracle import radial_laplacian
from specmult.radial import build_grid
from specmult.resolvent import (
    DYADIC_LADDER,
    EnergyPoint,
    KernelOperator,
    dense_inverse,
    difference_op,
    dominating_kernel,
    energy_samples,
    find_delta,
    find_N1,
    fourth_power_norm,
    free_resolvent,
    inversion_residual,
    invert_anchored,
    invert_plain,
    l1_opnorm,
    resolvent_matrix,
    resonance_indicator,
    s_tilde_sup,
    thresholds,
    v_r0,
)


def shell_average(r, rp, k):
    """Angular average of e^{ik|x-y|}/(4 pi |x-y|) over |y| = r', by quadrature in the distance."""
    re = quad(lambda s: math.cos(k * s), abs(r - rp), r + rp)[0]
    im = quad(lambda s: math.sin(k * s), abs(r - rp), r + rp)[0]
    return (re + 1j * im) / (8 * math.pi * r * rp)


class TestFreeResolvent:
    @pytest.mark.parametrize("k", [0.0, 0.3, 2.0, 7.5])
    def test_matches_shell_average(self, k):
        r = np.array([0.2, 1.1, 3.7])
        K = resolvent_matrix(r, r, k)
        for i in range(3):
            for j in range(3):
                assert K[i, j] == pytest.approx(shell_average(r[i], r[j], k), rel=1e-10, abs=1e-14)

    def test_zero_energy_is_newton(self):
        g = build_grid(5.0, 50)
        K = free_resolvent(g, 0.0).matrix
        assert np.allclose(K, 1 / (4 * np.pi * np.maximum.outer(g.nodes, g.nodes)), rtol=1e-14)

    def test_symmetric(self):
        g = build_grid(5.0, 80)
        K = free_resolvent(g, EnergyPoint(3.3)).matrix
        assert np.array_equal(K, K.T)

    @pytest.mark.parametrize("k", [0.0, 1.0, 3.0])
    def test_inverts_helmholtz(self, k):
        g = build_grid(12.0, 1200)
        f = np.exp(-2.0 * (g.nodes - 2.0) ** 2)
        u = free_resolvent(g, k * k).apply(f)
        res = radial_laplacian(u, g) - k * k * u - f
        inner = g.nodes < 8.0
        assert np.max(np.abs(res[inner])) <= 2e-3 * np.max(np.abs(f))

    def test_energy_point(self):
        assert EnergyPoint.from_k(3.0).lam == 9.0
        with pytest.raises(ParameterError):
            EnergyPoint(-1.0)

    def test_sup_domination_by_zero_energy(self, small_grid):
        K0 = free_resolvent(small_grid, 0.0).matrix
        for lam in (0.5, 4.0, 100.0):
            assert np.all(np.abs(free_resolvent(small_grid, lam).matrix) <= K0 * (1 + 1e-12))

    def test_mean_value_bound(self, small_grid):
        k = 1.7
        D = free_resolvent(small_grid, k * k).matrix - free_resolvent(small_grid, 0.0).matrix
        assert np.max(np.abs(D)) <= k / (4 * np.pi) * (1 + 1e-12)


class TestOperatorNorms:
    def test_zero_kernel(self, small_grid):
        assert l1_opnorm(KernelOperator(small_grid, np.zeros((small_grid.n, small_grid.n)))) == 0.0

    def test_unit_ball_at_zero_energy(self):
        g = build_grid(10.0, 1000)
        V = Potential(g, (g.nodes <= 1).astype(float))
        assert l1_opnorm(v_r0(0.0, V)) == pytest.approx(0.5, rel=1e-3)
        assert V.kato_norm / (4 * np.pi) == pytest.approx(0.5, rel=1e-3)

    def test_submultiplicative(self, small_grid, rng):
        n = small_grid.n
        A = KernelOperator(small_grid, rng.standard_normal((n, n)))
        B = KernelOperator(small_grid, rng.standard_normal((n, n)))
        assert l1_opnorm(A.compose(B)) <= l1_opnorm(A) * l1_opnorm(B) * (1 + 1e-12)

    def test_composition_associative(self, small_grid, rng):
        n = small_grid.n
        A, B, C = (KernelOperator(small_grid, rng.standard_normal((n, n))) for _ in range(3))
        lhs = A.compose(B).compose(C).matrix
        rhs = A.compose(B.compose(C)).matrix
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(lhs))

    @pytest.mark.parametrize("spec", ["well:depth=3,radius=1", "gaussian:depth=3,width=1", "exp:depth=1,rate=1"])
    def test_minkowski_bound(self, small_grid, spec):
        V = potential_from_spec(spec, small_grid)
        for lam in energy_samples(small_grid, 16):
            assert l1_opnorm(v_r0(lam, V)) <= V.kato_norm / (4 * np.pi) * 1.02

    def test_zero_potential(self, small_grid):
        assert l1_opnorm(v_r0(2.0, zero_potential(small_grid))) == 0.0


class TestDifference:
    def test_vanishes_at_anchor(self, well3_small):
        assert l1_opnorm(difference_op(2.0, 2.0, well3_small)) == 0.0

    def test_shrinks_towards_anchor(self, well3_small):
        norms = [l1_opnorm(difference_op(2.0 + d, 2.0, well3_small)) for d in (1.0, 0.1, 0.01, 0.001)]
        assert all(b < a for a, b in zip(norms, norms[1:]))

    def test_dominating_kernel(self, small_grid):
        V = potential_from_spec("gaussian:depth=3,width=1", small_grid)
        eps = 0.1 * V.kato_norm
        delta = find_delta(V, eps)
        assert delta > 0
        B = dominating_kernel(V, eps, kato_split(V, eps)).matrix
        assert l1_opnorm(KernelOperator(small_grid, B)) <= eps * (1 + 1e-12)
        rng = np.random.default_rng(7)
        for lam0 in np.r_[0.0, rng.uniform(0, 30, 19)]:
            lam = lam0 + delta * rng.uniform(0, 1)
            D = np.abs(difference_op(lam, lam0, V).matrix)
            assert np.all(D <= B * (1 + 1e-12) + 1e-300)

    def test_zero_potential_returns_ladder_top(self, small_grid):
        assert find_delta(zero_potential(small_grid), 0.1) == 2.0**8

    def test_huge_epsilon_returns_ladder_top(self, well3_small):
        assert find_delta(well3_small, 1e6 * well3_small.kato_norm) == 2.0**8


class TestBornSeries:
    def test_fourth_power_bounds(self, well3_small):
        bound = (well3_small.kato_norm / (4 * np.pi)) ** 4
        vals = [fourth_power_norm(lam, well3_small) for lam in (1.0, 16.0, 256.0, 4096.0)]
        assert all(v <= bound * 1.02 for v in vals)
        assert vals[-1] < vals[0]
        assert fourth_power_norm(4.0, zero_potential(well3_small.grid)) == 0.0

    def test_N1_weak_potential_is_ladder_minimum(self, small_grid):
        V = potential_from_spec("well:depth=0.5,radius=1", small_grid)
        assert (V.kato_norm / (4 * np.pi)) ** 4 < 0.5
        assert find_N1(V) == DYADIC_LADDER[0]
        assert find_N1(zero_potential(small_grid)) == DYADIC_LADDER[0]

    def test_N1_deep_well(self, well3_small):
        N1 = find_N1(well3_small)
        assert N1 > DYADIC_LADDER[0]
        lam = np.geomspace(N1**2, 2.0**16, 16)
        assert max(fourth_power_norm(x, well3_small) for x in lam) <= 0.5

    def test_plain_series_matches_dense(self, well3_small):
        lam = 400.0
        assert fourth_power_norm(lam, well3_small) <= 0.5
        S = invert_plain(lam, well3_small, n_terms=40)
        D = dense_inverse(lam, well3_small)
        assert l1_opnorm(S - D) <= 1e-6 * max(l1_opnorm(D), 1.0)
        assert inversion_residual(lam, well3_small, S) <= S.meta["residual_bound"] * 1.5 + 1e-12

    def test_plain_series_guard(self, small_grid):
        V = potential_from_spec("well:depth=20,radius=1", small_grid)
        with pytest.raises(DivergenceError):
            invert_plain(0.01, V)

    def test_anchored_series(self, well3_small):
        lam0 = 2.0
        S0 = dense_inverse(lam0, well3_small)
        same = invert_anchored(lam0, lam0, well3_small)
        assert np.max(np.abs(same.matrix - S0.matrix)) == 0.0
        lam = lam0 + 1e-3
        S = invert_anchored(lam, lam0, well3_small)
        assert l1_opnorm(S - dense_inverse(lam, well3_small)) <= 1e-6
        # continuity bound ||S - S0|| <= ||S0||^2 ||B|| / (1 - ||S0|| ||B||), identity parts included
        nS0 = 1 + l1_opnorm(S0)
        nB = l1_opnorm(difference_op(lam, lam0, well3_small))
        assert l1_opnorm(S - S0) <= nS0**2 * nB / (1 - nS0 * nB) * (1 + 1e-9)

    def test_plain_and_anchored_agree(self, well3_small):
        lam0, lam = 1600.0, 1600.5
        a = invert_plain(lam, well3_small, n_terms=40)
        b = invert_anchored(lam, lam0, well3_small)
        assert l1_opnorm(a - b) <= 1e-5

    def test_zero_potential_inversions(self, small_grid):
        Z = zero_potential(small_grid)
        assert not np.any(invert_plain(1.0, Z).matrix)
        assert not np.any(invert_anchored(1.0, 0.5, Z).matrix)
        assert s_tilde_sup(Z) == 0.0


class TestThresholds:
    def test_s_tilde_stable_under_sampling(self, well3_small):
        a = s_tilde_sup(well3_small, energy_samples(well3_small.grid, 32))
        b = s_tilde_sup(well3_small, energy_samples(well3_small.grid, 64))
        assert b == pytest.approx(a, rel=0.10)

    def test_s_tilde_grows_near_resonance(self, small_grid):
        vals = [s_tilde_sup(potential_from_spec(f"well:depth={d},radius=1", small_grid), [0.0, 0.01]) for d in (1.0, 2.0, 2.4)]
        assert vals[0] < vals[1] < vals[2]

    def test_report(self, well3_small):
        rep = thresholds(well3_small)
        assert rep.N1 >= rep.N0 > 0 and rep.delta > 0 and rep.S_tilde >= 0
        assert rep.N1 == 4.0

    def test_resonance_indicator(self, small_grid):
        assert resonance_indicator(zero_potential(small_grid)) == 1.0
        vals = {d: resonance_indicator(potential_from_spec(f"well:depth={d},radius=1", small_grid)) for d in (1.5, 2.0, 2.47, 3.0, 3.5)}
        assert min(vals, key=vals.get) == 2.47
        assert vals[3.0] < vals[3.5]
