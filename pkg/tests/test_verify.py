import json
import math

import numpy as np
import pytest

from specmult.errors import ParameterError
from specmult.kato import potential_from_spec, zero_potential
from specmult.multiplier import constant_symbol, heat, imaginary_power
from specmult.radial import build_grid
from specmult.verify import (
    POTENTIAL_BANK,
    check_dispersive,
    check_dyadic_pieces,
    check_lorentz,
    check_multiplier_oracle,
    check_norm_equivalence,
    check_resolvent_bounds,
    check_strichartz,
    field_bank,
    make_record,
)

KEYS = {"check", "params", "constant", "margin", "pass", "grid", "seed"}


class TestBank:
    def test_normalized_and_sized(self, medium_grid):
        bank = field_bank(medium_grid)
        assert len(bank) == 50
        norms = np.sum(np.abs(bank.values) ** 2 * medium_grid.weights, axis=1)
        assert np.allclose(norms, 1.0, rtol=1e-12)

    def test_deterministic(self, medium_grid):
        a, b = field_bank(medium_grid), field_bank(medium_grid)
        assert a.digest == b.digest and np.array_equal(a.values, b.values)
        assert field_bank(medium_grid, seed=7).digest != a.digest

    def test_prefix_property(self, medium_grid):
        small, big = field_bank(medium_grid, size=50), field_bank(medium_grid, size=100)
        assert np.array_equal(big.values[:50], small.values)

    def test_same_functions_on_refined_grid(self):
        coarse, fine = build_grid(10.0, 100), build_grid(10.0, 200)
        a, b = field_bank(coarse), field_bank(fine)
        assert a.digest == b.digest
        # the same recipe sampled on both grids agrees after interpolation
        assert np.allclose(np.abs(a.values[0]), np.abs(np.interp(coarse.nodes, fine.nodes, b.values[0].real)), atol=1e-2)


class TestRecords:
    def test_shape_and_json(self):
        rec = make_record("x", {"a": 1}, np.float64(2.0), float("inf"), np.bool_(True), None, 3, z=1 + 2j, arr=np.arange(3))
        assert KEYS <= rec.keys()
        assert rec["margin"] == "inf" and rec["z"] == [1.0, 2.0] and rec["arr"] == [0, 1, 2]
        json.dumps(rec, allow_nan=False)

    def test_deterministic_check(self, small_grid):
        V = potential_from_spec("well:depth=3,radius=1", small_grid)
        a = check_resolvent_bounds(V, n_lambda=16)
        b = check_resolvent_bounds(V, n_lambda=16)
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
        assert KEYS <= a.keys() and a["check"] == "resolvent_bounds"


class TestResolventBounds:
    @pytest.mark.parametrize("spec", POTENTIAL_BANK)
    def test_bank_passes(self, small_grid, spec):
        rec = check_resolvent_bounds(potential_from_spec(spec, small_grid), n_lambda=32)
        assert rec["pass"], rec
        assert rec["constant"] <= 1.02


class TestErrors:
    def test_strichartz_inadmissible(self, small_grid):
        with pytest.raises(ParameterError, match="admissible"):
            check_strichartz(zero_potential(small_grid), 4.0, 4.0)

    def test_norm_equivalence_ranges(self, small_grid):
        V = zero_potential(small_grid)
        with pytest.raises(ParameterError):
            check_norm_equivalence(V, 2.5, 1.2)
        with pytest.raises(ParameterError):
            check_norm_equivalence(V, 1.0, 3.0)

    def test_dyadic_pieces_exponent(self, small_grid):
        with pytest.raises(ParameterError):
            check_dyadic_pieces(constant_symbol(), zero_potential(small_grid), p=3.0)

    def test_dispersive_empty_window_is_recorded(self):
        g = build_grid(2.0, 40)
        rec = check_dispersive(zero_potential(g), pad=1)
        assert rec["pass"] is False and "safe window" in rec["error"]


class TestChecks:
    def test_dyadic_pieces_zero_potential(self, small_grid):
        rec = check_dyadic_pieces(heat(0.5), zero_potential(small_grid), bank_size=10)
        assert rec["pass"] and rec["constant"] == 0.0

    def test_dyadic_pieces_record(self):
        g = build_grid(6.0, 80)
        rec = check_dyadic_pieces(constant_symbol(), potential_from_spec("well:depth=0.5,radius=1", g), bank_size=10, refine=False)
        assert rec["pass"] and math.isfinite(rec["constant"])
        assert {"high", "low", "medium", "total", "free", "plan"} <= rec["coarse"].keys()

    def test_strichartz_energy(self, small_grid):
        rec = check_strichartz(potential_from_spec("well:depth=3,radius=1", small_grid), math.inf, 2.0, bank_size=10, n_times=17)
        assert rec["pass"] and rec["constant"] <= 1 + 1e-12

    def test_norm_equivalence_free_is_identity(self, small_grid):
        rec = check_norm_equivalence(zero_potential(small_grid), 1.0, 2.0, bank_size=10)
        assert rec["pass"] and abs(rec["constant"] - 1) <= 1e-8

    def test_multiplier_oracle_small(self, small_grid):
        rec = check_multiplier_oracle(heat(0.5), potential_from_spec("well:depth=3,radius=1", small_grid), bank_size=10)
        assert rec["pass"] and rec["constant"] <= 1e-2

    def test_lorentz_small(self):
        rec = check_lorentz(n_pairs=20)
        assert rec["pass"] and rec["lp_identity_error"] <= 1e-10


class TestSpecExamples:
    def test_deep_well_needs_larger_N1(self):
        # the support must be resolved well past the Born threshold of the deep well
        g = build_grid(5.0, 800)
        shallow = check_resolvent_bounds(potential_from_spec("well:depth=3,radius=1", g), n_lambda=16)
        deep = check_resolvent_bounds(potential_from_spec("well:depth=50,radius=1", g), n_lambda=16)
        assert deep["pass_iii"] and deep["N1"] > shallow["N1"]

    def test_strichartz_free_and_shallow_comparable(self, small_grid):
        pair = (10.0, 30 / 13)
        a = check_strichartz(zero_potential(small_grid), *pair, bank_size=10, n_times=33)
        b = check_strichartz(potential_from_spec("well:depth=0.5,radius=1", small_grid), *pair, bank_size=10, n_times=33)
        assert a["pass"] and b["pass"]
        assert 1 / 3 <= a["constant"] / b["constant"] <= 3

    def test_norm_equivalence_order_zero_is_projection(self, small_grid):
        rec = check_norm_equivalence(potential_from_spec("well:depth=3,radius=1", small_grid), 0.0, 2.0, bank_size=10, refine=False)
        assert rec["pass"] and rec["constant"] <= 1 + 1e-10

    def test_constants_grow_with_the_bank(self, small_grid):
        V = potential_from_spec("well:depth=3,radius=1", small_grid)
        a = check_multiplier_oracle(heat(0.5), V, bank_size=50)
        b = check_multiplier_oracle(heat(0.5), V, bank_size=100)
        assert b["constant"] >= a["constant"] and a["bank_digest"] != b["bank_digest"]


@pytest.mark.slow
class TestDyadicPiecesStability:
    def test_constant_symbol_shallow_well(self, small_grid):
        rec = check_dyadic_pieces(constant_symbol(), potential_from_spec("well:depth=0.5,radius=1", small_grid))
        assert rec["pass"] and rec["margin"] > 0

    def test_imaginary_power_trend(self, small_grid):
        V = potential_from_spec("well:depth=3,radius=1", small_grid)
        c = {a: check_dyadic_pieces(imaginary_power(a), V, refine=False, bank_size=20)["constant"] for a in (1.0, 4.0)}
        # normalized by h_norm(6), the constants may not outgrow the <alpha>^6 weight
        assert 0 < c[4.0] / c[1.0] <= (17 / 2) ** 3
