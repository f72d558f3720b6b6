import math
from fractions import Fraction

import pytest

from dimlab import cantor_pair, energy, estimators
from dimlab.energy import (
    anchor_pairs,
    build_nested_family,
    eval_field,
    expected_energy_check,
    graph_measure,
    kernel_bound_check,
    kernel_centered_bound,
    kernel_constant,
    kernel_integral,
    kernel_q_slope,
    ladder_pairs,
    minimal_level_depth,
    natural_leaf_measure,
    pair_expectation_check,
    sample_field,
)
from dimlab.spaces import DigitVector, NetDepthError


class TestNestedFamily:
    def test_minimal_depths(self):
        # smallest triadic depth with 3**-t <= 2**-(n*n)
        assert [minimal_level_depth(n) for n in (1, 2, 3, 4)] == [1, 3, 6, 11]

    def test_depth_one_two_pieces(self):
        fam = build_nested_family((2,))
        assert len(fam.levels[0]) == 2
        assert all(p.diameter <= Fraction(1, 2) for p in fam.levels[0])

    def test_diameter_condition_all_levels(self, nested_family_depth3):
        fam = nested_family_depth3
        for n, level in enumerate(fam.levels, start=1):
            for piece in level:
                assert piece.diameter <= Fraction(1, 2 ** (n * n))

    def test_disjoint_and_nested(self, nested_family_depth3):
        fam = nested_family_depth3
        for level in fam.levels:
            for i, a in enumerate(level):
                for b in level[i + 1:]:
                    # distinct same-level cylinders never share a prefix
                    k = min(a.prefix.depth, b.prefix.depth)
                    assert a.prefix.digits[:k] != b.prefix.digits[:k]
        for child_level, parent_level in zip(fam.levels[1:], fam.levels):
            for child in child_level:
                parent = next(p for p in parent_level
                              if p.path == child.path[:-1])
                d = parent.prefix.depth
                assert child.prefix.digits[:d] == parent.prefix.digits

    def test_shallow_level_depths_rejected(self):
        with pytest.raises(NetDepthError) as err:
            build_nested_family((2, 2), level_depths=(1, 2))
        assert "depth >= 3" in str(err.value)

    def test_depth_cap(self):
        with pytest.raises(ValueError):
            build_nested_family((2,) * 5)

    def test_branching_capacity_validated(self):
        with pytest.raises(ValueError):
            build_nested_family((2, 5), level_depths=(1, 3))
        fam = build_nested_family((2, 4), level_depths=(1, 3))
        assert len(fam.leaves()) == 8

    def test_locate(self, nested_family_depth3):
        fam = nested_family_depth3
        leaf = fam.leaves()[3]
        x = fam.anchor(leaf)
        assert fam.locate(x) == leaf.path
        outside = DigitVector((0, 1, 1) + (0,) * (fam.point_depth - 3))
        assert len(fam.locate(outside)) < fam.depth


class TestRandomField:
    def test_values_on_level_grid(self, nested_family_depth3):
        fam = nested_family_depth3
        sample = sample_field(fam, seed=1)
        for level in (1, 2, 3):
            for piece in fam.levels[level - 1]:
                (v,) = sample.node_value(level, piece.path)
                assert v in (Fraction(0), Fraction(1, 2 ** level))

    def test_node_values_uniform(self, nested_family_depth3):
        fam = nested_family_depth3
        piece = fam.levels[1][2]
        hits = sum(
            sample_field(fam, seed=("u", t)).node_value(2, piece.path)[0] == 0
            for t in range(4000)
        )
        assert abs(hits / 4000 - 0.5) <= 0.03

    def test_same_seed_same_field(self, nested_family_depth3):
        fam = nested_family_depth3
        a = sample_field(fam, seed="s")
        b = sample_field(fam, seed="s")
        x = fam.anchor(fam.leaves()[2])
        assert eval_field(a, x) == eval_field(b, x)

    def test_same_piece_shares_coarse_levels(self, nested_family_depth3):
        # two points of one leaf differ only in tail contributions
        fam = nested_family_depth3
        sample = sample_field(fam, seed=3)
        leaf = fam.leaves()[0]
        x = fam.anchor(leaf)
        y = fam.piece_point(leaf, (1,))
        tree_x = sum(
            sample.node_value(lv, leaf.path[:lv])[0] for lv in (1, 2, 3))
        tail = lambda p: sum(
            sample.tail_value(p, j)[0]
            for j in range(1, sample.tail_levels + 1))
        assert eval_field(sample, x)[0] - tail(x) == tree_x
        assert eval_field(sample, y)[0] - tail(y) == tree_x

    def test_sibling_leaves_share_levels_below_split(self,
                                                     nested_family_depth3):
        # same level-2 piece, different level-3 children: the level-1
        # and level-2 contributions coincide, everything deeper differs
        fam = nested_family_depth3
        sample = sample_field(fam, seed=12)
        a, b = fam.leaves()[0], fam.leaves()[1]
        assert a.path[:2] == b.path[:2] and a.path != b.path
        shared = sum(sample.node_value(lv, a.path[:lv])[0] for lv in (1, 2))
        for leaf in (a, b):
            x = fam.anchor(leaf)
            rest = (sample.node_value(3, leaf.path)[0]
                    + sum(sample.tail_value(x, j)[0]
                          for j in range(1, sample.tail_levels + 1)))
            assert eval_field(sample, x)[0] == shared + rest

    def test_field_bounded(self, nested_family_depth3):
        fam = nested_family_depth3
        sample = sample_field(fam, seed=8)
        for leaf in fam.leaves():
            (v,) = eval_field(sample, fam.anchor(leaf))
            assert 0 <= v < 1  # sum of 2**-n grids never reaches 1


class TestGraphMeasure:
    def test_mass_conserved_and_atoms_distinct(self, nested_family_depth3):
        fam = nested_family_depth3
        nu = natural_leaf_measure(fam)
        gm = graph_measure(nu, sample_field(fam, seed=2))
        assert sum(gm.weights, Fraction(0)) == 1
        assert gm.weights == nu.weights
        assert len(set(gm.coords)) == len(gm.coords)

    def test_graph_energy_dominates_base(self, nested_family_depth3):
        # graph distances dominate base distances, so the energy drops
        fam = nested_family_depth3
        nu = natural_leaf_measure(fam)
        gm = graph_measure(nu, sample_field(fam, seed=2))
        for s in (0.6, 1.5):
            assert (estimators.discrete_energy(gm, s)
                    <= estimators.discrete_energy(nu, s) + 1e-12)


class TestKernelBound:
    def test_spot_value_closed_form(self):
        # oracle: 2 * int_0^1 (1-t)/(1+t^2) dt = pi/2 - ln 2
        oracle = 2 * (math.pi / 4 - math.log(2) / 2)
        val, err = kernel_integral(1.0, 1.0, 0.0, 1.0, 1)
        assert val == pytest.approx(oracle, abs=1e-10)
        assert err < 1e-6

    def test_constants(self):
        assert kernel_constant(1, 1.0) == pytest.approx(math.pi)
        assert kernel_constant(1, 1.5) == pytest.approx(2.0)
        assert kernel_constant(2, 1.5) == pytest.approx(2 * math.pi)

    def test_bound_holds_on_sweep(self):
        for u in (0.75, 1.0, 1.5):
            for p in (0.5, 0.125):
                for q in (0.5, 0.03125):
                    for theta in (0.0, 0.3, 2.0):
                        rep = kernel_bound_check(p, q, theta, u, 1)
                        assert rep.passed, (u, p, q, theta, rep.ratio)

    def test_far_translation_monotone(self):
        for u in (1.0, 1.5):
            p, q = 0.25, 0.125
            base, _ = kernel_integral(p, q, 0.0, u, 1)
            for theta in (2 * p + 10 * q, 1.5, 3.0):
                shifted, _ = kernel_integral(p, q, theta, u, 1)
                assert shifted <= base

    def test_clamped_translation_bound(self):
        for theta in (0.0, 0.4, 2.0):
            for (p, q) in ((0.5, 0.25), (0.125, 0.0625)):
                val, _ = kernel_integral(p, q, theta, 1.0, 1)
                assert val <= kernel_centered_bound(p, q, 1.0) * (1 + 1e-9)

    def test_vacuous_exponent_rejected(self):
        with pytest.raises(ValueError):
            kernel_bound_check(0.5, 0.5, 0.0, 0.5, 1)
        with pytest.raises(ValueError):
            kernel_constant(2, 1.0)

    def test_q_slope_settles(self):
        qs = [0.5 ** k for k in range(1, 13)]
        assert abs(kernel_q_slope(1, 1.0, 0.5, qs)) <= 0.1

    def test_ratio_drift_within_factor_two(self):
        # halving q at fixed p: past the first octave the ratio stays
        # within 2x of itself and stops growing (it settles toward the
        # comparison constant instead of drifting with q)
        ratios = [kernel_bound_check(1.0, 0.5 ** k, 0.0, 1.0, 1).ratio
                  for k in range(2, 9)]
        assert max(ratios) / min(ratios) <= 2.0
        assert ratios[-1] / ratios[-2] <= 1.02

    def test_two_dimensional_path(self):
        rep = kernel_bound_check(0.5, 0.5, (0.1, 0.0), 1.5, 2,
                                 qmc_points=1 << 14)
        assert rep.passed
        assert rep.error_estimate > 0


class TestPairExpectation:
    def test_ladder_is_stable(self, nested_family_depth3):
        rep = pair_expectation_check(nested_family_depth3, t=0.5, s=0.6,
                                     trials=1 << 19, seed=0)
        assert rep.passed
        assert rep.stability_ratio <= 2.0
        rhos = [r.rho for r in rep.pairs]
        assert max(rhos) / min(rhos) >= 100

    def test_cross_piece_pairs_independent_window(self, nested_family_depth3):
        # different first-level pieces: the value difference is a full
        # unit-window difference, symmetric around zero
        fam = nested_family_depth3
        pairs = anchor_pairs(fam)
        cross = [(x, y) for x, y in pairs
                 if fam.locate(x)[0] != fam.locate(y)[0]]
        rep = pair_expectation_check(fam, t=0.5, s=0.6, trials=4096, seed=1,
                                     pairs=cross[:4])
        for r in rep.pairs:
            assert r.separating_level == 0
            assert r.mean > 0

    def test_expectation_floor(self, nested_family_depth3):
        # every sampled value is at least the zero-difference mass times
        # rho**-(t+d), so the mean respects the deterministic floor
        fam = nested_family_depth3
        (x, y) = ladder_pairs(fam, rungs=[7])[0]
        rho = abs(float(x.value) - float(y.value))
        rep = pair_expectation_check(fam, t=0.5, s=0.6, trials=1 << 16,
                                     seed=2, pairs=[(x, y)])
        assert rep.pairs[0].mean > 0
        assert rep.pairs[0].mean <= rho ** -1.5  # cap is the zero-gap value

    def test_coincident_pair_rejected(self, nested_family_depth3):
        fam = nested_family_depth3
        x = fam.anchor(fam.leaves()[0])
        with pytest.raises(ValueError):
            pair_expectation_check(fam, t=0.5, s=0.6, trials=16, seed=0,
                                   pairs=[(x, x)])

    def test_bad_exponents_rejected(self, nested_family_depth3):
        with pytest.raises(ValueError):
            pair_expectation_check(nested_family_depth3, t=0.7, s=0.6,
                                   trials=16, seed=0)

    def test_drift_keeps_constant_comparable(self, nested_family_depth3):
        drift = lambda p: (cantor_pair.evaluate(
            cantor_pair.DigitFunction.ODD_DIGITS, p),)
        plain = pair_expectation_check(nested_family_depth3, t=0.5, s=0.6,
                                       trials=1 << 18, seed=5)
        drifted = pair_expectation_check(nested_family_depth3, t=0.5, s=0.6,
                                         trials=1 << 18, seed=5, drift=drift)
        assert drifted.passed
        assert drifted.c_hat <= 2 * plain.c_hat


class TestExpectedEnergy:
    def test_two_atom_bound(self):
        # atoms a unit apart: the integrand never exceeds 1, so the
        # average energy stays below twice the weight product
        fam = build_nested_family((2,))
        x = DigitVector((0,) + (0,) * (fam.point_depth - 1))
        y = DigitVector((1,) + (1,) * (fam.point_depth - 1))
        nu = estimators.DiscreteMeasure(
            (x, y), (Fraction(1, 2), Fraction(1, 2)),
            ((x.value,), (y.value,)))
        # rescale: these two atoms are 1/2 apart; bound is 2*(1/4)*rho**-1.5
        rho = float(y.value - x.value)
        check = expected_energy_check(fam, t=0.5, s=0.6, trials=64, seed=0,
                                      c_hat=10.0, measure=nu)
        assert check.empirical <= 0.5 * rho ** -1.5

    def test_natural_measure_bound_depth2_and_3(self, nested_family_depth3):
        rep = pair_expectation_check(nested_family_depth3, t=0.5, s=0.6,
                                     trials=1 << 18, seed=3)
        fam2 = build_nested_family((2, 2))
        for fam in (fam2, nested_family_depth3):
            check = expected_energy_check(fam, t=0.5, s=0.6, trials=120,
                                          seed=4, c_hat=rep.c_hat)
            assert check.passed

    def test_depth8_endpoint_measure_bounded(self, nested_family_depth3):
        from conftest import cantor_endpoint_measure
        values = []
        for m in (6, 7, 8):
            nu = cantor_endpoint_measure(m)
            check = expected_energy_check(nested_family_depth3, t=0.5, s=0.6,
                                          trials=30, seed=6, c_hat=20.0,
                                          measure=nu)
            values.append(check.empirical)
        assert max(values) / min(values) <= 2.0

    def test_drift_uniformity(self, nested_family_depth3):
        drift = lambda p: (cantor_pair.evaluate(
            cantor_pair.DigitFunction.ODD_DIGITS, p),)
        plain = expected_energy_check(nested_family_depth3, t=0.5, s=0.6,
                                      trials=100, seed=8, c_hat=18.0)
        drifted = expected_energy_check(nested_family_depth3, t=0.5, s=0.6,
                                        trials=100, seed=8, c_hat=18.0,
                                        drift=drift)
        assert plain.passed and drifted.passed
