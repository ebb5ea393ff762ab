import numpy as np
import pytest

from jjrenorm import limitper, poly, renorm
from jjrenorm.exceptions import WindowExhausted
from jjrenorm.jacobi import JacobiWindow, Tail, entrywise_distance

M12 = poly.to_monic(poly.quadratic(12.0))
DMINUS = renorm.BranchVector.all_minus(2)
SEED = JacobiWindow.from_cycle([6.0], [0.0])


@pytest.fixture(scope="module")
def tower():
    return limitper.iterate_fixed(M12, DMINUS, SEED, 8, (-512, 511))


class TestIterateFixed:
    def test_geometric_ratios(self, tower):
        assert len(tower.step_distances) == 8
        assert all(r <= 0.14 for r in tower.empirical_ratios)

    def test_ratio_below_printed_bound(self, tower):
        kappa, _ = renorm.contraction_bounds(M12)
        assert all(r <= kappa + 0.02 for r in tower.empirical_ratios[1:])

    def test_fixed_point_value(self, tower):
        assert tower.final.p_at(1) == pytest.approx(np.sqrt(132.0),
                                                    rel=1e-12)

    def test_seed_independence(self, tower):
        other = JacobiWindow.from_cycle([5.5, 5.9], [0.0, 0.0])
        t2 = limitper.iterate_fixed(M12, DMINUS, other, 8, (-512, 511))
        _, _, dist = entrywise_distance(tower.final, t2.final, (-128, 127))
        assert dist <= 2.0 * (0.14) ** 8 * 2 * M12.xi

    def test_zero_steps(self):
        t = limitper.iterate_fixed(M12, DMINUS, SEED, 0)
        assert len(t.iterates) == 1 and t.iterates[0] is SEED

    def test_insufficient_gap_requires_force(self):
        M3 = poly.to_monic(poly.quadratic(3.0))
        seed = JacobiWindow.from_cycle([M3.xi / 2.0], [0.0])
        with pytest.raises(ValueError):
            limitper.iterate_fixed(M3, DMINUS, seed, 2)
        t = limitper.iterate_fixed(M3, DMINUS, seed, 2, (-64, 63), force=True)
        assert len(t.step_distances) == 2

    def test_window_budget(self):
        narrow = JacobiWindow(-8, np.full(17, 6.0), np.zeros(17),
                              Tail.truncate(8), Tail.truncate(8))
        with pytest.raises(WindowExhausted):
            limitper.iterate_fixed(M12, DMINUS, narrow, 2, (-256, 255))


class TestIterateSequence:
    def test_uniform_matches_iterate_fixed(self, tower):
        t = limitper.iterate_sequence([M12] * 4, DMINUS, SEED, (-512, 511))
        tf = limitper.iterate_fixed(M12, DMINUS, SEED, 4, (-512, 511))
        _, _, dist = entrywise_distance(t.final, tf.final, (-64, 63))
        assert dist == 0.0

    def test_nested_path_matches_incremental_for_uniform(self):
        # forcing the generic nested path via a per-level policy list must
        # reproduce the incremental computation exactly
        t_nested = limitper.iterate_sequence([M12] * 4, [DMINUS] * 4, SEED,
                                             (-128, 127))
        t_inc = limitper.iterate_sequence([M12] * 4, DMINUS, SEED,
                                          (-128, 127))
        _, _, dist = entrywise_distance(t_nested.final, t_inc.final,
                                        (-32, 31))
        assert dist <= 1e-12

    def test_alternating_tower_converges(self):
        T12, T15 = poly.quadratic(12.0), poly.quadratic(15.0)
        seed = JacobiWindow.from_cycle([0.5], [0.0])
        t = limitper.iterate_sequence([T12, T15] * 3, DMINUS, seed,
                                      (-128, 127))
        assert all(r < 0.2 for r in t.empirical_ratios)

    def test_epsilon_policy_distinct_limits(self):
        T12 = poly.quadratic(12.0)
        seed = JacobiWindow.from_cycle([0.5], [0.0])
        pol_a = [DMINUS] * 6
        pol_b = [DMINUS, DMINUS.negated()] * 3
        ta = limitper.iterate_sequence([T12] * 6, pol_a, seed, (-128, 127))
        tb = limitper.iterate_sequence([T12] * 6, pol_b, seed, (-128, 127))
        assert all(r < 0.2 for r in ta.empirical_ratios)
        assert all(r < 0.2 for r in tb.empirical_ratios)
        _, _, dist = entrywise_distance(ta.final, tb.final, (-32, 31))
        assert dist > 1e-3

    def test_policy_length_mismatch(self):
        M3 = poly.to_monic(poly.from_coeffs((0.0, -30.0, 0.0, 31.0)))
        seed = JacobiWindow.from_cycle([M3.xi / 2.0], [0.0])
        with pytest.raises(ValueError):
            limitper.iterate_sequence([M3], DMINUS, seed, (-32, 31))


class TestApProfile:
    def test_exactly_periodic_vanishes(self):
        J = JacobiWindow.from_cycle([0.3, 0.45], [0.1, -0.1])
        for j in (1, 2, 3):
            assert limitper.shift_distance(J, 2 * j, (-64, 63)) == 0.0

    def test_fixed_point_ladder(self, tower):
        prof = limitper.ap_profile(tower.final, [2] * 8, 6, 2, M12.xi,
                                   (-256, 255))
        assert prof.kappa_emp <= 0.14
        for l, j, k, rho in prof.entries:
            if l >= 1:
                assert rho <= 2 * M12.xi * 0.14 ** l * (1 + 1e-9)

    def test_subadditivity(self, tower):
        J = tower.final
        w = (-128, 127)
        for k, m in [(2, 4), (8, 4), (2, 16)]:
            lhs = limitper.shift_distance(J, k + m, w)
            rhs = (limitper.shift_distance(J, k, w)
                   + limitper.shift_distance(J, m, w))
            assert lhs <= rhs + 1e-9

    def test_random_coefficients_no_decay(self):
        rng = np.random.default_rng(5)
        n = 512
        J = JacobiWindow(-256, 0.3 + 0.2 * rng.random(n),
                         0.2 * rng.standard_normal(n),
                         Tail.truncate(8), Tail.truncate(8))
        prof = limitper.ap_profile(J, [2] * 4, 4, 2, 1.0, (-200, 150))
        assert prof.kappa_emp > 0.5


class TestSplitCheck:
    def test_fixed_point_split(self, tower):
        rep = limitper.split_check(tower, M12.xi, 2)
        assert rep["p0"] <= 2 * 12.0 * 0.14 ** 8
        assert rep["kappa_layer"] <= 0.14
        layers = rep["layer_max"]
        for l in range(1, 8):
            assert layers[l] <= 2 * M12.xi * 0.14 ** l

    def test_seed_split_stays(self):
        seed = JacobiWindow.from_cycle([5.0, 0.0], [0.0, 0.0])
        t = limitper.iterate_fixed(M12, DMINUS, seed, 2, (-64, 63))
        assert len(t.final.split_sites()) > 0

    def test_spectrum_containment(self, tower):
        res = limitper.section_spectrum_vs_preimage(tower.final, M12, 3, 512)
        assert res <= 1e-3


class TestGroupAddress:
    def test_zero(self):
        a = limitper.group_address(0, [2, 2, 2, 2])
        assert a.residues == (0, 0, 0, 0)

    def test_binary_six(self):
        a = limitper.group_address(6, [2] * 5)
        assert a.residues == (0, 2, 6, 6, 6)

    def test_compatibility_enforced(self):
        with pytest.raises(ValueError):
            limitper.InverseLimitAddress((2, 2), (1, 0))

    def test_distance(self):
        assert limitper.group_distance(0, 8, [2] * 5) == 0.5 ** 3
        assert limitper.group_distance(3, 3, [2] * 5) == 0.0
        assert limitper.group_distance(0, 1, [2] * 5) == 1.0

    def test_metric_compatibility_on_fixed_point(self, tower):
        # rho_J(k) <= C * dist(k, 0) with one fitted constant
        J = tower.final
        w = (-128, 127)
        ks = [2 ** l * j for l in range(6) for j in (1, 3)]
        ratios = [limitper.shift_distance(J, k, w)
                  / limitper.group_distance(k, 0, [2] * 10) for k in ks]
        C = max(ratios)
        assert np.isfinite(C)
        for k, r in zip(ks, ratios):
            assert limitper.shift_distance(J, k, w) <= \
                C * limitper.group_distance(k, 0, [2] * 10) + 1e-12
