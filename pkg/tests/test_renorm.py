import numpy as np
import numpy.polynomial.polynomial as npoly
import pytest

from jjrenorm import poly, renorm
from jjrenorm.exceptions import NegativeWeight, SignViolation
from jjrenorm.jacobi import JacobiWindow, Tail, entrywise_distance

# Closed forms for the monic quadratic M(w) = w^2 - 132 with the constant
# seed ptilde = 6 (spectrum [-12, 12]):
#   the Stieltjes fixed point at w = -132 solves 36 r^2 - 132 r + 1 = 0,
#   giving branch values -(66 + 12*sqrt(30)) and -(66 - 12*sqrt(30)),
#   the two roots of x + 36/x = -132; their product is 36.
BETA_MINUS = 66.0 + 12.0 * np.sqrt(30.0)        # contractive branch
BETA_PLUS = 66.0 - 12.0 * np.sqrt(30.0)         # dual branch
INBLOCK = 6.0 + np.sqrt(30.0)                   # sqrt(BETA_MINUS)
GLUE = 6.0 - np.sqrt(30.0)                      # 6 / sqrt(BETA_MINUS)

M12 = poly.to_monic(poly.quadratic(12.0))
SEED = JacobiWindow.from_cycle([6.0], [0.0])
DMINUS = renorm.BranchVector.all_minus(2)
DPLUS = renorm.BranchVector.all_plus(2)


def asymmetric_seed():
    # q-cycle {0.1, -0.1} on coupling 5.9: norm surrogate 11.9 <= 12
    return JacobiWindow.from_cycle([5.9, 5.9], [0.1, -0.1])


class TestBranchValues:
    def test_contractive_branch_closed_form(self):
        tv = renorm.branch_values(SEED, 0, DMINUS, M12)
        assert tv[0.0] == pytest.approx(-BETA_MINUS, rel=1e-13)

    def test_dual_branch_closed_form(self):
        # the two branch formulas pick the two roots of the fixed-point
        # quadratic; their product is ptilde^2 = 36
        tv = renorm.branch_values(SEED, 0, DPLUS, M12)
        assert tv[0.0] == pytest.approx(-BETA_PLUS, rel=1e-13)
        assert tv[0.0] * (-BETA_MINUS) == pytest.approx(36.0, rel=1e-12)

    def test_both_roots_satisfy_recurrence(self):
        for beta in (BETA_MINUS, BETA_PLUS):
            assert beta + 36.0 / beta == pytest.approx(132.0, rel=1e-12)

    def test_sign_matches_critical_value(self):
        tv = renorm.branch_values(asymmetric_seed(), 3, DMINUS, M12)
        assert tv[0.0] < 0  # same sign as M(0) = -132

    def test_translation_covariance(self):
        J = asymmetric_seed()
        for s in (-2, 0, 3):
            a = renorm.branch_values(J.shifted(1), s, DMINUS, M12)
            b = renorm.branch_values(J, s + 1, DMINUS, M12)
            assert a[0.0] == pytest.approx(b[0.0], rel=1e-13)


class TestInterpolation:
    def test_zero_values(self):
        tp = renorm.interpolate_tpoly({0.0: 0.0}, M12.q, M12)
        # degenerates to (z - q) T'(z)/d = z * z
        assert tp == pytest.approx([0.0, 0.0, 1.0], abs=1e-14)

    def test_quadratic_block_poly(self):
        tp = renorm.interpolate_tpoly({0.0: -BETA_MINUS}, M12.q, M12)
        assert tp == pytest.approx([-BETA_MINUS, 0.0, 1.0], rel=1e-13)

    def test_node_reproduction_removable_singularity(self):
        tp = renorm.interpolate_tpoly({0.0: -BETA_MINUS}, M12.q, M12)
        assert npoly.polyval(0.0, tp) == pytest.approx(-BETA_MINUS, rel=1e-12)

    def test_cubic_antisymmetric_values(self):
        M3 = poly.to_monic(poly.from_coeffs((0.0, -30.0, 0.0, 31.0)))
        pts, vals = poly.critical_data(M3)
        v = 70.0
        tvals = {pts[0]: v * np.sign(vals[0]), pts[1]: v * np.sign(vals[1])}
        tp = renorm.interpolate_tpoly(tvals, M3.q, M3)
        # antisymmetric values on symmetric nodes keep the polynomial odd
        assert abs(tp[0]) < 1e-10 and abs(tp[2]) < 1e-10
        # exact monic cubic through (-+sqrt(10), +-v): w^3 + c1 w with
        # c1 = -10 - v/sqrt(10) for sign(vals[0]) = +1
        c1 = -10.0 - np.sign(vals[0]) * v / np.sqrt(10.0)
        assert tp[1] == pytest.approx(c1, rel=1e-12)
        assert npoly.polyval(pts[0], tp) == pytest.approx(tvals[pts[0]],
                                                          rel=1e-12)


class TestBlockFromTpoly:
    def test_symmetric_two_point_block(self):
        beta = 7.3
        qd, poff, meas = renorm.block_from_tpoly([-beta, 0.0, 1.0], M12)
        assert qd == pytest.approx([0.0, 0.0], abs=1e-12)
        assert poff == pytest.approx([np.sqrt(beta)], rel=1e-13)
        assert meas.weights == pytest.approx([0.5, 0.5], rel=1e-12)
        assert np.sort(meas.support) == pytest.approx(
            [-np.sqrt(beta), np.sqrt(beta)], rel=1e-13)

    def test_pipeline_block_entry(self):
        qd, poff, _ = renorm.block_from_tpoly([-BETA_MINUS, 0.0, 1.0], M12)
        assert poff[0] == pytest.approx(INBLOCK, rel=1e-13)
        assert poff[0] == pytest.approx(11.4772255750516, rel=1e-12)

    def test_weights_always_sum_to_one(self):
        for beta in (0.5, 12.0, 131.0):
            _, _, meas = renorm.block_from_tpoly([-beta, 0.0, 1.0], M12)
            assert meas.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_invalid_values_raise(self):
        # a positive value at the (negative-valued) critical point breaks
        # the real-rooted / positive-weight structure
        from jjrenorm.exceptions import NonRealBlockSpectrum
        with pytest.raises((NegativeWeight, NonRealBlockSpectrum,
                            ArithmeticError)):
            renorm.block_from_tpoly(
                renorm.interpolate_tpoly({0.0: +BETA_MINUS}, M12.q, M12), M12)


class TestGlueAndRenormalize:
    def test_constant_seed_two_periodic(self):
        J = renorm.renormalize(SEED, DMINUS, M12)
        assert J.is_exactly_periodic and len(J.q) == 2
        assert J.p_at(1) == pytest.approx(INBLOCK, rel=1e-13)
        assert J.p_at(0) == pytest.approx(GLUE, rel=1e-13)
        assert J.p_at(2) == pytest.approx(GLUE, rel=1e-13)
        assert np.max(np.abs(J.q)) < 1e-14

    def test_glue_value_frozen(self):
        J = renorm.renormalize(SEED, DMINUS, M12)
        assert J.p_at(0) == pytest.approx(0.52277442494834, rel=1e-12)

    def test_periodic_seed_gives_dm_periodic(self):
        J = renorm.renormalize(asymmetric_seed(), DMINUS, M12)
        assert J.is_exactly_periodic and len(J.q) == 4
        # entrywise periodicity over a 4*d*m window
        for k in range(-16, 16):
            assert J.p_at(k) == pytest.approx(J.p_at(k + 4), rel=1e-13)
            assert J.q_at(k) == pytest.approx(J.q_at(k + 4), abs=1e-13)

    def test_diagonal_identity(self):
        # q_{sd} = q at every block for the monic pipeline
        J = renorm.renormalize(asymmetric_seed(), DMINUS, M12)
        for s in range(-4, 5):
            assert J.q_at(2 * s) == pytest.approx(M12.q, abs=1e-12)

    def test_translation_covariance(self):
        Jb = asymmetric_seed()
        lhs = renorm.renormalize(Jb.shifted(1), DMINUS, M12)
        rhs = renorm.renormalize(Jb, DMINUS, M12).shifted(2)
        for k in range(-8, 8):
            assert lhs.p_at(k) == pytest.approx(rhs.p_at(k), rel=1e-13)
            assert lhs.q_at(k) == pytest.approx(rhs.q_at(k), abs=1e-13)

    def test_chain_rule(self):
        T = poly.quadratic(12.0)
        seed_u = JacobiWindow.from_cycle([0.5], [0.0])
        two_step = renorm.renormalize(
            renorm.renormalize(seed_u, DMINUS, T), DMINUS, T)
        U = poly.compose(T, T)
        one_step = renorm.renormalize(seed_u, renorm.BranchVector.all_minus(4),
                                      U)
        _, _, bound = entrywise_distance(two_step, one_step, (-16, 16))
        assert bound <= 1e-8

    def test_split_seed_propagates(self):
        # a vanishing seed coupling is reproduced as a vanishing glue entry
        seed = JacobiWindow.from_cycle([5.0, 0.0], [0.0, 0.0])
        J = renorm.renormalize(seed, DMINUS, M12)
        zeros = [k for k in range(len(J.q)) if J.p_at(k) == 0.0]
        assert zeros  # flagged, not divided
        assert J.split_sites() == zeros

    def test_window_request_on_nonperiodic_seed(self):
        n = 65
        seed = JacobiWindow(-32, np.full(n, 6.0), np.zeros(n),
                            Tail.constant(6.0, 0.0), Tail.constant(6.0, 0.0))
        J = renorm.renormalize(seed, DMINUS, M12, (-20, 20))
        assert J.lo <= -20 and J.hi >= 20
        assert J.p_at(1) == pytest.approx(INBLOCK, rel=1e-12)


class TestRecurrenceGate:
    def _blocks(self, seed, delta, lo=-3, hi=3):
        return renorm.compute_blocks(seed, delta, M12, lo, hi)

    def test_constant_seed_tiny_residual(self):
        blocks = self._blocks(SEED, DMINUS)
        assert renorm.check_recurrence(blocks, SEED, M12) <= 1e-12

    def test_both_branches_pass(self):
        for delta in (DMINUS, DPLUS):
            blocks = self._blocks(asymmetric_seed(), delta)
            assert renorm.check_recurrence(blocks, asymmetric_seed(),
                                           M12) <= 1e-12

    def test_flipped_sign_detected(self):
        import dataclasses
        blocks = self._blocks(SEED, DMINUS)
        bad = [dataclasses.replace(b, branch_values=(-b.branch_values[0],))
               for b in blocks]
        assert renorm.check_recurrence(bad, SEED, M12) >= 1e-6

    def test_inconsistent_branch_mixing_detected(self):
        bm = self._blocks(SEED, DMINUS)
        bp = self._blocks(SEED, DPLUS)
        mixed = [bm[i] if (i % 2 == 0) else bp[i] for i in range(len(bm))]
        assert renorm.check_recurrence(mixed, SEED, M12) >= 1e-6


class TestRenormEquation:
    def test_constant_seed(self):
        J = renorm.renormalize(SEED, DMINUS, M12)
        assert renorm.check_renorm_equation(J, SEED, M12, n_sec=600) <= 1e-8

    def test_decays_under_section_doubling(self):
        J = renorm.renormalize(SEED, DMINUS, M12)
        r1 = renorm.check_renorm_equation(J, SEED, M12, n_sec=300)
        r2 = renorm.check_renorm_equation(J, SEED, M12, n_sec=600)
        assert r2 <= max(0.5 * r1, 1e-10)

    def test_large_z_neumann_scaling(self):
        # both compressed resolvents behave like 1/z at large z
        J = renorm.renormalize(SEED, DMINUS, M12)
        z = 100.0 * M12.xi
        res = renorm.check_renorm_equation(J, SEED, M12, z_samples=[z],
                                           n_sec=200)
        assert res <= 1.0 / z ** 2 * 10 * M12.xi

    def test_glue_perturbation_detected(self):
        J = renorm.renormalize(SEED, DMINUS, M12)
        p = np.array([J.p_at(k) for k in range(-64, 64)])
        q = np.array([J.q_at(k) for k in range(-64, 64)])
        p[64] *= 1.01        # glue entry p_0 perturbed by 1%
        bad = JacobiWindow(-64, p, q, Tail.truncate(16), Tail.truncate(16))
        res = renorm.check_renorm_equation(bad, SEED, M12, n_sec=240)
        # measured detection level for a 1% glue error is ~7e-6
        assert res >= 5e-6


class TestPolynomialForm:
    def test_constant_seed(self):
        J = renorm.renormalize(SEED, DMINUS, M12)
        r1, r2 = renorm.check_polynomial_form(J, SEED, M12, n_sec=300)
        assert r1 <= 1e-10
        assert r2 <= 1e-10

    def test_periodic_seed(self):
        seed = asymmetric_seed()
        J = renorm.renormalize(seed, DMINUS, M12)
        r1, r2 = renorm.check_polynomial_form(J, seed, M12, n_sec=300)
        assert r1 <= 1e-8 and r2 <= 1e-8


class TestCriticalPointMeasure:
    def test_quadratic_closed_form(self):
        blocks = renorm.compute_blocks(SEED, DMINUS, M12, 0, 1)
        meas, resid = renorm.critical_point_measure(blocks[0], M12)
        # single atom at 0 with mass |T^(0)(0)| = beta = p_1^2
        assert meas.support == pytest.approx([0.0])
        assert meas.mass == pytest.approx(BETA_MINUS, rel=1e-12)
        assert resid <= 1e-9

    def test_glue_identity_closed_form(self):
        # mass/value^2 = 1/beta must equal glue^2/ptilde^2
        assert (BETA_MINUS / BETA_MINUS ** 2) == pytest.approx(
            GLUE ** 2 / 36.0, rel=1e-12)

    def test_positive_weights_asymmetric(self):
        blocks = renorm.compute_blocks(asymmetric_seed(), DMINUS, M12, -2, 2)
        for b in blocks:
            meas, resid = renorm.critical_point_measure(b, M12)
            assert np.all(meas.weights > 0)
            assert resid <= 1e-9

    def test_cubic_weights_positive(self):
        M3 = poly.to_monic(poly.from_coeffs((0.0, -30.0, 0.0, 31.0)))
        seed3 = JacobiWindow.from_cycle([M3.xi / 2.0], [0.0])
        blocks = renorm.compute_blocks(seed3, renorm.BranchVector.all_minus(3),
                                       M3, 0, 1)
        meas, resid = renorm.critical_point_measure(blocks[0], M3)
        assert np.all(meas.weights > 0)
        assert resid <= 1e-9


class TestBranchEnumeration:
    def test_two_solutions_quadratic(self):
        got = renorm.enumerate_branches(SEED, M12)
        assert len(got) == 2
        for bv, J in got:
            assert renorm.check_renorm_equation(J, SEED, M12,
                                                n_sec=300) <= 1e-8

    def test_constant_seed_solutions_are_shift_duals(self):
        # the two solutions carry the same coupling pair in swapped order:
        # they are images of each other under reflect-and-shift, not equal
        got = dict((str(bv), J) for bv, J in renorm.enumerate_branches(
            SEED, M12))
        Jm, Jp = got["-"], got["+"]
        assert Jm.p_at(1) == pytest.approx(INBLOCK, rel=1e-12)
        assert Jp.p_at(1) == pytest.approx(GLUE, rel=1e-12)
        for k in range(-6, 6):
            assert Jp.p_at(k) == pytest.approx(Jm.p_at(k + 1), rel=1e-12)

    def test_asymmetric_seed_two_distinct_valid(self):
        seed = asymmetric_seed()
        got = renorm.enumerate_branches(seed, M12)
        (b1, J1), (b2, J2) = got
        _, _, dist = entrywise_distance(J1, J2, (-8, 8))
        assert dist > 1e-6
        for _, J in got:
            assert renorm.check_renorm_equation(J, seed, M12,
                                                n_sec=300) <= 1e-8

    def test_cubic_four_solutions(self):
        M3 = poly.to_monic(poly.from_coeffs((0.0, -30.0, 0.0, 31.0)))
        seed3 = JacobiWindow.from_cycle([M3.xi / 2.0], [0.0])
        got = renorm.enumerate_branches(seed3, M3)
        assert len(got) == 4
        for _, J in got:
            blocks = renorm.compute_blocks(seed3, _, M3, -2, 2)
            assert renorm.check_recurrence(blocks, seed3, M3) <= 1e-11


class TestDuality:
    def test_constant_seed(self):
        assert renorm.dual_branch_check(SEED, DMINUS, M12) <= 1e-12

    def test_asymmetric_seed(self):
        assert renorm.dual_branch_check(asymmetric_seed(), DMINUS, M12,
                                        (-16, 16)) <= 1e-9

    def test_negation_involution(self):
        assert DMINUS.negated().negated() == DMINUS


class TestRe0:
    def test_constant_seed(self):
        J = renorm.renormalize(SEED, DMINUS, M12)
        assert renorm.check_re0(J, SEED, M12) <= 1e-10

    def test_periodic_seed(self):
        seed = asymmetric_seed()
        J = renorm.renormalize(seed, DMINUS, M12)
        assert renorm.check_re0(J, seed, M12) <= 1e-8

    def test_leading_behavior(self):
        # 1/rt_-(T(z),0) ~ -T(z) at large z; the identity's right side has
        # the same degree count z * z = deg T
        from jjrenorm.jacobi import resolvent_minus
        z = 16.0 * M12.xi
        Tz = poly.evaluate(M12, z)
        lhs = 1.0 / resolvent_minus(SEED, Tz, 0)
        assert lhs / (-Tz) == pytest.approx(1.0, rel=2 * M12.xi / abs(Tz))

    def test_perturbed_block_detected(self):
        J = renorm.renormalize(SEED, DMINUS, M12)
        p = np.array([J.p_at(k) for k in range(-32, 32)])
        q = np.array([J.q_at(k) for k in range(-32, 32)])
        p[33] *= 1.01        # p_1: corrupts R0 and the output resolvents
        bad = JacobiWindow(-32, p, q, Tail.truncate(16), Tail.truncate(16))
        assert renorm.check_re0(bad, SEED, M12) >= 1e-5

    def test_block_polynomials_cross_check(self):
        # the second-kind polynomial of the block must reproduce T'(z)/d
        # after the ptilde normalization
        J = renorm.renormalize(SEED, DMINUS, M12)
        Pd, Qd, R = renorm.block_polynomials(J, SEED, 2)
        tp = npoly.polyder(np.asarray(M12.coeffs)) / 2.0
        assert np.allclose(6.0 * np.asarray(Qd), tp, atol=1e-12)
        assert np.allclose(6.0 * np.asarray(Pd),
                           [-BETA_MINUS, 0.0, 1.0], atol=1e-10)
        assert R == pytest.approx([1.0 / 6.0, 0.0], abs=1e-13)


class TestContraction:
    def test_bounds_at_ratio_ten(self):
        # |T(c)|/xi = 10 exactly: rho = 11 quadratic
        kappa, kglue = renorm.contraction_bounds(poly.quadratic(11.0))
        assert kappa == pytest.approx(11.0 / 81.0, rel=1e-12)
        assert kglue == pytest.approx((1.0 / 9.0) * (1 + 11.0 / 162.0),
                                      rel=1e-12)

    def test_bounds_at_rho12(self):
        kappa, kglue = renorm.contraction_bounds(poly.quadratic(12.0))
        assert kappa == pytest.approx(0.12, rel=1e-12)
        assert kglue == pytest.approx(0.106, rel=1e-12)

    def test_entrywise_ratios_random_pairs(self):
        rng = np.random.default_rng(11)
        pairs = []
        n = 33
        for _ in range(8):
            base_p = rng.uniform(4.0, 5.8)
            base_q = rng.uniform(-0.3, 0.3)
            J1 = JacobiWindow(-16,
                              base_p + rng.uniform(-0.1, 0.1, n),
                              base_q + rng.uniform(-0.1, 0.1, n),
                              Tail.constant(base_p, base_q),
                              Tail.constant(base_p, base_q))
            J2 = JacobiWindow(-16,
                              np.asarray(J1.p) + rng.uniform(-0.05, 0.05, n),
                              np.asarray(J1.q) + rng.uniform(-0.05, 0.05, n),
                              Tail.constant(base_p, base_q),
                              Tail.constant(base_p, base_q))
            pairs.append((J1, J2))
        entry, glue_r = renorm.lipschitz_ratios(M12, DMINUS, pairs, 12)
        assert np.max(entry) <= 0.12 + 0.02
        assert np.max(glue_r) <= 0.106 + 0.02
