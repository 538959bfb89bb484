import numpy as np
import pytest

from pmpcheck.integrate import MissingTailBound
from pmpcheck.weights import (
    InvalidExponent,
    NonPositiveWeight,
    WeightSpec,
    check_distribution,
    check_dominance,
    check_tube_scale,
    check_weight_properties,
    default_property_grid,
    exp_decay,
    from_expression,
    power,
    weibull,
)


class TestFamilies:
    def test_exp_decay_tail_bound_is_exact(self):
        from scipy.integrate import quad

        nu = exp_decay(2.0)
        for T in (1.0, 5.0, 9.0):
            true_tail = quad(lambda t: np.exp(-2 * t), T, np.inf)[0]
            assert nu.tail_bound(T) == pytest.approx(true_tail, rel=1e-10)

    def test_weibull_mass_is_inverse_shape(self):
        from scipy.integrate import quad

        # int_0^inf t^(k-1) e^(-t^k) dt = 1/k
        for k in (0.3, 0.5, 1.0):
            w = weibull(k)
            mass = quad(lambda t: w(np.atleast_1d(t))[0], 0, np.inf, limit=200)[0]
            assert mass == pytest.approx(1.0 / k, rel=1e-7)

    def test_weibull_tail_bound_is_exact(self):
        import mpmath as mp

        w = weibull(0.5)
        for T in (1.0, 4.0, 25.0):
            true_tail = mp.quad(lambda t: mp.sqrt(1 / t) * mp.e ** (-mp.sqrt(t)), [T, mp.inf])
            assert w.tail_bound(T) == pytest.approx(float(true_tail), rel=1e-10)

    def test_power_tail_bound(self):
        nu = power(2.0)
        # int_T^inf (1+t)^-2 = 1/(1+T)
        assert nu.tail_bound(9.0) == pytest.approx(0.1)
        assert power(1.0).tail_bound is None

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_family_exponent_validation(self, bad):
        with pytest.raises(InvalidExponent):
            exp_decay(bad)
        with pytest.raises(InvalidExponent):
            power(bad)
        with pytest.raises(InvalidExponent):
            weibull(bad)

    def test_weibull_shape_above_one_rejected(self):
        with pytest.raises(InvalidExponent):
            weibull(1.5)

    def test_fd_substitute_close_to_analytic(self):
        # finite differences must agree within 10*h*max|w''| (here |w''|<=1)
        manual = WeightSpec("bare-exp", lambda t: np.exp(-np.asarray(t, dtype=float)))
        ts = np.linspace(0.0, 10.0, 101)
        fd = manual.derivative(ts)
        np.testing.assert_allclose(fd, -np.exp(-ts), atol=10 * manual.fd_step)

    def test_expression_weight_has_symbolic_derivative(self):
        nu = from_expression("exp(-1.5*t)")
        ts = np.linspace(0.0, 5.0, 21)
        np.testing.assert_allclose(nu.derivative(ts), -1.5 * np.exp(-1.5 * ts), rtol=1e-12)

    def test_expression_weight_rejects_state_variables(self):
        with pytest.raises(ValueError, match="x1"):
            from_expression("exp(-t) * x1")

    def test_expression_pole_defaults_to_unknown(self):
        assert from_expression("exp(-t)").pole_exp is None


class TestWeightProperties:
    def test_exponential_passes_everything(self):
        rep = check_weight_properties(exp_decay(1.0))
        assert rep.verdicts == {k: "pass" for k in ("E1", "E2", "E3", "E4", "E5")}
        assert rep.K_estimate == pytest.approx(1.0)
        assert rep.all_pass

    def test_power_passes_with_k_equal_exponent(self):
        rep = check_weight_properties(power(2.0))
        assert rep.all_pass
        # |w'|/w = a/(1+t) peaks at t=0
        assert rep.K_estimate == pytest.approx(2.0)

    def test_harmonic_decay_fails_vanishing_and_integrability(self):
        rep = check_weight_properties(power(1.0))
        assert rep.verdicts["E5"] == "fail"
        assert rep.verdicts["E3"] == "fail"
        # witness value approaches the nonzero limit of t*w(t)
        t_w, val_w = rep.witnesses["E5"]
        assert val_w == pytest.approx(1.0, abs=0.01)

    def test_gaussian_profile_fails_derivative_bound(self):
        rep = check_weight_properties(from_expression("exp(-t^2)", pole_exp=0.0))
        assert rep.verdicts["E4"] == "fail"
        t_w, ratio = rep.witnesses["E4"]
        # the ratio |w'|/w = 2t at the witness point
        assert ratio == pytest.approx(2.0 * t_w, rel=1e-6)
        assert rep.verdicts["E1"] == "pass"

    def test_weak_mode_drops_the_vanishing_property(self):
        rep = check_weight_properties(exp_decay(1.0), mode="weak")
        assert set(rep.verdicts) == {"F1", "F2", "F3", "F4"}
        assert rep.all_pass

    def test_negative_weight_is_a_hard_error(self):
        with pytest.raises(NonPositiveWeight):
            check_weight_properties(from_expression("1 - t"))

    def test_genuine_zero_is_a_hard_error(self):
        dead = WeightSpec("drops-dead", lambda t: np.where(np.asarray(t) < 1.0, 1.0, 0.0))
        with pytest.raises(NonPositiveWeight) as err:
            check_weight_properties(dead)
        assert err.value.t == pytest.approx(1.0, abs=0.05)

    def test_underflow_is_tolerated_with_note(self):
        rep = check_weight_properties(exp_decay(20.0))
        assert rep.all_pass
        assert any("underflow" in n for n in rep.notes)

    def test_jump_fails_continuity_with_witness(self):
        jumpy = WeightSpec("half-step", lambda t: np.where(np.asarray(t) < 1.0, 1.0, 0.5))
        rep = check_weight_properties(jumpy)
        assert rep.verdicts["E1"] == "fail"
        t_w, _ = rep.witnesses["E1"]
        assert abs(t_w - 1.0) < 0.05

    def test_growth_fails_monotonicity(self):
        rep = check_tube_scale(from_expression("1 + t", pole_exp=0.0))
        assert rep.verdicts["F6"] == "fail"

    def test_every_fail_has_a_witness(self):
        for nu in (power(1.0), from_expression("exp(-t^2)", pole_exp=0.0)):
            rep = check_weight_properties(nu)
            for name, verdict in rep.verdicts.items():
                if verdict == "fail":
                    assert name in rep.witnesses

    def test_verdicts_stable_under_grid_refinement(self):
        for nu in (exp_decay(1.0), power(2.0), power(1.0)):
            a = check_weight_properties(nu, grid=default_property_grid(points=2048))
            b = check_weight_properties(nu, grid=default_property_grid(points=4096))
            assert a.verdicts == b.verdicts

    def test_deterministic(self):
        a = check_weight_properties(exp_decay(4.5))
        b = check_weight_properties(exp_decay(4.5))
        assert a.verdicts == b.verdicts and a.K_estimate == b.K_estimate

    def test_fd_step_recorded_only_when_used(self):
        manual = WeightSpec("bare-exp", lambda t: np.exp(-np.asarray(t, dtype=float)))
        assert check_weight_properties(manual).fd_step_used == manual.fd_step
        assert check_weight_properties(exp_decay(1.0)).fd_step_used is None


class TestDistribution:
    def test_exponential_mass(self):
        rep = check_distribution(exp_decay(2.0))
        assert rep.verdicts["E6"] == "pass"
        assert "0.5" in rep.notes[0]

    def test_constant_is_not_integrable(self):
        rep = check_distribution(from_expression("1", pole_exp=0.0))
        assert rep.verdicts["E6"] == "fail"

    def test_weibull_pole_is_integrable(self):
        rep = check_distribution(weibull(0.5))
        assert rep.verdicts["E6"] == "pass"

    def test_weak_mode_rejects_signed_density(self):
        rep = check_distribution(from_expression("cos(t)", pole_exp=0.0), mode="weak")
        assert rep.verdicts["F5"] == "fail"
        t_w, v_w = rep.witnesses["F5"]
        assert v_w < 0

    def test_strong_mode_signed_density_fails_on_mass(self):
        rep = check_distribution(from_expression("cos(t)", pole_exp=0.0), mode="strong")
        assert rep.verdicts["E6"] == "fail"

    def test_missing_tail_bound_raises(self):
        with pytest.raises(MissingTailBound):
            check_distribution(from_expression("(1 + t)^-1.05", pole_exp=0.0))


class TestDominance:
    def test_weibull_power_family_over_p(self):
        # q(k-1) with k=1/2: p=2 hits the exponent -1 exactly (log-divergent
        # at zero); every larger p clears it
        nu, om = power(2.0), weibull(0.5)
        rec = check_dominance(nu, om, 2.0)
        assert not rec.passed
        assert rec.pole_exponent == pytest.approx(-1.0)
        for p in (2.5, 3.0, 4.0):
            assert check_dominance(nu, om, p).passed

    def test_monotone_in_p(self):
        nu, om = power(2.0), weibull(0.5)
        seen_pass = False
        for p in (2.0, 2.5, 3.0, 4.0):
            ok = check_dominance(nu, om, p).passed
            if seen_pass:
                assert ok
            seen_pass = seen_pass or ok

    def test_exponential_pair_threshold(self):
        om = exp_decay(2.0)
        assert check_dominance(exp_decay(3.0), om, 2.0).passed
        assert not check_dominance(exp_decay(4.0), om, 2.0).passed
        assert not check_dominance(exp_decay(4.5), om, 2.0).passed

    def test_divergence_is_visible_in_partials(self):
        rec = check_dominance(exp_decay(4.5), exp_decay(2.0), 2.0)
        assert not rec.passed
        finite = rec.partials[np.isfinite(rec.partials)]
        assert np.all(np.diff(finite) > 0)

    def test_conjugate_exponent(self):
        rec = check_dominance(exp_decay(3.0), exp_decay(2.0), 3.0)
        assert rec.q == pytest.approx(1.5)

    @pytest.mark.parametrize("p", [1.0, 0.5, -2.0, np.inf])
    def test_invalid_exponent(self, p):
        with pytest.raises(InvalidExponent):
            check_dominance(exp_decay(1.0), exp_decay(1.0), p)

    def test_log_space_combination_survives_underflow(self):
        # e^{-2t} underflows near t=350 while the combined integrand e^{0.5t}
        # explodes; the verdict must still be divergence
        rec = check_dominance(exp_decay(4.5), exp_decay(2.0), 2.0)
        assert rec.verdict == "diverged"
        assert not any("linear space" in n for n in rec.notes)

    def test_expression_weights_decompose_into_log_forms(self):
        rec = check_dominance(
            from_expression("exp(-3*t)", pole_exp=0.0),
            from_expression("exp(-2*t)", pole_exp=0.0),
            2.0,
        )
        assert rec.passed
        assert not any("linear space" in n for n in rec.notes)
        # combined integrand is e^{-t}; its full mass should be visible
        assert rec.value == pytest.approx(1.0, rel=1e-6)

    def test_bare_specs_fall_back_to_linear_space(self):
        nu = WeightSpec("plain-quartic", lambda t: (1.0 + np.asarray(t, dtype=float)) ** -4.0)
        om = WeightSpec("plain-cubic", lambda t: (1.0 + np.asarray(t, dtype=float)) ** -3.0)
        rec = check_dominance(nu, om, 2.0)
        # combined integrand (1+t)^-2 converges, but without log forms or a
        # tail bound the ladder cannot settle it at the default tolerance
        assert rec.verdict == "inconclusive"
        assert any("linear space" in n for n in rec.notes)

    def test_underflowed_fallback_is_never_certified(self):
        nu = WeightSpec("opaque-exp", lambda t: np.exp(-np.asarray(t, dtype=float)))
        om = WeightSpec("opaque-exp-too", lambda t: np.exp(-np.asarray(t, dtype=float)))
        rec = check_dominance(nu, om, 2.0)
        # true combined integrand is e^{-t}, but both factors underflow to
        # exact zero near t=745 and 0^q * 0^(1-q) is unresolvable there
        assert not rec.passed
        assert rec.verdict == "inconclusive"
        assert any("not certified" in n for n in rec.notes)

    def test_additive_expressions_are_not_overclaimed(self):
        # sums have no structural log form; once both values underflow the
        # combination is zeroed and convergence must not be certified
        rec = check_dominance(
            from_expression("exp(-3*t) + exp(-4*t)", pole_exp=0.0),
            from_expression("exp(-2*t) + exp(-3*t)", pole_exp=0.0),
            2.0,
        )
        assert not rec.passed
        assert rec.verdict == "inconclusive"
        assert any("not certified" in n for n in rec.notes)


class TestTubeScale:
    def test_decaying_radius_passes(self):
        assert check_tube_scale(exp_decay(1.0)).verdicts["F6"] == "pass"

    def test_constant_radius_passes(self):
        assert check_tube_scale(from_expression("0.5", pole_exp=0.0)).verdicts["F6"] == "pass"

    def test_negative_radius_fails_without_raising(self):
        rep = check_tube_scale(from_expression("1 - t", pole_exp=0.0))
        assert rep.verdicts["F6"] == "fail"
