"""Problem parsing, candidate processes, and the assumption audits."""

import numpy as np
import pytest

from pmpcheck.expressions import DomainError
from pmpcheck.integrate import InvalidGrid, solve_state
from pmpcheck.problem import (
    ActiveSet,
    CandidateProcess,
    ControlBox,
    DimensionMismatch,
    EmptyTube,
    InfeasibleState,
    ProblemSyntaxError,
    UnknownIdentifier,
    active_indices,
    audit_assumptions,
    candidate_from_functions,
    check_objective_gradient,
    dynamics_residual,
    parse_problem,
    slater_check,
)

REGULATOR = """
[problem]
n = 1
m = 1
x0 = 2.0
sense = min
p = 2

[dynamics]
phi1 = u1

[objective]
f = x1^2 + u1^2
omega = exp_decay 1.0

[space]
nu = exp_decay 1.0
"""

# the candidate minimizer of the regulator: feedback u = -(1+sqrt2-1) x
# integrates to x(t) = 2 exp((1-sqrt2) t)
_RATE = 1.0 - np.sqrt(2.0)


def regulator_candidate(t_max=50.0, points=1001):
    grid = np.linspace(0.0, t_max, points)
    return candidate_from_functions(
        grid,
        lambda t: 2.0 * np.exp(_RATE * t),
        lambda t: 2.0 * _RATE * np.exp(_RATE * t),
    )


class TestControlBox:
    def test_containment_respects_open_and_closed_ends(self):
        box = ControlBox([0.0], [1.0], [False], [True])
        assert box.contains([0.0])
        assert box.contains([0.999999])
        assert not box.contains([1.0])
        assert box.contains([-1e-12], tol=1e-8)  # closed end gets slack
        assert not box.contains([1.0], tol=1e-8)  # open end never does

    def test_projection_stays_strictly_inside_open_ends(self):
        box = ControlBox([0.0], [1.0], [False], [True])
        u = box.project([5.0])
        assert box.contains(u)
        assert u[0] < 1.0
        np.testing.assert_allclose(box.project([-3.0]), [0.0])

    def test_corners_enumerate_the_bounded_box(self):
        box = ControlBox([0.0, -1.0], [1.0, 2.0], [False, False], [False, False])
        corners = box.corners()
        assert corners.shape == (4, 2)
        expected = {(0.0, -1.0), (0.0, 2.0), (1.0, -1.0), (1.0, 2.0)}
        assert {tuple(c) for c in corners} == expected

    def test_corners_refuse_an_unbounded_box(self):
        with pytest.raises(ValueError, match="bounded"):
            ControlBox.unbounded(1).corners()

    def test_empty_boxes_are_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            ControlBox([1.0], [0.0], [False], [False])
        with pytest.raises(ValueError, match="empty"):
            ControlBox([2.0], [2.0], [False], [True])
        # a degenerate closed point is legitimate
        assert ControlBox([2.0], [2.0], [False], [False]).contains([2.0])


class TestParse:
    def test_regulator_roundtrip(self):
        prob = parse_problem(REGULATOR)
        assert (prob.n, prob.m, prob.l) == (1, 1, 0)
        np.testing.assert_allclose(prob.x0, [2.0])
        assert prob.p_exp == 2.0
        assert not prob.negated
        assert str(prob.f_x[0]) == "2.0 * x1"
        assert str(prob.f_u[0]) == "2.0 * u1"
        # dynamics jacobian of phi = u is identically zero
        np.testing.assert_allclose(prob.phi_jac_x(0.3, np.array([2.0]), np.array([0.1])),
                                   [[0.0]])
        assert not prob.U.bounded

    def test_maximisation_is_negated_at_parse(self):
        src = REGULATOR.replace("sense = min", "sense = max")
        prob = parse_problem(src)
        assert prob.negated
        assert prob.f_value(0.0, np.array([2.0]), np.array([1.0])) == -5.0

    def test_comments_and_blank_lines_are_ignored(self):
        src = "# header\n" + REGULATOR.replace("f = x1^2 + u1^2",
                                               "f = x1^2 + u1^2  # running cost")
        prob = parse_problem(src)
        assert prob.f_value(0.0, np.array([1.0]), np.array([1.0])) == 2.0

    def test_controls_and_constraints_sections(self):
        src = REGULATOR + """
[controls]
u1 = [0, 1)
convex = true

[constraints]
g1 = x1 - 2
"""
        prob = parse_problem(src)
        assert prob.U.contains([0.0]) and not prob.U.contains([1.0])
        assert prob.l == 1
        np.testing.assert_allclose(prob.g_value(0.0, np.array([2.0])), [0.0])
        np.testing.assert_allclose(prob.g_jac_x(0.0, np.array([2.0])), [[1.0]])

    def test_expression_weight_with_tail_and_pole(self):
        src = REGULATOR.replace(
            "omega = exp_decay 1.0",
            "omega = expr((1 + t)^-3) tail 0.5 * (1 + t)^-2 pole 0",
        )
        prob = parse_problem(src)
        np.testing.assert_allclose(prob.omega(1.0), 0.125)
        # declared tail matches the analytic remainder of (1+t)^-3
        np.testing.assert_allclose(prob.omega.tail_bound(9.0), 0.005)
        assert prob.omega.pole_exp == 0.0

    def test_unknown_section_reports_the_line(self):
        with pytest.raises(ProblemSyntaxError, match="line 2"):
            parse_problem("# intro\n[wrong]\n")

    def test_content_before_any_section(self):
        with pytest.raises(ProblemSyntaxError, match="before any"):
            parse_problem("n = 1\n")

    def test_duplicate_key(self):
        src = REGULATOR.replace("n = 1", "n = 1\nn = 2")
        with pytest.raises(ProblemSyntaxError, match="duplicate"):
            parse_problem(src)

    def test_missing_dynamics_component(self):
        src = REGULATOR.replace("n = 1", "n = 2").replace("x0 = 2.0", "x0 = 2.0 0.0")
        with pytest.raises(ProblemSyntaxError, match="phi2"):
            parse_problem(src)

    def test_initial_state_length_mismatch(self):
        src = REGULATOR.replace("x0 = 2.0", "x0 = 2.0, 1.0")
        with pytest.raises(DimensionMismatch):
            parse_problem(src)

    def test_control_variable_in_constraint(self):
        src = REGULATOR + "\n[constraints]\ng1 = x1 - u1\n"
        with pytest.raises(UnknownIdentifier, match="u1"):
            parse_problem(src)

    def test_undeclared_state_in_dynamics(self):
        src = REGULATOR.replace("phi1 = u1", "phi1 = u1 + x2")
        with pytest.raises(UnknownIdentifier, match="x2"):
            parse_problem(src)

    def test_empty_control_interval(self):
        src = REGULATOR + "\n[controls]\nu1 = [1, 1)\n"
        with pytest.raises(ProblemSyntaxError, match="empty"):
            parse_problem(src)

    def test_expression_error_carries_position(self):
        src = REGULATOR.replace("f = x1^2 + u1^2", "f = x1^2 + (u1")
        with pytest.raises(ProblemSyntaxError) as err:
            parse_problem(src)
        assert err.value.line == 13
        assert err.value.column is not None

    def test_constraints_must_be_consecutive(self):
        src = REGULATOR + "\n[constraints]\ng1 = x1 - 2\ng3 = x1 - 5\n"
        with pytest.raises(ProblemSyntaxError, match="consecutive"):
            parse_problem(src)

    def test_unknown_weight_family(self):
        src = REGULATOR.replace("omega = exp_decay 1.0", "omega = gamma 1.0")
        with pytest.raises(ProblemSyntaxError, match="weight literal"):
            parse_problem(src)

    def test_weight_expression_may_not_use_state(self):
        src = REGULATOR.replace("omega = exp_decay 1.0", "omega = expr(x1)")
        with pytest.raises(ProblemSyntaxError, match="weight expression"):
            parse_problem(src)


class TestCandidate:
    def test_closed_forms_bypass_interpolation(self):
        cand = regulator_candidate(points=41)  # deliberately coarse
        t = np.pi
        np.testing.assert_allclose(cand.state(t), [2.0 * np.exp(_RATE * t)],
                                   rtol=1e-12)

    def test_step_control_is_left_continuous(self):
        grid = np.array([0.0, 1.0, 2.0])
        u = np.array([[10.0], [20.0], [30.0]])
        cand = CandidateProcess(grid=grid, x=np.zeros((3, 1)), u=u)
        np.testing.assert_allclose(cand.control(0.5), [20.0])  # right knot owns cell
        np.testing.assert_allclose(cand.control(1.0), [20.0])
        np.testing.assert_allclose(cand.control(1.0 + 1e-12), [30.0])
        np.testing.assert_allclose(cand.control(np.array([0.0, 2.5])),
                                   [[10.0], [30.0]])

    def test_shape_mismatches_raise(self):
        grid = np.linspace(0.0, 1.0, 5)
        with pytest.raises(DimensionMismatch):
            CandidateProcess(grid=grid, x=np.zeros((4, 1)), u=np.zeros((5, 1)))
        with pytest.raises(InvalidGrid):
            CandidateProcess(grid=grid[::-1], x=np.zeros((5, 1)), u=np.zeros((5, 1)))

    def test_solve_state_output_plugs_into_the_audit(self):
        prob = parse_problem(REGULATOR)
        cand = solve_state(prob, lambda t: 2.0 * _RATE * np.exp(_RATE * t), t_max=50.0)
        assert isinstance(cand, CandidateProcess)
        # the integrated state should track the closed form
        np.testing.assert_allclose(
            cand.x[:, 0], 2.0 * np.exp(_RATE * cand.grid), rtol=1e-7, atol=1e-9
        )
        rep = audit_assumptions(prob, cand, gamma=0.5)
        assert rep.all_ok


class TestDynamicsResidual:
    def test_exact_candidate_has_negligible_residual(self):
        prob = parse_problem(REGULATOR)
        res = dynamics_residual(prob, regulator_candidate())
        assert res.max() < 1e-12

    def test_wrong_candidate_is_flagged(self):
        prob = parse_problem(REGULATOR)
        grid = np.linspace(0.0, 50.0, 1001)
        cand = candidate_from_functions(
            grid, lambda t: 2.0 * np.exp(-2.0 * t),
            lambda t: 2.0 * _RATE * np.exp(_RATE * t),
        )
        assert dynamics_residual(prob, cand).max() > 1e-3


DOMAIN_HOLE = """
[problem]
n = 1
m = 1
x0 = 1.0
[dynamics]
phi1 = -x1 + 0*u1
[objective]
f = ln(x1) + 0*u1
omega = power 2
[space]
nu = power 2
"""


class TestAudit:
    def test_regulator_passes_in_the_uniform_mode(self):
        prob = parse_problem(REGULATOR)
        rep = audit_assumptions(prob, regulator_candidate(), gamma=0.5)
        assert rep.verdicts == {
            "A0": "pass", "A1": "no counterexample", "A2": "pass", "A3": "vacuous",
        }
        assert rep.all_ok
        assert rep.L_verdict == "finite"
        assert rep.K_estimate == pytest.approx(1.0, rel=1e-6)
        # phi = u: the growth ratio |u*| / (1 + |x|) is largest near t = 0
        assert 0.0 < rep.C0 < 1.0
        assert np.all(np.isfinite(rep.L_values))

    def test_audit_is_deterministic(self):
        prob = parse_problem(REGULATOR)
        cand = regulator_candidate()
        r1 = audit_assumptions(prob, cand, gamma=0.5)
        r2 = audit_assumptions(prob, cand, gamma=0.5)
        assert r1.verdicts == r2.verdicts
        np.testing.assert_array_equal(r1.L_values, r2.L_values)
        assert r1.C0 == r2.C0

    def test_log_cost_fails_when_the_tube_leaves_the_domain(self):
        prob = parse_problem(DOMAIN_HOLE)
        grid = np.linspace(0.0, 50.0, 1001)
        cand = candidate_from_functions(grid, lambda t: np.exp(-t), lambda t: 0.0 * t)
        rep = audit_assumptions(prob, cand, gamma=0.1)
        assert rep.verdicts["A2"] == "fail"
        assert not rep.all_ok
        # witness sits where exp(-t) - 0.1 crosses zero, near t = ln 10
        t_w, x_w, _ = rep.witnesses["A2"]
        assert t_w == pytest.approx(np.log(10.0), abs=0.3)
        assert x_w[0] <= 1e-3
        assert any("left its domain" in note for note in rep.notes)
        assert not np.all(np.isfinite(rep.L_values))

    def test_domain_failures_are_monotone_in_the_tube_radius(self):
        src = REGULATOR.replace("f = x1^2 + u1^2", "f = sqrt(2 - x1) + u1^2")
        src = src.replace("x0 = 2.0", "x0 = 1.0")
        prob = parse_problem(src)
        grid = np.linspace(0.0, 50.0, 1001)
        cand = candidate_from_functions(grid, lambda t: np.exp(-t),
                                        lambda t: -np.exp(-t))
        verdicts = [audit_assumptions(prob, cand, gamma=g).verdicts["A2"]
                    for g in (0.25, 0.5, 0.9, 1.5)]
        assert verdicts == ["pass", "pass", "pass", "fail"]

    def test_candidate_control_outside_the_box_fails_the_base_verdict(self):
        src = REGULATOR + "\n[controls]\nu1 = [0, 1]\n"
        prob = parse_problem(src)
        rep = audit_assumptions(prob, regulator_candidate(), gamma=0.5)
        assert rep.verdicts["A0"] == "fail"  # u* is negative throughout
        t_w, _, u_w = rep.witnesses["A0"]
        assert t_w == 0.0
        assert u_w[0] < 0.0

    def test_initial_state_mismatch_fails_the_base_verdict(self):
        prob = parse_problem(REGULATOR)
        grid = np.linspace(0.0, 50.0, 1001)
        cand = candidate_from_functions(
            grid, lambda t: 3.0 * np.exp(_RATE * t),
            lambda t: 3.0 * _RATE * np.exp(_RATE * t),
        )
        rep = audit_assumptions(prob, cand, gamma=0.5)
        assert rep.verdicts["A0"] == "fail"
        assert any("initial state" in note for note in rep.notes)

    def test_space_exponent_needs_a_conjugate(self):
        prob = parse_problem(REGULATOR.replace("p = 2", "p = 1"))
        rep = audit_assumptions(prob, regulator_candidate(), gamma=0.5)
        assert rep.verdicts["A0"] == "fail"
        assert any("conjugate" in note for note in rep.notes)

    def test_non_integrable_distribution_fails_the_base_verdict(self):
        prob = parse_problem(
            REGULATOR.replace("omega = exp_decay 1.0", "omega = expr(1) pole 0")
        )
        rep = audit_assumptions(prob, regulator_candidate(), gamma=0.5)
        assert rep.verdicts["A0"] == "fail"

    def test_weak_mode_uses_its_own_verdict_keys(self):
        src = REGULATOR.replace("nu = exp_decay 1.0",
                                "nu = exp_decay 1.0\neta = exp_decay 0.1")
        prob = parse_problem(src)
        rep = audit_assumptions(prob, regulator_candidate(), gamma=0.5, mode="weak")
        assert set(rep.verdicts) == {"B0", "B1", "B2"}
        assert rep.all_ok
        assert rep.mode == "weak"

    def test_weak_mode_clips_control_samples_into_a_half_open_box(self):
        src = """
[problem]
n = 1
m = 1
x0 = 1.0
[dynamics]
phi1 = -x1 * u1
[objective]
f = x1 / (1 - u1)
omega = exp_decay 1.0
[space]
nu = exp_decay 1.0
eta = exp_decay 0.5
[controls]
u1 = [0, 1)
"""
        prob = parse_problem(src)
        grid = np.linspace(0.0, 50.0, 1001)
        cand = candidate_from_functions(grid, lambda t: np.exp(-0.5 * t),
                                        lambda t: 0.5 + 0.0 * t)
        rep = audit_assumptions(prob, cand, gamma=0.4, mode="weak")
        # the cost has a pole at u = 1; clipping keeps every sample defined
        assert rep.verdicts["B2"] == "pass"
        assert rep.all_ok

    def test_weak_mode_requires_a_tube_scale(self):
        prob = parse_problem(REGULATOR)
        with pytest.raises(ValueError, match="eta"):
            audit_assumptions(prob, regulator_candidate(), gamma=0.5, mode="weak")

    def test_collapsed_tube_scale_raises(self):
        src = REGULATOR.replace("nu = exp_decay 1.0",
                                "nu = exp_decay 1.0\neta = exp_decay 20.0")
        prob = parse_problem(src)
        with pytest.raises(EmptyTube) as err:
            audit_assumptions(prob, regulator_candidate(), gamma=1.0, mode="weak")
        assert err.value.radius < 1e-12

    def test_parameter_validation(self):
        prob = parse_problem(REGULATOR)
        cand = regulator_candidate()
        with pytest.raises(ValueError, match="gamma"):
            audit_assumptions(prob, cand, gamma=0.0)
        with pytest.raises(ValueError, match="mode"):
            audit_assumptions(prob, cand, gamma=0.5, mode="both")
        with pytest.raises(ValueError, match="samples"):
            audit_assumptions(prob, cand, gamma=0.5, samples=1)

    def test_sign_jump_at_a_probed_point_fails_continuity(self):
        # sign() only exists as an internal node, so the jumpy integrand is
        # assembled directly; its surface x = 2 passes through the
        # candidate's start, which the probe always visits
        from pmpcheck.expressions import Call, Num, Sym, add, mul, powx, sub
        from pmpcheck.problem import ControlProblem
        from pmpcheck.weights import exp_decay

        x1, u1 = Sym("x1"), Sym("u1")
        f = add(add(powx(x1, Num(2.0)), powx(u1, Num(2.0))),
                Call("sign", (sub(x1, Num(2.0)),)))
        prob = ControlProblem(
            n=1, m=1, f=f, phi=(u1,), x0=np.array([2.0]),
            omega=exp_decay(1.0), nu=exp_decay(1.0),
        )
        rep = audit_assumptions(prob, regulator_candidate(), gamma=0.5)
        assert rep.verdicts["A1"] == "fail"
        t_w, x_w, _ = rep.witnesses["A1"]
        assert t_w == 0.0
        assert x_w[0] == pytest.approx(2.0)

    def test_constraint_data_is_audited_in_the_uniform_mode(self):
        src = REGULATOR + "\n[constraints]\ng1 = x1 - 2\n"
        prob = parse_problem(src)
        rep = audit_assumptions(prob, regulator_candidate(), gamma=0.5)
        assert rep.verdicts["A3"] == "pass"
        assert any("Lipschitz" in note for note in rep.notes)


class TestJacobians:
    """Symbolic derivatives must agree with central differences."""

    SRC = """
[problem]
n = 2
m = 1
x0 = 1.0 0.0
[dynamics]
phi1 = x2
phi2 = -sin(x1) - 0.1 * x2 + u1
[objective]
f = x1^2 + 0.5 * u1^2 + exp(-x2)
omega = exp_decay 1.0
[space]
nu = exp_decay 1.0
[constraints]
g1 = x1 * x2 - 5
"""

    def test_against_central_differences_at_random_tube_points(self):
        prob = parse_problem(self.SRC)
        rng = np.random.default_rng(42)
        h = 1e-6
        worst = 0.0
        for _ in range(100):
            t = float(rng.uniform(0.0, 20.0))
            x = rng.uniform(-2.0, 2.0, size=2)
            u = rng.uniform(-2.0, 2.0, size=1)

            jac = prob.phi_jac_x(t, x, u)
            grad = prob.f_grad_x(t, x, u)
            gjac = prob.g_jac_x(t, x)
            for i in range(2):
                e = np.zeros(2)
                e[i] = h
                fd_phi = (prob.phi_value(t, x + e, u) - prob.phi_value(t, x - e, u)) / (2 * h)
                fd_f = (prob.f_value(t, x + e, u) - prob.f_value(t, x - e, u)) / (2 * h)
                fd_g = (prob.g_value(t, x + e) - prob.g_value(t, x - e)) / (2 * h)
                worst = max(worst, np.max(np.abs(jac[:, i] - fd_phi) / (1 + np.abs(fd_phi))))
                worst = max(worst, abs(grad[i] - fd_f) / (1 + abs(fd_f)))
                worst = max(worst, np.max(np.abs(gjac[:, i] - fd_g) / (1 + np.abs(fd_g))))
            fd_u = (prob.phi_value(t, x, u + h) - prob.phi_value(t, x, u - h)) / (2 * h)
            ju = prob.phi_jac_u(t, x, u)
            worst = max(worst, np.max(np.abs(ju[:, 0] - fd_u) / (1 + np.abs(fd_u))))
            fdf_u = (prob.f_value(t, x, u + h) - prob.f_value(t, x, u - h)) / (2 * h)
            worst = max(worst, abs(prob.f_grad_u(t, x, u)[0] - fdf_u) / (1 + abs(fdf_u)))
        assert worst < 1e-6

    def test_batched_evaluation_matches_pointwise(self):
        prob = parse_problem(self.SRC)
        rng = np.random.default_rng(7)
        ts = rng.uniform(0.0, 10.0, size=17)
        xs = rng.uniform(-1.0, 1.0, size=(17, 2))
        us = rng.uniform(-1.0, 1.0, size=(17, 1))
        batch = prob.phi_jac_x(ts, xs, us)
        assert batch.shape == (17, 2, 2)
        for k in (0, 5, 16):
            np.testing.assert_allclose(
                batch[k], prob.phi_jac_x(ts[k], xs[k], us[k]), rtol=1e-14
            )


class TestActiveSetAndSeparation:
    SRC = REGULATOR + "\n[constraints]\ng1 = x1 - 2\ng2 = x1 - 5\n"

    def test_active_at_the_start_only(self):
        prob = parse_problem(self.SRC)
        act = active_indices(prob, regulator_candidate())
        assert act.I == (1,)
        np.testing.assert_allclose(act.times[1], [0.0])
        assert act.peak[1] == pytest.approx(0.0, abs=1e-12)
        assert act.peak[2] == pytest.approx(-3.0)

    def test_infeasible_candidate_raises_with_a_witness(self):
        src = REGULATOR + "\n[constraints]\ng1 = x1 - 1\n"
        prob = parse_problem(src)
        with pytest.raises(InfeasibleState) as err:
            active_indices(prob, regulator_candidate())
        assert err.value.j == 1
        assert err.value.t == 0.0
        assert err.value.value == pytest.approx(1.0)

    def test_no_constraints_means_empty_active_set(self):
        prob = parse_problem(REGULATOR)
        act = active_indices(prob, regulator_candidate())
        assert act.I == ()
        assert slater_check(prob, regulator_candidate(), act).passed

    def test_separation_witness_is_strictly_slack(self):
        prob = parse_problem(self.SRC)
        cand = regulator_candidate()
        act = active_indices(prob, cand)
        rep = slater_check(prob, cand, act)
        assert rep.verdicts == {1: "pass"}
        t_j, g_j = rep.witnesses[1]
        assert t_j > 0.0
        assert g_j < -1.0

    def test_identically_tight_constraint_fails_separation(self):
        src = REGULATOR + "\n[constraints]\ng1 = 0 * x1\n"
        prob = parse_problem(src)
        cand = regulator_candidate()
        act = active_indices(prob, cand)
        assert act.I == (1,)
        rep = slater_check(prob, cand, act)
        assert rep.verdicts == {1: "fail"}
        assert not rep.passed


class TestObjectiveGradient:
    def test_regulator_direction_derivative_is_finite_and_checked(self):
        prob = parse_problem(REGULATOR)
        diag = check_objective_gradient(prob, regulator_candidate(points=4001))
        assert diag.verdict == "finite"
        # d/dlambda of the cost along xi = 1: integral of 4 e^{-sqrt2 t} = 2 sqrt2
        assert diag.value == pytest.approx(2.0 * np.sqrt(2.0), rel=5e-4)
        assert diag.quotients
        # difference quotients tighten as the step shrinks
        gaps = [gap for _, _, gap in diag.quotients]
        assert gaps[-1] < 1e-4
        assert gaps == sorted(gaps, reverse=True)

    def test_flat_distribution_diverges(self):
        src = REGULATOR.replace("omega = exp_decay 1.0", "omega = expr(1) pole 0")
        src = src.replace("f = x1^2 + u1^2", "f = x1 + u1^2")
        prob = parse_problem(src)
        diag = check_objective_gradient(prob, regulator_candidate())
        assert diag.verdict == "divergent"
        assert diag.partials[2] > diag.partials[1] > diag.partials[0]
        assert not diag.quotients

    def test_log_cost_with_slow_weight_diverges(self):
        prob = parse_problem(DOMAIN_HOLE)
        grid = np.linspace(0.0, 50.0, 1001)
        cand = candidate_from_functions(grid, lambda t: np.exp(-t), lambda t: 0.0 * t)
        diag = check_objective_gradient(prob, cand)
        # f_x = 1/x grows like e^t against a polynomial weight
        assert diag.verdict == "divergent"

    def test_undefined_gradient_at_the_candidate(self):
        src = REGULATOR.replace("f = x1^2 + u1^2", "f = sqrt(x1) + u1^2")
        prob = parse_problem(src)
        grid = np.linspace(0.0, 50.0, 1001)
        cand = candidate_from_functions(grid, lambda t: 1.0 - t / 10.0,
                                        lambda t: -0.1 + 0.0 * t)
        diag = check_objective_gradient(prob, cand)
        assert diag.verdict == "undefined"
        assert np.isnan(diag.value)

    def test_direction_bound_is_enforced(self):
        prob = parse_problem(REGULATOR)
        with pytest.raises(ValueError, match="sup"):
            check_objective_gradient(prob, regulator_candidate(), direction=[2.0])

    def test_callable_direction(self):
        prob = parse_problem(REGULATOR)
        diag = check_objective_gradient(
            prob, regulator_candidate(points=4001),
            direction=lambda t: np.exp(-t),
        )
        assert diag.verdict == "finite"
        # integral of e^{-t} e^{-t} 4 e^{r t} dt with r = 1 - sqrt2
        expected = 4.0 / (1.0 + np.sqrt(2.0))
        assert diag.value == pytest.approx(expected, rel=5e-4)
