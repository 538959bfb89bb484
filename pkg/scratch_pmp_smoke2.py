import numpy as np

from pmpcheck import (
    AdjointSolution, AtomOffActiveSet, UnboundedAbove,
    adjoint_backward, adjoint_from_function, adjoint_representation,
    candidate_from_functions, check_adjoint_residual, check_integral_adjoint,
    check_maximum_condition, check_michel, check_normality,
    check_transversality, check_weak_inequality, parse_problem,
    pontryagin_H_u, verify_certificate,
)
from pmpcheck.integrate import default_grid

R2 = np.sqrt(2.0)

# ---- investment/consumption (log utility), rho = 1/2, x0 = 1
INVEST = """
[problem]
n = 1
m = 1
x0 = 1.0
sense = max
p = 2

[dynamics]
phi1 = u1 * x1

[objective]
f = ln((1 - u1) * x1)
omega = exp_decay 0.5

[space]
nu = exp_decay 0.5

[controls]
u1 = (-inf, 1)
"""

prob = parse_problem(INVEST)
grid = default_grid(50.0, cells=2048, refine_zero=False)
cand = candidate_from_functions(
    grid, lambda t: np.exp(0.5 * np.asarray(t)),
    lambda t: np.full(np.shape(t), 0.5))

bwd = adjoint_backward(prob, cand, lambda0=1.0, t_end=30.0)
print("8.2 backward p(0):", bwd.p[0, 0], "expected 2")
rep = adjoint_representation(prob, cand)
p_exact = 2.0 * np.exp(-rep.grid)
print("8.2 representation max rel err:",
      float(np.max(np.abs(rep.p[:, 0] - p_exact)) / 2.0))

adj = adjoint_from_function(grid, lambda t: 2.0 * np.exp(-np.asarray(t)))
mc = check_maximum_condition(prob, cand, adj)
print("8.2 max condition:", mc.verdict, mc.residual, mc.notes)
wk = check_weak_inequality(prob, cand, adj)
print("8.2 weak ineq:", wk.verdict, wk.residual)
pair, dec = check_transversality(prob, cand, adj)
print("8.2 pairing:", pair.verdict, "decay:", dec.verdict)
mi = check_michel(prob, cand, adj)
print("8.2 michel:", mi.verdict, mi.premise_ok)

# ---- no-discount pathology: J = int x dt, dx = -u x, u in [0.1, 1]
HALKIN = """
[problem]
n = 1
m = 1
x0 = 1.0
sense = min

[dynamics]
phi1 = -u1 * x1

[objective]
f = x1
omega = expr(1)

[space]
nu = exp_decay 1.0
eta = exp_decay 1.0

[controls]
u1 = [0.1, 1]
"""
h_prob = parse_problem(HALKIN)
h_cand = candidate_from_functions(
    grid, lambda t: np.exp(-np.asarray(t)),
    lambda t: np.full(np.shape(t), 1.0))
h_rep = adjoint_representation(h_prob, h_cand)
print("7.1 representation p(0):", h_rep.p[0, 0], "p(T/2):",
      float(np.interp(25.0, h_rep.grid, h_rep.p[:, 0])), "expected -1")
print("7.1 tail_error:", h_rep.tail_error)
h_mc = check_maximum_condition(h_prob, h_cand, h_rep)
print("7.1 max condition:", h_mc.verdict, h_mc.residual, h_mc.notes)
h_pair, h_dec = check_transversality(h_prob, h_cand, h_rep, mode="weak")
print("7.1 pairing:", h_pair.verdict, "decay:", h_dec.verdict,
      h_dec.witnesses)
h_wk = check_weak_inequality(h_prob, h_cand, h_rep)
print("7.1 weak ineq:", h_wk.verdict, h_wk.residual)
h_mi = check_michel(h_prob, h_cand, h_rep, mode="weak")
print("7.1 michel:", h_mi.verdict, h_mi.notes)

# flipped candidate control: u = 0.5 interior, not the maximizer
flip = candidate_from_functions(
    grid, lambda t: np.exp(-0.5 * np.asarray(t)),
    lambda t: np.full(np.shape(t), 0.5))
flip_adj = adjoint_from_function(grid, lambda t: -np.ones(np.shape(t)))
f_mc = check_maximum_condition(h_prob, flip, flip_adj)
print("7.1 flipped:", f_mc.verdict, f_mc.residual)

# ---- discounted log pathology 7.2
LOGPATH = """
[problem]
n = 1
m = 1
x0 = 1.0
sense = min

[dynamics]
phi1 = u1 - x1

[objective]
f = ln(x1)
omega = exp_decay 1.0

[space]
nu = exp_decay 1.0
eta = exp_decay 1.0

[controls]
u1 = [0, 1]
"""
l_prob = parse_problem(LOGPATH)
l_cand = candidate_from_functions(
    grid, lambda t: np.exp(-np.asarray(t)),
    lambda t: np.zeros(np.shape(t)))
l_rep = adjoint_representation(l_prob, l_cand)
print("7.2 representation p(0):", l_rep.p[0, 0], "expected -1")
l_cert = verify_certificate(l_prob, l_cand, mode="weak",
                            include_sufficiency=False)
print("7.2 certificate:", l_cert.overall)
print("7.2 audit:", l_cert.audit.verdicts)
print("7.2 decay:", l_cert.condition("transversality_decay").verdict)

# ---- Cournot/Gompertz game, player 1 with the opponent frozen
NASH = """
[problem]
n = 1
m = 1
x0 = 1.0
sense = max

[dynamics]
phi1 = x1*(1 - ln(x1)) - u1*x1 - 0.25*x1

[objective]
f = u1/(u1 + 0.25) - u1
omega = weibull 0.5

[space]
nu = exp_decay 1.0

[controls]
u1 = [0, inf)
"""
n_prob = parse_problem(NASH)
n_grid = default_grid(50.0, cells=2048)  # refined near 0 for the pole
n_cand = candidate_from_functions(
    n_grid, lambda t: np.exp(0.5 * (1.0 - np.exp(-np.asarray(t)))),
    lambda t: np.full(np.shape(t), 0.25))
n_rep = adjoint_representation(n_prob, n_cand)
print("8.4 representation sup|p|:", n_rep.sup_norm, "(expect ~0)")
n_bwd = adjoint_backward(n_prob, n_cand)
print("8.4 backward sup|p|:", n_bwd.sup_norm)
n_mc = check_maximum_condition(n_prob, n_cand, n_rep)
print("8.4 max condition:", n_mc.verdict, n_mc.residual, n_mc.notes)
n_res = check_adjoint_residual(n_prob, n_cand, n_rep)
print("8.4 adjoint residual:", n_res.verdict, n_res.residual)
n_cert = verify_certificate(n_prob, n_cand, include_sufficiency=False)
print("8.4 certificate:", n_cert.overall, n_cert.notes)
for c in n_cert.conditions:
    print("   ", c.name, c.verdict)

# ---- atoms on the integral form: regulator with active g = x - 2 at t=0
REGC = """
[problem]
n = 1
m = 1
x0 = 2.0
sense = min

[dynamics]
phi1 = 2*x1 + u1

[objective]
f = 0.5*(x1^2 + u1^2)
omega = exp_decay 2.0

[space]
nu = exp_decay 4.5

[constraints]
g1 = x1 - 2
"""
c_prob = parse_problem(REGC)
c_cand = candidate_from_functions(
    grid, lambda t: 2.0 * np.exp((1 - R2) * np.asarray(t)),
    lambda t: -2.0 * (1 + R2) * np.exp((1 - R2) * np.asarray(t)))
mass = 0.3
# p satisfying the atom-corrected integral relation: the plain closed form
# plus the atom term nu(0)*g_x*mass for t <= 0
p_plain = lambda t: -2.0 * (1 + R2) * np.exp(-(1 + R2) * np.asarray(t))


def p_with_atom(t):
    t = np.asarray(t, dtype=float)
    return p_plain(t) - np.where(t <= 0.0, mass, 0.0)


# nu(0) = 1, g_x = 1, so the jump is exactly `mass` at t=0
adj_atom = adjoint_from_function(grid, p_with_atom,
                                 measures={1: ((0.0, mass),)})
ia = check_integral_adjoint(c_prob, c_cand, adj_atom)
print("atom correct mass:", ia.verdict, ia.residual)
adj_bad = adjoint_from_function(grid, p_with_atom,
                                measures={1: ((0.0, 2 * mass),)})
ia_bad = check_integral_adjoint(c_prob, c_cand, adj_bad)
print("atom wrong mass:", ia_bad.verdict, ia_bad.residual)
try:
    adj_off = adjoint_from_function(grid, p_plain, measures={1: ((1.0, 0.1),)})
    check_integral_adjoint(c_prob, c_cand, adj_off)
    print("atom off active set: NOT RAISED (bug)")
except AtomOffActiveSet as e:
    print("atom off active set raised:", e)
try:
    AdjointSolution(grid=grid, p=np.zeros((grid.size, 1)), lambda0=1.0,
                    route="user", measures={1: ((0.0, -0.1),)})
    print("negative mass: NOT RAISED (bug)")
except AtomOffActiveSet as e:
    print("negative mass raised:", e)

# ---- unbounded detection: lambda0 = 0 with constant p on unbounded U
u_prob = parse_problem(REGC.replace("[constraints]\ng1 = x1 - 2", ""))
u_adj = adjoint_from_function(grid, lambda t: np.ones(np.shape(t)), lambda0=0.0)
try:
    check_maximum_condition(u_prob, c_cand, u_adj)
    print("unbounded: NOT RAISED (bug)")
except UnboundedAbove as e:
    print("unbounded raised:", e)

# ---- H_u finite differences at scattered points (draws stay inside the
# data's domain: the log problem needs u < 1 with room for the step)
from pmpcheck import pontryagin_H
rng = np.random.default_rng(7)
cases = [(u_prob, (-2.0, 2.0)), (prob, (-1.5, 0.9))]
ok = True
for fd_prob, (u_lo, u_hi) in cases:
    for _ in range(100):
        t = float(rng.uniform(0, 10))
        x = rng.uniform(0.5, 3.0, size=1)
        u = rng.uniform(u_lo, u_hi, size=1)
        p = rng.uniform(-3.0, 3.0, size=1)
        hu = pontryagin_H_u(fd_prob, t, x, u, p, 1.0)
        h = 1e-6 * (1 + abs(u[0]))
        hp = pontryagin_H(fd_prob, t, x, u + h, p, 1.0)
        hm = pontryagin_H(fd_prob, t, x, u - h, p, 1.0)
        fd = (hp - hm) / (2 * h)
        if abs(hu[0] - fd) > 1e-6 * (1 + abs(fd)):
            ok = False
            print("H_u FD mismatch:", t, x, u, hu[0], fd)
print("H_u FD 200 points:", "ok" if ok else "FAILED")

# ---- scaling invariance of the gap series
reg_adj = adjoint_from_function(grid, p_plain)
g1 = check_maximum_condition(u_prob, c_cand, reg_adj)
reg_scaled = AdjointSolution(grid=grid, p=3.0 * reg_adj.p, lambda0=3.0,
                             route="user")
g3 = check_maximum_condition(u_prob, c_cand, reg_scaled)
sc = np.max(np.abs(g3.series - 3.0 * g1.series))
print("gap scaling |g3 - 3*g1| sup:", float(sc))
