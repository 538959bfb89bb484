import numpy as np

from pmpcheck import (
    adjoint_backward, adjoint_from_function, adjoint_representation,
    candidate_from_functions, check_adjoint_residual, check_integral_adjoint,
    check_maximum_condition, check_michel, check_normality,
    check_transversality, check_weak_inequality, parse_problem, pontryagin_H,
    verify_certificate,
)
from pmpcheck.integrate import default_grid

R2 = np.sqrt(2.0)

REG = """
[problem]
n = 1
m = 1
x0 = 2.0
sense = min
p = 2

[dynamics]
phi1 = 2*x1 + u1

[objective]
f = 0.5*(x1^2 + u1^2)
omega = exp_decay 2.0

[space]
nu = exp_decay {a}
"""


def regulator(a=4.5):
    return parse_problem(REG.format(a=a))


def reg_candidate(grid):
    x = lambda t: 2.0 * np.exp((1 - R2) * np.asarray(t))
    u = lambda t: -2.0 * (1 + R2) * np.exp((1 - R2) * np.asarray(t))
    return candidate_from_functions(grid, x, u)


p_exact = lambda t: -2.0 * (1 + R2) * np.exp(-(1 + R2) * np.asarray(t))

grid = default_grid(50.0, cells=2048, refine_zero=False)
prob = regulator()
cand = reg_candidate(grid)

H0 = pontryagin_H(prob, 0.0, np.array([2.0]), np.array([-2 * (1 + R2)]),
                  np.array([-2 * (1 + R2)]), 1.0)
print("H(0) =", H0, "expected", -4 - 4 * R2)

rep = adjoint_representation(prob, cand)
err = np.abs(rep.p[:, 0] - p_exact(rep.grid)) / np.max(np.abs(p_exact(rep.grid)))
print("representation rel err:", float(np.max(err)), "tail_error:", rep.tail_error)

bwd = adjoint_backward(prob, cand, lambda0=1.0, t_end=30.0)
print("backward p(0):", bwd.p[0, 0], "exact:", p_exact(0.0),
      "difference:", abs(bwd.p[0, 0] - p_exact(0.0)),
      "terminal_error est:", bwd.terminal_error)

adj = adjoint_from_function(grid, p_exact)
r1 = check_adjoint_residual(prob, cand, adj)
print("adjoint residual:", r1.verdict, r1.residual)
r2 = check_integral_adjoint(prob, cand, adj)
print("integral adjoint:", r2.verdict, r2.residual)

bad = adjoint_from_function(grid, lambda t: p_exact(t) + 0.01)
r3 = check_adjoint_residual(prob, cand, bad)
print("perturbed residual:", r3.verdict, r3.residual,
      "expected approx", 0.02 / adj.sup_norm)

m1 = check_maximum_condition(prob, cand, adj)
print("max condition:", m1.verdict, m1.residual, m1.notes)

w1 = check_weak_inequality(prob, cand, adj)
print("weak ineq:", w1.verdict, w1.residual)

pair, dec = check_transversality(prob, cand, adj)
print("pairing:", pair.verdict, "decay:", dec.verdict, dec.notes)
prob5 = regulator(5.0)
pair5, dec5 = check_transversality(prob5, cand, adj)
print("a=5 pairing:", pair5.verdict, "decay:", dec5.verdict)

mi = check_michel(prob, cand, adj)
print("michel a=4.5:", mi.verdict, mi.premise_ok, mi.notes)
prob39 = regulator(3.9)
mi39 = check_michel(prob39, cand, adj)
print("michel a=3.9:", mi39.verdict, mi39.premise_ok)

nr = check_normality(prob, cand)
print("normality:", nr.verdict, nr.notes)

import time
t0 = time.time()
rep_report = verify_certificate(prob, cand, include_sufficiency=False)
t1 = time.time()
print("certificate:", rep_report.overall, "route agreement:",
      rep_report.route_agreement, f"({t1 - t0:.1f}s)")
for c in rep_report.conditions:
    print("  ", c.name, c.verdict, c.residual)
print("notes:", rep_report.notes)
