import numpy as np

from pmpcheck.integrate import default_grid
from pmpcheck.needle import (
    PerturbedControl, build_family, lusin_concentrate,
    verify_estimate, verify_linearization,
)
from pmpcheck.problem import candidate_from_functions, parse_problem

SQRT2 = np.sqrt(2.0)

# --- family geometry ---
fam = build_family(0.0, 1.0, 2, 4)
print("h", fam.h, "slot", fam.slot)
print("M1(0.25) intervals:\n", fam.intervals(0, 0.25))
print("M2(0.25) intervals:\n", fam.intervals(1, 0.25))
print("|M1(0.25)| =", fam.measure(0, 0.25))
print("|M1(0)| =", fam.measure(0, 0.0))
print("|M1(0.5)|+|M2(0.5)| =", fam.measure(0, 0.5) + fam.measure(1, 0.5))

# nesting / disjointness over random draws
rng = np.random.default_rng(0)
bad = 0
for _ in range(1000):
    i, k = rng.integers(0, 2, size=2)
    a, ap = rng.uniform(0, 0.5, size=2)
    if i == k:
        lo, hi = min(a, ap), max(a, ap)
        small, big = fam.intervals(i, lo), fam.intervals(i, hi)
        ok = np.all(small[:, 0] >= big[:, 0]) and np.all(small[:, 1] <= big[:, 1])
        bad += 0 if ok else 1
    else:
        iva, ivb = fam.intervals(i, a), fam.intervals(k, ap)
        # pairwise overlap length
        lo = np.maximum(iva[:, None, 0], ivb[None, :, 0])
        hi = np.minimum(iva[:, None, 1], ivb[None, :, 1])
        overlap = np.maximum(0.0, hi - lo).max()
        bad += 0 if overlap == 0.0 else 1
print("nesting/disjointness violations:", bad)

# measure identity across sizes
worst = 0.0
for (m, N) in [(1, 7), (2, 64), (3, 33), (5, 200)]:
    f = build_family(0.3, 17.7, m, N)
    for a in np.linspace(0, 1.0 / m, 11):
        for i in range(m):
            err = abs(f.measure(i, a) - a * (17.7 - 0.3)) / max(a * 17.4, 1e-30)
            worst = max(worst, err)
print("measure identity worst rel err:", worst)

# --- estimate records ---
f64 = build_family(0.0, 1.0, 1, 64)
r = verify_estimate(f64, lambda t: np.ones_like(t), 0.6, 0.2, delta=1.0 / 64)
print("y=1 N=64: delta_emp", r.delta_emp, "bound h =", 1 / 64, "pass", r.passed)
r2 = verify_estimate(f64, lambda t: t, 0.6, 0.2, delta=0.05)
print("y=t N=64: delta_emp", r2.delta_emp, "pass", r2.passed, "t_worst", r2.t_worst)
f128 = build_family(0.0, 1.0, 1, 128)
r3 = verify_estimate(f128, lambda t: t, 0.6, 0.2, delta=0.05)
print("y=t N=128: delta_emp", r3.delta_emp, "ratio", r2.delta_emp / r3.delta_emp)
f256 = build_family(0.0, 1.0, 1, 256)
r4 = verify_estimate(f256, lambda t: t, 0.6, 0.2, delta=0.05)
print("y=t N=256: delta_emp", r4.delta_emp, "ratio", r3.delta_emp / r4.delta_emp)
rs = verify_estimate(f64, lambda t: np.sin(t), 0.6, 0.2, delta=0.05)
print("y=sin N=64: delta_emp", rs.delta_emp)
req = verify_estimate(f64, lambda t: t, 0.37, 0.37, delta=0.0)
print("alpha=alpha': delta_emp", req.delta_emp, "pass", req.passed, req.notes)

# two-member with per-member y
f2 = build_family(0.0, 2.0, 2, 32)
rm = verify_estimate(f2, [lambda t: t, lambda t: np.cos(t)], 0.4, 0.1, delta=0.2)
print("two-member: per_member", rm.per_member, "delta_emp", rm.delta_emp)

# --- linearization on the regulator ---
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
nu = exp_decay 4.5
"""
prob = parse_problem(REG)
grid = default_grid(50.0, cells=2048, refine_zero=False)
cand = candidate_from_functions(
    grid, lambda t: 2.0 * np.exp((1 - SQRT2) * np.asarray(t)),
    lambda t: -2.0 * (1 + SQRT2) * np.exp((1 - SQRT2) * np.asarray(t)))

for N in (64, 128):
    famN = build_family(0.0, 1.0, 1, N)
    rec = verify_linearization(prob, cand, famN, [lambda t: np.zeros(np.shape(t))],
                               alpha=0.1, delta=0.05)
    print(f"linearization N={N}: alphas", rec.alphas)
    print("  errors", rec.errors)
    print("  ratios", rec.ratios)
    print("  quad", rec.quad_coeff, "lin", rec.linear_coeff,
          "fitres", rec.fit_residual, "pass", rec.passed, rec.notes)

# trivial donor = u*
rec0 = verify_linearization(prob, cand, build_family(0.0, 1.0, 1, 64),
                            [cand.control], alpha=0.1, delta=0.05)
print("donor=u*: errors", rec0.errors, "pass", rec0.passed)

# feasibility of the perturbed control + disjoint overwrite sanity
famp = build_family(0.0, 1.0, 2, 16)
pc = PerturbedControl(family=famp, base=cand.control,
                      donors=(lambda t: np.zeros(np.shape(t)),
                              lambda t: np.ones(np.shape(t))),
                      alphas=np.array([0.2, 0.3]))
ts = np.linspace(0, 1, 2001)
vals = pc(ts)
m0 = famp.contains(0, 0.2, ts)
m1 = famp.contains(1, 0.3, ts)
print("masks overlap:", np.any(m0 & m1))
print("donor0 region ok:", np.allclose(vals[m0, 0], 0.0))
print("donor1 region ok:", np.allclose(vals[m1, 0], 1.0))
base_ok = np.allclose(vals[~(m0 | m1), 0], cand.control(ts[~(m0 | m1)])[:, 0])
print("base region ok:", base_ok)
print("scalar call:", pc(0.5), "shape", pc(0.5).shape)

# --- lusin ---
wb = lambda t: 0.5 * t ** -0.5 * np.exp(-np.sqrt(t))
g = default_grid(50.0, cells=512)
print("first knots:", g[:4])
with np.errstate(divide="ignore", invalid="ignore"):
    vals = wb(g)
vals = np.where(g == 0.0, np.inf, vals)
ls = lusin_concentrate(g, vals, epsilon=0.01)
print("lusin: keep[0]", ls.keep[0], "kept", int(ls.keep.sum()), "of", g.size)
print("excluded_mass", ls.excluded_mass, "sup_on_k", ls.sup_on_k)
t_first = g[np.flatnonzero(ls.keep)[0]]
print("t_first kept", t_first, "cdf F(t_first)", 1 - np.exp(-np.sqrt(t_first)))
print("intervals", ls.intervals()[:3], "n_intervals", ls.intervals().shape)
print("notes", ls.notes)

# bounded integrand
ls2 = lusin_concentrate(g, np.exp(-g), epsilon=0.5)
print("bounded: excluded", ls2.excluded_mass, "all kept", bool(ls2.keep.all()), ls2.notes)

# epsilon larger than total mass, still fine
ls3 = lusin_concentrate(g, vals, epsilon=100.0)
print("huge eps: excluded", ls3.excluded_mass)

# mid-grid spike
vv = np.exp(-g).copy()
vv[100] = np.inf
ls4 = lusin_concentrate(g, vv, epsilon=0.5)
print("spike: kept", int(ls4.keep.sum()), "intervals", ls4.intervals().shape[0],
      "excluded", ls4.excluded_mass)

# cannot concentrate
try:
    lusin_concentrate(g, vals, epsilon=1e-12)
    print("FAIL: no raise")
except Exception as e:
    print("CannotConcentrate:", type(e).__name__, e)

# csv sanity
print(fam.to_csv([0.25, 0.25]).splitlines()[:3])
print(ls.to_csv().splitlines()[:2])
