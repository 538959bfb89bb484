"""Quadrature and ODE machinery on the half line.

Everything downstream needs three capabilities, all provided here:

* improper integrals over [0, inf) with an explicit truncation policy:
  cell-wise 7-point Gauss-Legendre sums over a grid that packs
  geometrically shrinking cells toward t = 0 (so integrable endpoint
  singularities are never evaluated at the endpoint itself), a decade
  ladder of partial integrals that makes divergence visible, and an
  optional analytic tail bound that settles integrability outright;

* an explicit adaptive Dormand-Prince 5(4) one-step integrator that never
  steps across a grid knot (controls are allowed to jump there), plus a
  fixed-substep mode used by convergence-order tests;

* weighted norms ``(int |x|^p nu dt)^(1/p)`` and the corresponding
  Hoelder pairing check.

Decisions at infinity are made by documented finite criteria (decade
ladders, three-window decay tests), never by a symbolic limit engine, and
every verdict carries the numbers it was based on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "BlowUp",
    "InvalidGrid",
    "MissingTailBound",
    "IntegralResult",
    "LadderRecord",
    "DecayRecord",
    "TruncationRecord",
    "NormResult",
    "HolderRecord",
    "FundamentalMatrix",
    "default_grid",
    "improper_integral",
    "improper_verdict",
    "decays_to_zero",
    "tail_truncation",
    "solve_ode",
    "solve_state",
    "fundamental_matrix",
    "weighted_norm",
    "w1_norm",
    "holder_pairing_check",
]


class InvalidGrid(ValueError):
    """Grid is not strictly increasing from 0, or too short."""


class BlowUp(RuntimeError):
    """State norm exceeded the configured bound during integration."""

    def __init__(self, t: float, norm: float, bound: float):
        self.t = float(t)
        self.norm = float(norm)
        self.bound = float(bound)
        super().__init__(f"solution norm {norm:.3g} exceeded {bound:.3g} at t={t:.6g}")


class MissingTailBound(ValueError):
    """No analytic tail bound and the numeric tail estimate does not stabilize."""


def _check_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise InvalidGrid("grid must be a 1-d array with at least two points")
    if grid[0] != 0.0:
        raise InvalidGrid(f"grid must start at 0, got {grid[0]!r}")
    if not np.all(np.diff(grid) > 0):
        raise InvalidGrid("grid must be strictly increasing")
    return grid


def default_grid(
    t_max: float,
    cells: int = 4096,
    refine_zero: bool = True,
    t_min: float = 1e-12,
) -> np.ndarray:
    """Build the standard grid on [0, t_max].

    With ``refine_zero`` the grid starts with geometrically growing cells
    from ``t_min`` up to 1 (cell boundaries double), then spends ``cells``
    uniform cells on the rest.  Quadrature rules with interior nodes can
    then integrate functions with an integrable pole at 0.  Without
    ``refine_zero`` the grid is plain uniform, which is what ODE solves
    want (micro-cells near 0 force pointlessly small steps).
    """
    if t_max <= 0:
        raise InvalidGrid("t_max must be positive")
    if not refine_zero:
        return np.linspace(0.0, t_max, cells + 1)
    knee = min(1.0, t_max / 2.0)
    n_geo = int(np.ceil(np.log2(knee / t_min)))
    geo = t_min * 2.0 ** np.arange(n_geo + 1)
    geo[-1] = knee
    body = np.linspace(knee, t_max, cells + 1)[1:]
    return np.concatenate(([0.0], geo, body))


# 7-point Gauss-Legendre on [-1, 1]; nodes are interior so integrands are
# never evaluated at cell endpoints.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(7)


def _cellwise_gl7(f: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Per-cell Gauss-Legendre integrals, one vectorized evaluation of f."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    return (vals @ _GL_WEIGHTS) * half


@dataclass(frozen=True)
class IntegralResult:
    """A truncated integral with a refinement-based error estimate.

    ``partials[k]`` is the integral from 0 to ``grid[k]``; ``value`` is the
    last partial.  ``error`` sums the per-cell differences between the
    one-level and two-level composite rules, so the reported value differs
    from the once-refined one by at most ``error``.
    """

    value: float
    error: float
    partials: np.ndarray
    grid: np.ndarray


def improper_integral(
    f: Callable[[np.ndarray], np.ndarray],
    grid: np.ndarray | None = None,
    t_max: float | None = None,
    cells: int = 4096,
) -> IntegralResult:
    """Integrate ``f`` over [0, grid[-1]] cell-by-cell with one refinement.

    ``f`` must accept a 1-d array of times.  Pass either an explicit grid
    or ``t_max`` (the default grid with zero-refinement is then used).
    """
    if grid is None:
        if t_max is None:
            raise InvalidGrid("need a grid or t_max")
        grid = default_grid(t_max, cells=cells)
    grid = _check_grid(grid)
    lo, hi = grid[:-1], grid[1:]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        coarse = _cellwise_gl7(f, lo, hi)
        mid = 0.5 * (lo + hi)
        left = _cellwise_gl7(f, lo, mid)
        right = _cellwise_gl7(f, mid, hi)
        fine = left + right
        err = float(np.sum(np.abs(fine - coarse)))
    partials = np.concatenate(([0.0], np.cumsum(fine)))
    return IntegralResult(float(partials[-1]), err, partials, grid)


@dataclass(frozen=True)
class LadderRecord:
    """Convergence evidence for an integral over [0, inf).

    ``partials`` are the integrals up to each rung of ``decades``; the
    verdict is one of ``converged`` / ``diverged`` / ``inconclusive``.
    Divergence at 0 is decided analytically when a pole exponent is
    declared (exponent <= -1 diverges) and only heuristically otherwise;
    the heuristic never claims divergence, it degrades to inconclusive.
    """

    verdict: str
    value: float
    decades: np.ndarray
    partials: np.ndarray
    increments: np.ndarray
    head_blocks: np.ndarray
    head_exponent: float | None
    tail_estimate: float | None
    notes: tuple[str, ...] = ()


def improper_verdict(
    f: Callable[[np.ndarray], np.ndarray],
    pole_exp: float | None = 0.0,
    tail_bound: Callable[[float], float] | None = None,
    t_max: float = 1.0e4,
    tol: float = 1e-8,
    per_decade_cells: int = 256,
) -> LadderRecord:
    """Decide whether ``int_0^inf f`` converges, with the evidence attached.

    ``pole_exp`` declares the power behaviour of ``f`` at 0 (``f ~ t^e``);
    ``None`` means unknown.  ``tail_bound(T)``, when supplied, must bound
    the remaining mass beyond T and settles tail convergence by itself.
    """
    # grid: geometric head below 1, then log-spaced decades up to t_max
    t_min = 1e-12
    n_geo = int(np.ceil(np.log2(1.0 / t_min)))
    head = t_min * 2.0 ** np.arange(n_geo + 1)
    head[-1] = 1.0
    pieces = [np.array([0.0]), head]
    decades = [1.0]
    t = 1.0
    while t < t_max * (1 - 1e-12):
        nxt = min(t * 10.0, t_max)
        pieces.append(np.geomspace(t, nxt, per_decade_cells + 1)[1:])
        decades.append(nxt)
        t = nxt
    grid = np.concatenate(pieces)
    result = improper_integral(f, grid=grid)
    partials = result.partials

    decade_idx = np.searchsorted(grid, np.asarray(decades))
    decade_partials = partials[decade_idx]
    increments = np.diff(np.concatenate(([0.0], decade_partials)))

    # head blocks: mass over [1e-9,1e-6], [1e-6,1e-3], [1e-3,1]
    marks = np.searchsorted(grid, [1e-9, 1e-6, 1e-3, 1.0])
    head_blocks = np.diff(partials[marks])

    notes: list[str] = []
    # --- behaviour at 0 ---
    if pole_exp is not None:
        head_status = "converged" if pole_exp > -1.0 else "diverged"
        if head_status == "diverged":
            notes.append(
                f"pole exponent {pole_exp:g} <= -1: not integrable at 0"
            )
    else:
        # blocks scale like 10^{3(e+1)} per step toward 0; a ratio near or
        # above 1 means the local exponent is at or below -1
        b = np.abs(head_blocks)
        if b[0] > 1e-13 * (1.0 + abs(result.value)) and b[0] >= 0.5 * b[1]:
            head_status = "unresolved"
            notes.append("behaviour at 0 unresolved (no declared pole exponent)")
        else:
            head_status = "converged"

    # --- behaviour at infinity ---
    tail_estimate = None
    if tail_bound is not None:
        tail_estimate = float(tail_bound(float(decades[-1])))
        tail_status = "converged" if np.isfinite(tail_estimate) else "inconclusive"
    elif not np.all(np.isfinite(decade_partials)):
        tail_status = "diverged"
        notes.append("partial integrals overflow")
    else:
        d = np.abs(increments)
        growing = d.size >= 2 and d[-1] > 1.01 * d[-2] and d[-1] > tol
        still_moving = d[-1] > 0.01 * (abs(decade_partials[-1]) + 1e-300)
        settled = d[-1] <= tol * (1.0 + abs(decade_partials[-1]))
        if growing or (still_moving and d.size >= 2 and d[-1] >= 0.99 * d[-2]):
            tail_status = "diverged"
        elif settled:
            tail_status = "converged"
        else:
            tail_status = "inconclusive"
            notes.append("tail not settled at t_max; no tail bound declared")

    if "diverged" in (head_status, tail_status):
        verdict = "diverged"
    elif head_status in ("converged",) and tail_status == "converged":
        verdict = "converged"
    elif head_status == "unresolved" and tail_status == "converged":
        verdict = "inconclusive"
    else:
        verdict = "inconclusive"

    value = float(decade_partials[-1])
    if tail_estimate is not None and np.isfinite(value):
        value += 0.0  # partials already cover [0, t_max]; bound reported separately
    return LadderRecord(
        verdict,
        value,
        np.asarray(decades),
        decade_partials,
        increments,
        head_blocks,
        pole_exp,
        tail_estimate,
        tuple(notes),
    )


@dataclass(frozen=True)
class DecayRecord:
    """Three-window decay evidence for ``g(t) -> 0`` as t grows.

    ``sups`` are suprema of |g| over windows ending at t_max/100, t_max/10
    and t_max.  The quantity qualifies when the sups are nonincreasing
    (2% slack) and the final one is below tol*(1 + first).
    """

    passed: bool
    window_ends: tuple[float, float, float]
    sups: tuple[float, float, float]
    tol: float
    witness: tuple[float, float] | None
    detail: str


def decays_to_zero(
    g: Callable[[np.ndarray], np.ndarray],
    t_max: float = 50.0,
    tol: float = 1e-3,
    samples: int = 33,
    slack: float = 0.02,
) -> DecayRecord:
    """Finite decay criterion for a limit-zero claim at infinity."""
    ends = (t_max / 100.0, t_max / 10.0, t_max)
    sups: list[float] = []
    argmax_t: list[float] = []
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for end in ends:
            ts = np.linspace(0.9 * end, end, samples)
            vals = np.abs(np.asarray(g(ts), dtype=float))
            if vals.ndim > 1:
                vals = np.linalg.norm(vals, axis=-1)
            k = int(np.argmax(vals)) if np.all(np.isfinite(vals)) else int(np.argmax(~np.isfinite(vals)))
            sups.append(float(vals[k]))
            argmax_t.append(float(ts[k]))
    s1, s2, s3 = sups
    floor = 1e-300
    if not all(np.isfinite(sups)):
        bad = next(i for i, s in enumerate(sups) if not np.isfinite(s))
        return DecayRecord(False, ends, tuple(sups), tol, (argmax_t[bad], sups[bad]), "non-finite samples")
    if s2 > s1 * (1 + slack) + floor:
        return DecayRecord(False, ends, tuple(sups), tol, (argmax_t[1], s2), "grows between first and second window")
    if s3 > s2 * (1 + slack) + floor:
        return DecayRecord(False, ends, tuple(sups), tol, (argmax_t[2], s3), "grows between second and third window")
    if s3 > tol * (1.0 + s1):
        return DecayRecord(False, ends, tuple(sups), tol, (argmax_t[2], s3), f"final window sup {s3:.3g} above tol*(1+first)")
    return DecayRecord(True, ends, tuple(sups), tol, None, "decays across windows")


@dataclass(frozen=True)
class TruncationRecord:
    """Horizon T (integer) with tail mass below tol, and how it was found."""

    horizon: float
    tail_at_horizon: float
    analytic: bool
    note: str = ""


def tail_truncation(
    tail_bound: Callable[[float], float] | None = None,
    f: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-8,
    t_cap: float = 1.0e5,
) -> TruncationRecord:
    """Smallest integer horizon whose tail mass is below ``tol``.

    Prefers the declared analytic tail bound (walked along the integer
    ladder 1, 2, 3, ...).  Without one, a numeric tail estimate from the
    decade ladder is used, provided it stabilizes; otherwise
    :class:`MissingTailBound` is raised.  ``tol = inf`` returns the first
    decade.
    """
    if not np.isfinite(tol):
        return TruncationRecord(1.0, float("nan"), tail_bound is not None, "tolerance infinite")
    if tail_bound is not None:
        T = 1.0
        while T <= t_cap:
            b = float(tail_bound(T))
            if b <= tol:
                return TruncationRecord(T, b, True)
            T += 1.0
        raise MissingTailBound(
            f"declared tail bound stays above tol={tol:g} up to t={t_cap:g}"
        )
    if f is None:
        raise MissingTailBound("no tail bound declared and no integrand given")
    ladder = improper_verdict(f, pole_exp=None, t_max=min(t_cap, 1e4), tol=tol)
    if ladder.verdict != "converged":
        raise MissingTailBound(
            "no tail bound declared and the numeric tail estimate does not stabilize"
        )
    total = ladder.value
    res = improper_integral(f, grid=default_grid(min(t_cap, 1e4), cells=4096))
    tails = total - res.partials
    ok = np.nonzero(tails <= tol)[0]
    if ok.size == 0:
        raise MissingTailBound("numeric tail never drops below tol on the grid")
    t_hi = max(1.0, float(np.ceil(res.grid[ok[0]])))
    # re-grid with every integer up to t_hi as a knot, then walk the ladder
    head = default_grid(1.0, cells=1, refine_zero=True)
    fine = np.arange(1.0, t_hi + 1.0, 0.25)[1:]
    grid2 = np.concatenate((head, fine))
    res2 = improper_integral(f, grid=grid2)
    tails2 = total - res2.partials
    for T in range(1, int(t_hi) + 1):
        k = int(np.searchsorted(grid2, float(T)))
        if tails2[k] <= tol:
            return TruncationRecord(float(T), float(max(tails2[k], 0.0)), False,
                                    "numeric tail estimate")
    return TruncationRecord(t_hi, float(max(tails[ok[0]], 0.0)), False, "numeric tail estimate")


# --- Dormand-Prince 5(4) -----------------------------------------------------
#
#   c  |  a
#  ----+------------------------------------------------------------
#  0   |
#  1/5 | 1/5
#  3/10| 3/40        9/40
#  4/5 | 44/45      -56/15       32/9
#  8/9 | 19372/6561 -25360/2187  64448/6561 -212/729
#  1   | 9017/3168  -355/33      46732/5247  49/176  -5103/18656
#  1   | 35/384      0           500/1113    125/192 -2187/6784  11/84
#
# The last stage row doubles as the 5th-order weights (FSAL).

_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_DP_ERR = _DP_B5 - _DP_B4


def _dp_step(rhs, t, y, h, k1):
    """One Dormand-Prince step; returns (y5, error_vector, k_last)."""
    k = [k1]
    for i in range(1, 7):
        acc = np.zeros_like(y)
        for a, kj in zip(_DP_A[i], k):
            if a != 0.0:
                acc = acc + a * kj
        k.append(rhs(t + _DP_C[i] * h, y + h * acc))
    y5 = y + h * sum(b * kj for b, kj in zip(_DP_B5, k) if b != 0.0)
    err = h * sum(e * kj for e, kj in zip(_DP_ERR, k) if e != 0.0)
    return y5, err, k[-1]


def _integrate_cell(rhs, ta, tb, y, rtol, atol, fixed_steps, blowup, k1=None):
    """Advance y from ta to tb without stepping past tb."""
    if fixed_steps:
        h = (tb - ta) / fixed_steps
        t = ta
        for _ in range(fixed_steps):
            k1 = rhs(t, y)
            y, _, _ = _dp_step(rhs, t, y, h, k1)
            t += h
            ynorm = float(np.max(np.abs(y)))
            if not np.isfinite(ynorm) or ynorm > blowup:
                raise BlowUp(t, ynorm, blowup)
        return y, None

    t = ta
    h = tb - ta
    if k1 is None:
        k1 = rhs(t, y)
    steps = 0
    while t < tb:
        h = min(h, tb - t)
        if h < (tb - ta) * 1e-14:
            raise BlowUp(t, float(np.max(np.abs(y))), blowup)
        y_new, err_vec, k_last = _dp_step(rhs, t, y, h, k1)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if not np.isfinite(err):
            raise BlowUp(t + h, float(np.max(np.abs(y_new))), blowup)
        if err <= 1.0:
            t += h
            y = y_new
            k1 = k_last
            ynorm = float(np.max(np.abs(y)))
            if ynorm > blowup:
                raise BlowUp(t, ynorm, blowup)
        factor = 0.9 * (err + 1e-300) ** -0.2
        h *= min(5.0, max(0.2, factor))
        steps += 1
        if steps > 200000:
            raise BlowUp(t, float(np.max(np.abs(y))), blowup)
    return y, k1


def solve_ode(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    grid: np.ndarray,
    y0: Sequence[float] | float,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    fixed_steps: int | None = None,
    blowup: float = 1e12,
) -> np.ndarray:
    """Integrate ``y' = rhs(t, y)`` through every grid point.

    Integration restarts at each knot, so right-hand sides may jump there
    (piecewise controls).  ``fixed_steps`` switches off step control and
    takes exactly that many 5th-order steps per cell; convergence-order
    tests rely on it.  Returns an array of shape ``(len(grid), n)``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or not np.all(np.diff(grid) > 0):
        raise InvalidGrid("grid must be strictly increasing with at least two points")
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    out = np.empty((grid.size, y.size))
    out[0] = y
    k1 = None
    for i in range(grid.size - 1):
        y, k1 = _integrate_cell(
            rhs, grid[i], grid[i + 1], y, rtol, atol, fixed_steps, blowup, k1
        )
        out[i + 1] = y
    return out


def solve_state(prob, u, x0=None, grid=None, t_max: float = 50.0, cells: int = 1024,
                rtol: float = 1e-10, atol: float = 1e-12, blowup: float = 1e12,
                fixed_steps: int | None = None):
    """Integrate the state equation under a given control.

    ``u`` is either a callable ``t -> control vector`` or an array of
    samples on the grid knots; sampled controls are treated as constant on
    each half-open cell (the sample at the right knot owns the cell), and
    no integration step ever crosses a knot.  Returns a
    :class:`~pmpcheck.problem.CandidateProcess`.
    """
    from .problem import CandidateProcess  # deferred: avoids an import cycle

    if grid is None:
        grid = default_grid(t_max, cells=cells, refine_zero=False)
    grid = np.asarray(grid, dtype=float)
    if x0 is None:
        x0 = prob.x0
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    if callable(u):
        u_fn = lambda t: np.atleast_1d(np.asarray(u(t), dtype=float))
        u_samples = np.stack([u_fn(t) for t in grid])
    else:
        u_samples = np.asarray(u, dtype=float)
        if u_samples.ndim == 1:
            u_samples = u_samples[:, None]
        if u_samples.shape[0] != grid.size:
            raise InvalidGrid(
                f"control samples ({u_samples.shape[0]}) do not match grid ({grid.size})"
            )
        u_fn = None

    x = np.empty((grid.size, x0.size))
    x[0] = x0
    y = x0.copy()
    for k in range(grid.size - 1):
        if u_fn is None:
            uk = u_samples[k + 1]
            rhs = lambda t, xv, uk=uk: prob.phi_value(t, xv, uk)
        else:
            rhs = lambda t, xv: prob.phi_value(t, xv, u_fn(t))
        y, _ = _integrate_cell(rhs, grid[k], grid[k + 1], y, rtol, atol, fixed_steps, blowup)
        x[k + 1] = y
    interp = "callable" if u_fn is not None else "step"
    return CandidateProcess(grid=grid, x=x, u=u_samples, u_interp=interp,
                            u_callable=u_fn)


@dataclass(frozen=True)
class FundamentalMatrix:
    """Grid-sampled fundamental system of ``z' = -phi_x(t)^T z``, Z(0)=I.

    ``cond`` tracks 2-norm condition numbers; entries above 1e12 mark the
    matrix ill-conditioned there (inverses are still returned, flagged).
    """

    grid: np.ndarray
    Z: np.ndarray  # (N, n, n)
    cond: np.ndarray
    ill_conditioned: bool

    def inverse(self, k: int) -> np.ndarray:
        return np.linalg.solve(self.Z[k], np.eye(self.Z.shape[1]))


def fundamental_matrix(prob, cand, grid: np.ndarray | None = None,
                       rtol: float = 1e-11, atol: float = 1e-13) -> FundamentalMatrix:
    """Solve the adjoint-homogeneous matrix ODE along a candidate process."""
    if grid is None:
        grid = cand.grid
    grid = np.asarray(grid, dtype=float)
    n = prob.n

    def rhs(t, zflat):
        A = prob.phi_jac_x(t, cand.state(t), cand.control(t))
        return (-A.T @ zflat.reshape(n, n)).ravel()

    flat = solve_ode(rhs, grid, np.eye(n).ravel(), rtol=rtol, atol=atol)
    Z = flat.reshape(grid.size, n, n)
    cond = np.array([np.linalg.cond(Zk) for Zk in Z])
    return FundamentalMatrix(grid, Z, cond, bool(np.any(cond > 1e12)))


@dataclass(frozen=True)
class NormResult:
    value: float
    error: float
    grid_limited: bool = False


def _as_rows(vals: np.ndarray, nt: int) -> np.ndarray:
    """Normalize a vectorized function's output to shape (nt, n)."""
    arr = np.asarray(vals, dtype=float)
    if arr.ndim == 1:
        return arr[:, None]
    if arr.shape[0] != nt and arr.shape[-1] == nt:
        return arr.T
    return arr


def weighted_norm(fn, weight, p: float, grid: np.ndarray) -> NormResult:
    """The L_p norm of ``fn`` against the weight, by cell-wise quadrature.

    For finite p this is ``(int |fn(t)|^p w(t) dt)^(1/p)`` with the
    Euclidean norm inside; for p = inf it degrades to the weighted sup
    over the grid points, which under-approximates the essential sup and
    is therefore flagged ``grid_limited``.
    """
    grid = _check_grid(grid)
    if p == np.inf:
        vals = _as_rows(fn(grid), grid.size)
        w = np.asarray(weight(grid), dtype=float)
        samples = np.linalg.norm(vals, axis=1) * w
        return NormResult(float(np.max(samples)), float("nan"), grid_limited=True)
    if p < 1:
        raise ValueError(f"norm exponent must be in [1, inf], got {p!r}")

    def integrand(ts):
        rows = _as_rows(fn(ts), ts.size)
        return np.linalg.norm(rows, axis=1) ** p * np.asarray(weight(ts), dtype=float)

    res = improper_integral(integrand, grid=grid)
    value = res.value ** (1.0 / p) if res.value > 0 else 0.0
    # first-order error propagation through the 1/p power
    err = res.error / (p * max(value, 1e-300) ** (p - 1)) if value > 0 else res.error
    return NormResult(float(value), float(err))


def w1_norm(fn, dfn, weight, p: float, grid: np.ndarray) -> NormResult:
    """Norm of a once-differentiable path: ``|x|_{L_p} + |x'|_{L_p}``."""
    a = weighted_norm(fn, weight, p, grid)
    b = weighted_norm(dfn, weight, p, grid)
    err = (a.error + b.error) if np.isfinite(a.error) and np.isfinite(b.error) else float("nan")
    return NormResult(a.value + b.value, err, a.grid_limited or b.grid_limited)


@dataclass(frozen=True)
class HolderRecord:
    lhs: float
    rhs: float
    p: float
    q: float
    holds: bool

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else float("inf")


def holder_pairing_check(x_fn, y_fn, weight, p: float, grid: np.ndarray) -> HolderRecord:
    """Check the weighted pairing bound |<x,y>|_{L_1} <= |x|_{L_p} |y|_{L_q}."""
    if not (1.0 < p < np.inf):
        raise ValueError("pairing check needs 1 < p < inf")
    q = p / (p - 1.0)
    grid = _check_grid(grid)

    def pair(ts):
        xr = _as_rows(x_fn(ts), ts.size)
        yr = _as_rows(y_fn(ts), ts.size)
        return np.abs(np.sum(xr * yr, axis=1)) * np.asarray(weight(ts), dtype=float)

    lhs_res = improper_integral(pair, grid=grid)
    nx = weighted_norm(x_fn, weight, p, grid)
    ny = weighted_norm(y_fn, weight, q, grid)
    rhs = nx.value * ny.value
    slack = 1e-10 * (1.0 + rhs) + lhs_res.error + rhs * 1e-12
    return HolderRecord(lhs_res.value, rhs, p, q, lhs_res.value <= rhs + slack)
