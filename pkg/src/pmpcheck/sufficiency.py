"""Concavity of the maximized Hamiltonian: the sufficient-condition side.

A candidate that passes the necessary conditions with a normal
multiplier is locally optimal once the maximized Hamiltonian

    hamilton_sup(t, x) = sup over admissible u of H(t, x, u, p(t), 1)

is concave in x on the tube around the trajectory.  Concavity of a
supremum cannot be read off the integrand (an upper envelope of concave
slices need not be concave), so it is probed directly: midpoint
inequalities over sampled point pairs, plus a second-difference stencil
in one dimension where the geometry allows it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pmp import AdjointSolution, _sup_over_u, pontryagin_H
from .problem import CandidateProcess, ControlProblem, _ball_offsets

__all__ = ["ConcavityReport", "check_arrow", "hamiltonian_sup"]


@dataclass(frozen=True)
class ConcavityReport:
    """Per-time concavity verdicts for the maximized Hamiltonian.

    ``worst`` holds the largest midpoint defect found at each scanned
    time: ``(h(x1) + h(x2))/2 - h((x1+x2)/2)``, clipped at zero, so a
    concave slice reads 0 up to roundoff.  ``pair_offsets`` are the
    unit-ball offsets shared by all slices; ``pairs_at`` rebuilds the
    actual coordinates for one slice.  A failed premise (no normal
    multiplier to scan with) leaves the arrays empty.
    """

    grid: np.ndarray
    worst: np.ndarray
    slice_ok: np.ndarray
    radii: np.ndarray
    centers: np.ndarray
    pair_offsets: np.ndarray
    witness: tuple | None
    premise: str
    premise_ok: bool
    tolerance: float
    notes: tuple = ()

    @property
    def overall(self) -> str:
        if not self.premise_ok:
            return "not-applicable"
        return "pass" if bool(np.all(self.slice_ok)) else "fail"

    @property
    def passed(self) -> bool:
        return self.overall == "pass"

    def pairs_at(self, k: int) -> np.ndarray:
        """Sampled (x1, x2) pairs at grid index ``k``, shape (pairs, 2, n)."""
        return self.centers[k] + self.radii[k] * self.pair_offsets


def _as_points(t, x, p, n: int):
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    xs = np.asarray(x, dtype=float)
    ps = np.asarray(p, dtype=float)
    if xs.ndim == 1:
        xs = np.broadcast_to(xs, (ts.size, n))
    if ps.ndim == 1:
        ps = np.broadcast_to(ps, (ts.size, n))
    if xs.shape != (ts.size, n) or ps.shape != (ts.size, n):
        raise ValueError(
            f"expected x and p with shape ({ts.size}, {n}), "
            f"got {xs.shape} and {ps.shape}")
    return ts, np.ascontiguousarray(xs), np.ascontiguousarray(ps)


def hamiltonian_sup(prob: ControlProblem, t, x, p, lambda0: float = 1.0,
                    tol: float = 1e-10, u_start=None):
    """sup over the control box of H(t, x, u, p, lambda0), vectorized.

    ``t`` may be a scalar or a 1-d array; ``x`` and ``p`` follow with one
    row per time (a single row is broadcast).  The inner maximization
    uses the same machinery as the maximum-condition check, so a single
    quadratic control is solved analytically and everything else goes
    through the prescan-plus-golden sampler.  ``u_start`` overrides the
    default feasible starting point (the projection of 0 into the box).

    Raises UnboundedAbove when H climbs without bound toward an open
    face of the box.
    """
    scalar = np.ndim(t) == 0
    ts, xs, ps = _as_points(t, x, p, prob.n)
    if u_start is None:
        u0 = np.broadcast_to(prob.U.project(np.zeros(prob.m)),
                             (ts.size, prob.m)).copy()
    else:
        u0 = np.asarray(u_start, dtype=float)
        if u0.ndim == 1:
            u0 = np.broadcast_to(u0, (ts.size, prob.m))
        u0 = np.ascontiguousarray(u0)
    h0 = pontryagin_H(prob, ts, xs, u0, ps, lambda0)
    _, h_best, _ = _sup_over_u(prob, ts, xs, u0, ps, lambda0, h0, tol)
    return float(h_best[0]) if scalar else h_best


def check_arrow(prob: ControlProblem, cand: CandidateProcess,
                adj: AdjointSolution, gamma: float = 0.5,
                mode: str = "strong", pairs: int = 64,
                tol: float = 1e-9) -> ConcavityReport:
    """Scan the maximized Hamiltonian for concavity in x on the tube.

    Each grid time gets ``pairs`` point pairs inside the closed ball of
    radius gamma (strong mode) or gamma * eta(t) (weak mode) around the
    candidate state: half symmetric about the center so the scan always
    crosses it, half low-discrepancy fill.  The midpoint inequality is
    enforced up to ``tol * (1 + |h|)`` with ``|h|`` the largest sampled
    magnitude at that time.  In one state dimension a 9-point stencil
    across the tube diameter sharpens the same test.  The multiplier
    must be normal; any positive lambda0 is rescaled onto lambda0 = 1,
    which changes no verdict.

    UnboundedAbove from the inner maximization propagates: a Hamiltonian
    unbounded in u anywhere on the tube has no maximized value to test.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    if mode not in ("strong", "weak"):
        raise ValueError(f"mode must be strong or weak, got {mode!r}")
    if pairs < 2:
        raise ValueError("need at least 2 pairs per time slice")
    if mode == "weak" and prob.eta is None:
        raise ValueError("weak mode needs the problem to declare a tube radius eta")

    n = prob.n
    empty = lambda *shape: np.zeros(shape)
    if adj.lambda0 <= 0:
        return ConcavityReport(
            grid=empty(0), worst=empty(0), slice_ok=empty(0).astype(bool),
            radii=empty(0), centers=empty(0, n),
            pair_offsets=empty(0, 2, n), witness=None,
            premise="normal multiplier (lambda0 = 1)", premise_ok=False,
            tolerance=tol,
            notes=("concavity asserts optimality only for the normal case; "
                   f"got lambda0 = {adj.lambda0:g}",))

    notes = []
    lam = float(adj.lambda0)
    p_grid = adj.value(cand.grid)
    if lam != 1.0:
        p_grid = p_grid / lam
        notes.append(f"multiplier rescaled from lambda0 = {lam:g} onto the "
                     "normal case; verdicts are scale-invariant")

    grid = cand.grid
    if mode == "weak":
        radii = gamma * np.asarray(prob.eta(grid), dtype=float)
    else:
        radii = np.full(grid.size, float(gamma))

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        w = np.asarray(prob.omega(grid), dtype=float)
    usable = np.isfinite(w)
    n_pole = int(np.sum(~usable))
    if n_pole:
        notes.append(f"{n_pole} slice(s) skipped: weight pole")
    floor = 64.0 * np.finfo(float).eps * np.maximum(
        1.0, np.linalg.norm(cand.x, axis=1))
    shrunk = radii < floor
    if np.any(shrunk & usable):
        notes.append(f"{int(np.sum(shrunk & usable))} slice(s) skipped: tube "
                     "radius below machine resolution around the candidate")
        usable &= ~shrunk
    if not np.any(usable):
        return ConcavityReport(
            grid=grid, worst=np.zeros(grid.size),
            slice_ok=np.zeros(grid.size, dtype=bool), radii=radii,
            centers=cand.x, pair_offsets=empty(0, 2, n), witness=None,
            premise="a resolvable tube with finite weight", premise_ok=False,
            tolerance=tol, notes=tuple(notes))

    ts = grid[usable]
    centers = cand.x[usable]
    u_star = cand.u[usable]
    ps = p_grid[usable]
    rr = radii[usable]
    nt = ts.size

    # symmetric half: axis diameters first (they include the boundary),
    # then mirrored low-discrepancy offsets; fill half: independent pairs
    half = pairs // 2
    sym = np.concatenate([np.eye(n), _ball_offsets(n, half, offset=1)[1:]])[:half]
    left = np.concatenate([sym, _ball_offsets(n, pairs - half, offset=7919)])
    right = np.concatenate([-sym, _ball_offsets(n, pairs - half, offset=15877)])
    offsets = np.stack([left[:pairs], right[:pairs]], axis=1)  # (pairs, 2, n)

    # stencil block: 9 collinear points across the first-axis diameter;
    # in one dimension that is the whole tube
    stencil = np.linspace(-1.0, 1.0, 9)
    stl = np.zeros((9, n))
    stl[:, 0] = stencil

    # every hamiltonian_sup evaluation for the scan in one flat batch:
    # per slice the pair endpoints, the midpoints, and the stencil
    blocks = np.concatenate([
        offsets[:, 0], offsets[:, 1],
        0.5 * (offsets[:, 0] + offsets[:, 1]),
        stl,
    ])  # (3*pairs + 9, n)
    per = blocks.shape[0]
    xs_flat = (centers[:, None, :] + rr[:, None, None] * blocks[None, :, :])
    xs_flat = xs_flat.reshape(nt * per, n)
    ts_flat = np.repeat(ts, per)
    ps_flat = np.repeat(ps, per, axis=0)
    u0_flat = np.repeat(u_star, per, axis=0)

    h = hamiltonian_sup(prob, ts_flat, xs_flat, ps_flat, u_start=u0_flat)
    h = h.reshape(nt, per)
    h1, h2 = h[:, :pairs], h[:, pairs:2 * pairs]
    hm = h[:, 2 * pairs:3 * pairs]
    hs = h[:, 3 * pairs:]

    defects = 0.5 * (h1 + h2) - hm                    # > 0 breaks concavity
    d2 = 0.5 * (hs[:, :-2] + hs[:, 2:]) - hs[:, 1:-1]  # same test, stencil triples
    all_defects = np.concatenate([defects, d2], axis=1)
    scale = 1.0 + np.max(np.abs(h), axis=1)
    worst_usable = np.max(all_defects, axis=1)
    ok_usable = worst_usable <= tol * scale

    worst = np.zeros(grid.size)
    slice_ok = np.ones(grid.size, dtype=bool)
    worst[usable] = np.maximum(worst_usable, 0.0)
    slice_ok[usable] = ok_usable

    witness = None
    if not np.all(ok_usable):
        k = int(np.argmax(np.where(ok_usable, -np.inf, worst_usable)))
        j = int(np.argmax(all_defects[k]))
        if j < pairs:
            x1 = centers[k] + rr[k] * offsets[j, 0]
            x2 = centers[k] + rr[k] * offsets[j, 1]
        else:
            i = j - pairs  # stencil triple (i, i+1, i+2)
            x1 = centers[k] + rr[k] * stl[i]
            x2 = centers[k] + rr[k] * stl[i + 2]
        witness = (float(ts[k]), x1, x2, float(all_defects[k, j]))

    return ConcavityReport(
        grid=grid, worst=worst, slice_ok=slice_ok, radii=radii,
        centers=cand.x, pair_offsets=offsets, witness=witness,
        premise="normal multiplier (lambda0 = 1)", premise_ok=True,
        tolerance=tol, notes=tuple(notes))
