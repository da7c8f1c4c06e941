"""Incremental solver for the time-discrete, regularized variational inequality.

Each load step minimizes

    Π(w) = Ψ(w) + j_ε(w - w_prev) - ⟨ℓ_n, w⟩   subject to  B (w - w_prev) = 0

with a damped Newton method. Problems implement :class:`IncrementalProblem`
and work in whatever (typically nondimensional) coordinates they choose;
the solver only sees coefficient vectors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FerroviError, NoConvergence, SaturationReached, SingularSystem

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
MAX_ITER = 50
MIN_ALPHA = 2.0**-20
MIN_ALPHA_HARD = 2.0**-50


class IncrementalProblem(Protocol):
    def energy(self, w: np.ndarray, w_prev: np.ndarray, load: np.ndarray) -> float:
        """Incremental objective Ψ(w) + j_ε(w - w_prev) - ⟨load, w⟩."""

    def residual(self, w: np.ndarray, w_prev: np.ndarray, load: np.ndarray) -> np.ndarray:
        """Gradient of :meth:`energy` with respect to ``w``."""

    def hessian(self, w: np.ndarray, w_prev: np.ndarray, load: np.ndarray):
        """Symmetric Hessian of :meth:`energy` (dense array or sparse matrix)."""

    def constraints(self) -> sp.spmatrix | None:
        """Linear equality rows acting on increments, or None."""

    def saturation_guard(self, w: np.ndarray) -> bool:
        """True when ``w`` lies inside the admissible (unsaturated) set."""

    def load_vector(self, data: dict) -> np.ndarray:
        """Coefficient vector of the load functional for one schedule entry."""


@dataclass
class SolveReport:
    iterations: int = 0
    residual_norms: list[float] = field(default_factory=list)
    converged: bool = False
    damping_events: int = 0
    alphas: list[float] = field(default_factory=list)
    multiplier: np.ndarray | None = None


@dataclass(frozen=True)
class LoadStep:
    t: float
    data: dict


@dataclass(frozen=True)
class Schedule:
    """Ordered load steps n = 1..N; step 0 is the unloaded initial state."""

    steps: tuple[LoadStep, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        times = [0.0] + [s.t for s in self.steps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("schedule times must be strictly increasing and positive")

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @classmethod
    def ramps(cls, segments: Iterable[tuple[int, dict]], start: dict | None = None) -> "Schedule":
        """Piecewise-linear ramps; each segment moves all keys to its targets in ``steps`` steps.

        Keys missing from a segment hold their previous value; every key
        starts from ``start`` (zero by default).
        """
        segments = list(segments)
        keys = sorted({k for _, targets in segments for k in targets})
        current = {k: np.asarray((start or {}).get(k, 0.0), dtype=float) for k in keys}
        steps = []
        t = 0
        for nsteps, targets in segments:
            if nsteps < 1:
                raise ValueError("each ramp needs at least one step")
            begin = dict(current)
            end = {k: np.asarray(targets.get(k, begin[k]), dtype=float) for k in keys}
            for i in range(1, nsteps + 1):
                frac = i / nsteps
                t += 1
                steps.append(LoadStep(float(t), {k: begin[k] + frac * (end[k] - begin[k]) for k in keys}))
            current = end
        return cls(tuple(steps))


@dataclass
class Trajectory:
    states: list[np.ndarray]
    reports: list[SolveReport]
    times: list[float]
    loads: list[np.ndarray]
    increment_norms: list[float]
    load_increment_norms: list[float]
    iteration_log: list[dict]

    def __len__(self):
        return len(self.reports)


def _as_operator(h):
    return h if sp.issparse(h) else np.asarray(h)


def newton_direction(hessian, residual, constraints=None):
    """Solve the (possibly constrained) Newton system.

    Returns ``(step, multiplier)`` from

        [H  Bᵀ] [s]   [-r]
        [B  0 ] [λ] = [ 0]

    ``multiplier`` is None without constraints.
    """
    r = np.asarray(residual, dtype=float)
    n = r.size
    has_b = constraints is not None and constraints.shape[0] > 0
    if not sp.issparse(hessian) and not has_b:
        try:
            step = np.linalg.solve(np.asarray(hessian, dtype=float), -r)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
        if not np.all(np.isfinite(step)):
            raise SingularSystem("non-finite Newton step")
        return step, None

    H = sp.csr_matrix(hessian)
    B = sp.csr_matrix(constraints) if has_b else sp.csr_matrix((0, n))
    m = B.shape[0]
    # symmetric diagonal equilibration keeps the pivots of wildly different unit blocks comparable
    diag = np.abs(H.diagonal())
    dp = 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0))
    if m:
        bscaled = abs(B @ sp.diags(dp)).max(axis=1).toarray().ravel()
        dc = 1.0 / np.where(bscaled > 0, bscaled, 1.0)
    else:
        dc = np.zeros(0)
    d = np.concatenate([dp, dc])
    K = sp.bmat([[H, B.T], [B, None]], format="csc")
    Ds = sp.diags(d)
    Ks = (Ds @ K @ Ds).tocsc()
    rhs = np.concatenate([-r, np.zeros(m)]) * d
    try:
        lu = spla.splu(Ks)
        y = lu.solve(rhs)
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    x = d * y
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite Newton step")
    return x[:n], (x[n:] if m else None)


def damped_update(problem: IncrementalProblem, w, step, w_prev, load, merit=None, slope=None):
    """Backtrack α ∈ {1, 1/2, 1/4, ...} until the trial is admissible and the merit does not increase.

    ``slope`` is the directional derivative of the merit along ``step``.
    When it is below round-off level no merit decrease can be resolved and
    the largest admissible step is taken. Returns ``(w_trial, alpha)``.
    """
    w = np.asarray(w, dtype=float)
    if merit is None:
        merit = problem.energy(w, w_prev, load)
    slack = 1e-12 * max(1.0, abs(merit))
    roundoff = slope is None or abs(slope) <= slack
    alpha = 1.0
    first_admissible = None
    last_admissible = None
    min_alpha = MIN_ALPHA if roundoff else MIN_ALPHA_HARD
    while alpha >= min_alpha:
        trial = w + alpha * step
        if problem.saturation_guard(trial):
            if first_admissible is None:
                first_admissible = (trial, alpha)
            last_admissible = (trial, alpha)
            if problem.energy(trial, w_prev, load) <= merit + slack:
                return trial, alpha
        alpha *= 0.5
    if first_admissible is None:
        raise SaturationReached("damping could not keep the trial state below saturation")
    if roundoff:
        return first_admissible
    return last_admissible


def _projected_residual(g, B, bbt_lu):
    """Residual g + Bᵀλ with λ the least-squares multiplier estimate."""
    if B is None:
        return g, None
    lam = -bbt_lu.solve(B @ g)
    return g + B.T @ lam, lam


def solve_step(
    problem: IncrementalProblem,
    w_prev,
    load,
    tol: float = DEFAULT_TOL,
    max_iter: int = MAX_ITER,
    initial=None,
    step_index: int | None = None,
    iteration_log: list | None = None,
):
    """Solve one load step starting from ``initial`` (default ``w_prev``)."""
    w_prev = np.asarray(w_prev, dtype=float)
    load = np.asarray(load, dtype=float)
    w = w_prev.copy() if initial is None else np.asarray(initial, dtype=float).copy()
    if not problem.saturation_guard(w):
        raise SaturationReached("initial state outside the saturation margin")
    B = problem.constraints()
    bbt_lu = None
    if B is not None and B.shape[0] > 0:
        B = sp.csr_matrix(B)
        try:
            bbt_lu = spla.splu(sp.csc_matrix(B @ B.T))
        except RuntimeError as exc:
            raise SingularSystem(f"constraint rows are rank deficient: {exc}") from exc
    else:
        B = None
    target = tol * (1.0 + np.linalg.norm(load))
    report = SolveReport()
    lam = None
    for it in range(max_iter + 1):
        g = problem.residual(w, w_prev, load)
        r, lam = _projected_residual(g, B, bbt_lu)
        rnorm = float(np.linalg.norm(r))
        report.residual_norms.append(rnorm)
        report.iterations = it + 1
        if iteration_log is not None:
            iteration_log.append({"step": step_index, "iteration": it, "residual": rnorm,
                                  "alpha": report.alphas[-1] if report.alphas else 1.0})
        if not np.isfinite(rnorm):
            raise NoConvergence(it, rnorm, step_index)
        if rnorm <= target:
            report.converged = True
            report.multiplier = lam
            log.debug("step %s converged in %d iterations (|r|=%.3e)", step_index, it, rnorm)
            return w, report
        if it == max_iter:
            break
        H = problem.hessian(w, w_prev, load)
        step, _ = newton_direction(H, g, B)
        merit = problem.energy(w, w_prev, load)
        w, alpha = damped_update(problem, w, step, w_prev, load, merit, slope=float(np.dot(g, step)))
        report.alphas.append(alpha)
        if alpha < 1.0:
            report.damping_events += 1
    raise NoConvergence(max_iter, report.residual_norms[-1], step_index)


def run_schedule(
    problem: IncrementalProblem,
    schedule: Schedule | Sequence[LoadStep],
    w0=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = MAX_ITER,
) -> Trajectory:
    """Solve all steps of ``schedule`` in order from ``w0`` (zero by default).

    On failure the raised error carries ``step`` and the partial ``trajectory``.
    """
    if w0 is None:
        w0 = np.zeros_like(problem.load_vector({}))
    w = np.asarray(w0, dtype=float)
    traj = Trajectory([w.copy()], [], [0.0], [np.zeros_like(w)], [], [], [])
    load_prev = traj.loads[0]
    for n, step in enumerate(schedule, start=1):
        load = problem.load_vector(step.data)
        try:
            w_new, report = solve_step(problem, w, load, tol, max_iter, step_index=n,
                                       iteration_log=traj.iteration_log)
        except FerroviError as exc:
            exc.step = n
            exc.trajectory = traj
            raise
        traj.increment_norms.append(float(np.linalg.norm(w_new - w)))
        traj.load_increment_norms.append(float(np.linalg.norm(load - load_prev)))
        traj.states.append(w_new)
        traj.reports.append(report)
        traj.times.append(step.t)
        traj.loads.append(load)
        w, load_prev = w_new, load
    return traj
