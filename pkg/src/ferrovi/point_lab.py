"""Material-point experiments on a homogeneous specimen.

A homogeneous cube (3-D) or plane-strain square (2-D) is driven by a
prescribed electric field and a prescribed stress, both entering through
the load functional. The poling axis is the last coordinate axis, so the
"3" columns of the curve table refer to z in 3-D and to y in 2-D.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import algebra, constitutive
from .constitutive import Law, MaterialParams, SATURATION_MARGIN
from .vi_core import DEFAULT_TOL, Schedule, Trajectory, run_schedule

CURVE_COLUMNS = ("step", "t", "E3", "T33", "D3", "P3", "S33", "absP")


class PointProblem:
    """Incremental problem of one material point in nondimensional coordinates.

    Strain is scaled by sqrt(E0 P0 / E_Y), D and P by P0 and energies by
    E0 P0, so that all residual entries are of comparable size.
    """

    def __init__(self, params: MaterialParams, dim: int = 3):
        self.params = params
        self.dim = dim
        self.nv = algebra.voigt_size(dim)
        self.size = self.nv + 2 * dim
        self.energy_scale = params.E0 * params.P0
        strain_scale = np.sqrt(self.energy_scale / params.E_Y)
        self.scale = np.concatenate([np.full(self.nv, strain_scale), np.full(2 * dim, params.P0)])
        self.p_slice = slice(self.nv + dim, self.size)
        self.axis = dim - 1
        self.axial_voigt = dim - 1

    def to_physical(self, x) -> np.ndarray:
        return np.asarray(x) * self.scale

    def from_physical(self, w) -> np.ndarray:
        return np.asarray(w) / self.scale

    def state(self, x, x_prev=None) -> constitutive.PointState:
        w = self.to_physical(x)
        p_prev = None if x_prev is None else self.to_physical(x_prev)[self.p_slice]
        return constitutive.PointState.from_vector(w, self.dim, p_prev)

    def _increment(self, x, x_prev):
        return (np.asarray(x)[self.p_slice] - np.asarray(x_prev)[self.p_slice]) * self.params.P0

    def energy(self, x, x_prev, load) -> float:
        psi, _ = constitutive.energy_derivatives(self.to_physical(x), self.params, self.dim, order=1)
        diss, _, _ = constitutive.regularized_dissipation(self._increment(x, x_prev), self.params)
        return float((psi + diss) / self.energy_scale - np.dot(load, x))

    def residual(self, x, x_prev, load) -> np.ndarray:
        _, grad = constitutive.energy_derivatives(self.to_physical(x), self.params, self.dim, order=1)
        _, dgrad, _ = constitutive.regularized_dissipation(self._increment(x, x_prev), self.params)
        grad = grad.copy()
        grad[self.p_slice] += dgrad
        return grad * self.scale / self.energy_scale - load

    def hessian(self, x, x_prev, load) -> np.ndarray:
        _, _, hess = constitutive.energy_derivatives(self.to_physical(x), self.params, self.dim, order=2)
        _, _, dhess = constitutive.regularized_dissipation(self._increment(x, x_prev), self.params)
        hess = hess.copy()
        hess[self.p_slice, self.p_slice] += dhess
        return hess * np.outer(self.scale, self.scale) / self.energy_scale

    def constraints(self):
        return None

    def polarization_indices(self) -> np.ndarray:
        return np.arange(self.size)[self.p_slice]

    def saturation_guard(self, x) -> bool:
        if self.params.model.law is not Law.SATURATING:
            return True
        p = np.linalg.norm(np.asarray(x)[self.p_slice]) * self.params.P0
        return bool(p < self.params.P0 * (1.0 - SATURATION_MARGIN))

    def physical_load(self, data: dict) -> np.ndarray:
        """Physical load vector (T_applied, E_applied, 0) from schedule data.

        Accepted keys: ``E`` (full vector), ``E3`` (axial field), ``T``
        (stress Voigt vector), ``T33`` (axial normal stress).
        """
        ell = np.zeros(self.size)
        if "T" in data:
            ell[: self.nv] = np.asarray(data["T"], dtype=float)
        if "T33" in data:
            ell[self.axial_voigt] += float(data["T33"])
        if "E" in data:
            ell[self.nv:self.nv + self.dim] = np.asarray(data["E"], dtype=float)
        if "E3" in data:
            ell[self.nv + self.axis] += float(data["E3"])
        return ell

    def load_vector(self, data: dict) -> np.ndarray:
        return self.physical_load(data) * self.scale / self.energy_scale


@dataclass
class PointExperiment:
    params: MaterialParams
    schedule: Schedule
    dim: int = 3
    tol: float = DEFAULT_TOL


@dataclass
class PointRun:
    problem: PointProblem
    trajectory: Trajectory
    table: dict[str, np.ndarray]

    def physical_states(self) -> np.ndarray:
        return np.array([self.problem.to_physical(x) for x in self.trajectory.states])


def curve_table(problem: PointProblem, traj: Trajectory) -> dict[str, np.ndarray]:
    nv, dim = problem.nv, problem.dim
    rows = {k: [] for k in CURVE_COLUMNS}
    for n, (x, t, ell) in enumerate(zip(traj.states, traj.times, traj.loads)):
        w = problem.to_physical(x)
        load = ell * problem.energy_scale / problem.scale
        P = w[nv + dim:]
        rows["step"].append(n)
        rows["t"].append(t)
        rows["E3"].append(load[nv + problem.axis])
        rows["T33"].append(load[problem.axial_voigt])
        rows["D3"].append(w[nv + problem.axis])
        rows["P3"].append(P[problem.axis])
        rows["S33"].append(w[problem.axial_voigt])
        rows["absP"].append(np.linalg.norm(P))
    return {k: np.asarray(v, dtype=float) for k, v in rows.items()}


def run_point(experiment: PointExperiment) -> PointRun:
    problem = PointProblem(experiment.params, experiment.dim)
    traj = run_schedule(problem, experiment.schedule, tol=experiment.tol)
    return PointRun(problem, traj, curve_table(problem, traj))


def write_curve_csv(path, table: dict[str, np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_COLUMNS)
        for i in range(len(table["step"])):
            writer.writerow([int(table["step"][i])] + [repr(float(table[k][i])) for k in CURVE_COLUMNS[1:]])


# --- standard load programs -------------------------------------------------


def poling_cycle(params: MaterialParams, amplitude: float = 1.5, steps: int = 60) -> Schedule:
    """0 -> +A E0 -> -A E0 -> +A E0 with the step count split 1:2:2."""
    q = steps // 5
    e = amplitude * params.E0
    return Schedule.ramps([(q, {"E3": e}), (2 * q, {"E3": -e}), (steps - 3 * q, {"E3": e})])


def virgin_ramp(params: MaterialParams, amplitude: float = 1.5, steps: int = 100) -> Schedule:
    return Schedule.ramps([(steps, {"E3": amplitude * params.E0})])


def depolarization(params: MaterialParams, pole: float = 1.5, pole_steps: int = 15,
                   stress: float = -200e6, stress_steps: int = 20) -> Schedule:
    """Pole with ``pole`` E0 and release, then ramp the axial stress at zero field."""
    e = pole * params.E0
    return Schedule.ramps([
        (pole_steps, {"E3": e, "T33": 0.0}),
        (pole_steps, {"E3": 0.0}),
        (stress_steps, {"T33": stress}),
    ])


# --- independent scalar oracle ----------------------------------------------


@dataclass(frozen=True)
class ScalarOracle:
    """Exact rate-independent evolution of the axial polarization p of a stress-free specimen.

    Eliminating strain and dielectric displacement at zero stress and field
    e along the poling axis leaves the scalar driving force

        ê(e, p) = e + κ p e² - h(p),    κ = d_ax·c^E·d_ax / P0²,

    with h the hardening force of the irreversible energy. p changes only
    while |ê| = E0; the consistency condition is solved by bisection.
    """

    params: MaterialParams
    bisection_tol: float = 1e-12

    @property
    def kappa(self) -> float:
        prm = self.params
        d_ax = np.array([prm.d31, prm.d31, prm.d33, 0.0, 0.0, 0.0])
        return float(d_ax @ algebra.isotropic_stiffness(prm.E_Y, prm.nu) @ d_ax) / prm.P0**2

    def hardening(self, p: float) -> float:
        prm = self.params
        if prm.model.law is Law.QUADRATIC:
            return 2.0 * prm.H0 * p
        a = abs(p)
        c = prm.H0 * prm.P0**prm.m / (2.0 * (prm.m - 1.0))
        return float(np.sign(p) * c * ((prm.P0 - a) ** (1.0 - prm.m) - (prm.P0 + a) ** (1.0 - prm.m)))

    def driving_force(self, e: float, p: float) -> float:
        return e + self.kappa * p * e * e - self.hardening(p)

    def _p_limit(self) -> float:
        if self.params.model.law is Law.SATURATING:
            return self.params.P0 * (1.0 - 1e-14)
        return np.inf

    def _solve(self, e: float, p: float, sign: float) -> float:
        """Root of ê(e, q) = sign E0 for q on the ``sign`` side of p."""
        target = sign * self.params.E0
        lo = p
        width = max(abs(self.params.E0 / self.params.H0), self.params.P0) * 1e-3
        limit = self._p_limit()
        hi = p + sign * width
        while abs(hi) < limit and sign * (self.driving_force(e, hi) - target) > 0:
            width *= 2.0
            hi = p + sign * width
        if abs(hi) >= limit:
            hi = sign * limit
        tol = self.bisection_tol * self.params.P0
        while abs(hi - lo) > tol:
            mid = 0.5 * (lo + hi)
            if sign * (self.driving_force(e, mid) - target) > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def update(self, e: float, p: float) -> float:
        ehat = self.driving_force(e, p)
        if ehat > self.params.E0:
            return self._solve(e, p, 1.0)
        if ehat < -self.params.E0:
            return self._solve(e, p, -1.0)
        return p


def oracle_trace(params: MaterialParams, fields, substeps: int = 20, p0: float = 0.0) -> np.ndarray:
    """Axial polarization after each entry of ``fields`` (piecewise-linear in between)."""
    oracle = ScalarOracle(params)
    p = p0
    e_prev = 0.0
    out = []
    for e in np.asarray(fields, dtype=float):
        for s in range(1, substeps + 1):
            p = oracle.update(e_prev + (e - e_prev) * s / substeps, p)
        out.append(p)
        e_prev = e
    return np.asarray(out)
