"""Load-stepped runs of the finite-element model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..constitutive import MaterialParams
from ..vi_core import DEFAULT_TOL, MAX_ITER, Schedule, Trajectory, run_schedule
from .mesh import Mesh
from .system import FeSystem


@dataclass
class FemExperiment:
    mesh: Mesh
    params: MaterialParams
    schedule: Schedule
    tol: float = DEFAULT_TOL
    max_iter: int = MAX_ITER


@dataclass
class FemRun:
    system: FeSystem
    trajectory: Trajectory

    def fields(self, step: int) -> dict[str, np.ndarray]:
        """Postprocessed fields after load step ``step`` (0 is the initial state)."""
        mult = self.trajectory.reports[step - 1].multiplier if step > 0 else None
        return self.system.postprocess(self.trajectory.states[step], mult)

    def gauss_law_residual(self) -> float:
        """Largest scaled |∫_T div D| over all elements and converged steps."""
        return max(float(self.system.gauss_law_residuals(x).max()) for x in self.trajectory.states[1:])


def run_fem(experiment: FemExperiment) -> FemRun:
    system = FeSystem(experiment.mesh, experiment.params)
    traj = run_schedule(system, experiment.schedule, tol=experiment.tol, max_iter=experiment.max_iter)
    return FemRun(system, traj)


def top_fiber_profile(system: FeSystem, fields: dict, tag: str = "ins") -> tuple[np.ndarray, np.ndarray]:
    """(x, P_x/P0) of the elements touching the upper ``tag`` boundary, ordered by x."""
    mesh = system.mesh
    edges = mesh.edges_with(tag)
    owners = mesh.edge_owner[edges]
    ymax = mesh.vertices[:, 1].max()
    on_top = np.isclose(mesh.vertices[mesh.edges[edges]][:, :, 1], ymax).all(axis=1)
    elems = owners[on_top]
    elems = elems[np.argsort(system.centroids[elems, 0], kind="stable")]
    return system.centroids[elems, 0], fields["P"][elems, 0] / system.params.P0
