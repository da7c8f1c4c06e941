"""Command-line front end: ``ferrovi run <config>``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import point_lab
from .config import RunConfig, parse_config
from .errors import ConfigError, FerroviError, ValidationError
from .fem.mesh import cantilever_beam, patch_square, read_mesh
from .fem.system import FeSystem
from .fem.vtk import write_fields
from .vi_core import Trajectory, run_schedule, solve_step

log = logging.getLogger("ferrovi")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
DEFAULT_SEED = 12345
PROBE_SIZE = 1e-3


def build_problem(config: RunConfig):
    if config.mode == "point":
        return point_lab.PointProblem(config.params, config.geometry["dim"])
    geo = config.geometry
    if geo["mesh"] == "beam":
        mesh = cantilever_beam(geo["length"], geo["height"], geo["nx"], geo["ny"])
    elif geo["mesh"] == "square":
        mesh = patch_square(geo["side"], geo["n"])
    else:
        try:
            mesh = read_mesh(config.mesh_path())
        except ValueError as exc:
            raise ValidationError("path", str(exc)) from None
    return FeSystem(mesh, config.params)


def uniqueness_probe(problem, traj: Trajectory, tol: float, max_iter: int, seed: int) -> float:
    """Re-solve the last step from a perturbed initial guess; returns the distance of the two solutions.

    Only coefficients untouched by the constraint rows are perturbed, so the
    second guess stays on the constraint manifold. The polarization is left
    at its previous value: every step starts with a zero polarization
    increment, inside the smooth core of the regularized dissipation.
    """
    if len(traj) == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    w_prev, w_ref, load = traj.states[-2], traj.states[-1], traj.loads[-1]
    mask = np.ones(w_prev.size, dtype=bool)
    B = problem.constraints()
    if B is not None:
        mask[np.unique(B.tocoo().col)] = False
    mask[problem.polarization_indices()] = False
    delta = np.where(mask, rng.standard_normal(w_prev.size), 0.0) * PROBE_SIZE
    while not problem.saturation_guard(w_prev + delta):
        delta *= 0.5
    w_alt, _ = solve_step(problem, w_prev, load, tol, max_iter, initial=w_prev + delta, step_index=len(traj))
    return float(np.linalg.norm(w_alt - w_ref))


def write_iteration_log(path, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "iteration", "residual", "alpha"])
        for rec in records:
            writer.writerow([rec["step"], rec["iteration"], repr(float(rec["residual"])), repr(float(rec["alpha"]))])


def write_outputs(config: RunConfig, problem, traj: Trajectory, out_dir: Path) -> dict:
    out = config.output
    summary: dict = {"mode": config.mode, "steps": len(traj)}
    if config.mode == "point":
        table = point_lab.curve_table(problem, traj)
        point_lab.write_curve_csv(out_dir / out.curve, table)
        summary["final_absP"] = float(table["absP"][-1])
        return summary
    last = len(traj.states) - 1
    for n in range(last + 1):
        if n % out.vtk_every and n != last:
            continue
        mult = traj.reports[n - 1].multiplier if n > 0 else None
        fields = problem.postprocess(traj.states[n], mult)
        write_fields(out_dir / f"{out.vtk}_{n:04d}.vtk", problem.mesh, fields, title=f"step {n}")
    summary["gauss_law_residual"] = max((float(problem.gauss_law_residuals(x).max()) for x in traj.states[1:]),
                                        default=0.0)
    return summary


def run(config: RunConfig, out_dir: Path | None = None, seed: int = DEFAULT_SEED) -> dict:
    """Run one configuration and write its artifacts; returns the summary.

    Solver errors propagate after the iteration log of the completed part
    has been written.
    """
    out_dir = Path(out_dir if out_dir is not None else Path(config.base_dir) / config.output.dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = build_problem(config)
    log.info("mode=%s unknowns=%d steps=%d tol=%g reg_eps=%g", config.mode, problem.load_vector({}).size,
             sum(s for s, _ in config.segments), config.tol, config.params.reg_eps)
    try:
        traj = run_schedule(problem, config.schedule(), tol=config.tol, max_iter=config.max_iter)
    except FerroviError as exc:
        partial = getattr(exc, "trajectory", None)
        if partial is not None:
            write_iteration_log(out_dir / config.output.log, partial.iteration_log)
        raise
    write_iteration_log(out_dir / config.output.log, traj.iteration_log)
    for n, rep in enumerate(traj.reports, start=1):
        if rep.damping_events:
            log.info("step %d: %d damping events", n, rep.damping_events)
    summary = write_outputs(config, problem, traj, out_dir)
    summary["max_iterations"] = max((r.iterations for r in traj.reports), default=0)
    summary["damping_events"] = sum(r.damping_events for r in traj.reports)
    if config.probe:
        summary["probe_difference"] = uniqueness_probe(problem, traj, config.tol, config.max_iter, seed)
        summary["probe_bound"] = 10.0 * config.tol
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ferrovi", description="Ferroelectric hysteresis by incremental minimization.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a configuration file")
    r.add_argument("config", type=Path)
    r.add_argument("--tol", type=float, help="Newton tolerance (overrides the config)")
    r.add_argument("--reg-eps", type=float, help="dissipation regularization in C/m^2 (overrides the config)")
    r.add_argument("--out-dir", type=Path, help="output directory (overrides the config)")
    r.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed of the uniqueness probe")
    r.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_config(args.config)
        if args.tol is not None:
            if args.tol <= 0:
                raise ValidationError("tol", "must be positive")
            config = replace(config, tol=args.tol)
        if args.reg_eps is not None:
            config = replace(config, params=config.params.with_(reg_eps=args.reg_eps))
        summary = run(config, args.out_dir, args.seed)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except FerroviError as exc:
        step = getattr(exc, "step", None)
        log.error("solver failure at load step %s: %s", step, exc)
        return EXIT_SOLVER
    log.info("done: %s", json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
