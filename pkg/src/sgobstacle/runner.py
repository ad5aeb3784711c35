"""Experiment configuration, convergence studies and single runs.

Configs are JSON files with nested sections (problem, schedule, solver, mc,
output).  A convergence study walks a refinement schedule, solves the tensor
Galerkin problem per level (warm-started from the previous level), computes
relative errors of the first two moments against the exact solution by
tensor quadrature, and writes a CSV table plus a JSON report.  Reported
``seconds`` cover assembly and solve; error evaluation against the exact
solution is excluded since it is diagnostic only.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fem import _quad_points, _triangle_geometry, evaluate_p1
from .lcp import SolverConfig, solve_lcp
from .mc import mc_run
from .mesh import Mesh, build_uniform_mesh
from .param import ParamGrid, build_param_grid, multilinear_evaluate
from .problems import Problem, get_problem, problem_from_config
from .stats import (ParametricFunction, StatField, _full_blocks, sg_mean,
                    sg_second_moment, sg_variance, tensor_quadrature,
                    write_stat_csv, write_stat_vtk)
from .system import EXPLICIT_LIMIT, SGSystem, assemble_sg

__all__ = [
    "ConfigError",
    "SolverNotConverged",
    "ExperimentConfig",
    "ErrorTable",
    "validate_config",
    "load_config",
    "run_convergence",
    "run_single",
    "run_mc",
    "convergence_errors",
]

log = logging.getLogger("sgobstacle")

TABLE_HEADER = "h,s,eL2m1,ordL2m1,eH1m1,ordH1m1,eL2m2,ordL2m2,eH1m2,ordH1m2,iters,seconds"


class ConfigError(Exception):
    """Invalid configuration; the message lists every problem found."""


class SolverNotConverged(Exception):
    pass


@dataclass(frozen=True)
class Level:
    nx: int
    ny: int
    cells: int


@dataclass
class ExperimentConfig:
    problem: Problem
    mode: str
    levels: list[Level]
    solver: SolverConfig
    dirichlet_mode: str = "exact"
    mc_samples: int = 4096
    mc_seed: int = 0
    mc_level: int = 0
    mc_solver: SolverConfig | None = None
    quad_order: int = 64
    explicit_limit: int = EXPLICIT_LIMIT
    output_dir: str = "out"
    raw: dict = dc_field(default_factory=dict)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    return validate_config(raw)


def _coupled_levels(problem: Problem, spec: dict, errors: list) -> list[Level]:
    h_over_s = spec.get("h_over_s", problem.h_over_s)
    if h_over_s is None:
        errors.append("schedule.coupled needs h_over_s (no problem default)")
        return []
    if not h_over_s > 0.0:
        errors.append(f"schedule.coupled.h_over_s must be positive, got {h_over_s}")
        return []
    m_min = int(spec.get("m_min", 1))
    m_max = int(spec.get("m_max", 4))
    if m_min < 0 or m_max < m_min:
        errors.append("schedule.coupled needs 0 <= m_min <= m_max")
        return []
    span = max(rho.support[1] - rho.support[0] for rho in problem.densities)
    x0, x1, y0, y1 = problem.rect
    levels = []
    for m in range(m_min, m_max + 1):
        cells = 2 ** m
        s = span / cells
        h = h_over_s * s
        nx = (x1 - x0) / h
        ny = (y1 - y0) / h
        if abs(nx - round(nx)) > 1e-9 or abs(ny - round(ny)) > 1e-9:
            errors.append(
                f"coupled level m={m}: h={h!r} does not divide the domain sides")
            continue
        levels.append(Level(nx=int(round(nx)), ny=int(round(ny)), cells=cells))
    return levels


def validate_config(raw: dict) -> ExperimentConfig:
    """Check a parsed config and build the experiment plan.

    Raises ConfigError listing every problem found; unknown top-level keys
    are rejected to catch typos.
    """
    errors: list[str] = []
    known = {"problem", "mode", "parameterization", "dirichlet", "schedule",
             "solver", "mc", "quad_order", "explicit_limit", "output_dir",
             "custom", "name"}
    for key in raw:
        if key not in known:
            errors.append(f"unknown config key {key!r}")

    mode = raw.get("mode", "sg")
    if mode not in ("sg", "mc", "both"):
        errors.append(f"mode must be sg, mc or both, got {mode!r}")
    parameterization = raw.get("parameterization", "exp")
    if parameterization not in ("exp", "xi"):
        errors.append(f"parameterization must be exp or xi, got {parameterization!r}")

    problem = None
    name = raw.get("problem", "example1")
    try:
        if name == "custom":
            if "custom" not in raw:
                raise ValueError("problem 'custom' needs a custom section")
            problem = problem_from_config(raw["custom"])
        else:
            problem = get_problem(name, parameterization)
    except (KeyError, ValueError, TypeError) as exc:
        errors.append(str(exc))

    if problem is not None and mode in ("sg", "both") and not problem.sg_ready:
        errors.append(
            f"problem {problem.name!r} with parameterization "
            f"{parameterization!r} has non-affine fields; Galerkin runs need "
            "affine fields (use parameterization 'exp' or mode 'mc')")

    dirichlet_mode = raw.get("dirichlet", "exact")
    if dirichlet_mode not in ("exact", "zero"):
        errors.append(f"dirichlet must be exact or zero, got {dirichlet_mode!r}")

    levels: list[Level] = []
    schedule = raw.get("schedule", {})
    if not isinstance(schedule, dict):
        errors.append("schedule must be an object")
    elif problem is not None:
        if "levels" in schedule and "coupled" in schedule:
            errors.append("schedule takes either levels or coupled, not both")
        elif "levels" in schedule:
            for entry in schedule["levels"]:
                try:
                    nx, cells = int(entry[0]), int(entry[1])
                except (TypeError, ValueError, IndexError):
                    errors.append(f"bad schedule level {entry!r}, want [nx, cells]")
                    continue
                if nx < 2 or cells < 1:
                    errors.append(f"level [nx={nx}, cells={cells}] needs nx >= 2, cells >= 1")
                    continue
                x0, x1, y0, y1 = problem.rect
                ny = nx * (y1 - y0) / (x1 - x0)
                if abs(ny - round(ny)) > 1e-9:
                    errors.append(f"nx={nx} gives non-integer cell count on the y side")
                    continue
                levels.append(Level(nx=nx, ny=int(round(ny)), cells=cells))
        elif "coupled" in schedule:
            levels = _coupled_levels(problem, schedule["coupled"], errors)
        else:
            errors.append("schedule needs a levels list or a coupled rule")
        if not levels and not errors:
            errors.append("schedule is empty")

    if "solver" not in raw:
        log.warning("no solver section in config, using defaults (%s)",
                    SolverConfig().method)
    solver_raw = dict(raw.get("solver", {}))
    solver = None
    try:
        solver = SolverConfig(**solver_raw)
    except (TypeError, ValueError) as exc:
        errors.append(f"solver: {exc}")

    mc_raw = dict(raw.get("mc", {}))
    mc_samples = int(mc_raw.get("n_samples", 4096))
    mc_seed = int(mc_raw.get("seed", 0))
    mc_level = int(mc_raw.get("level", 0))
    if mc_samples < 1:
        errors.append("mc.n_samples must be at least 1")
    mc_solver = None
    if "solver" in mc_raw:
        try:
            mc_solver = SolverConfig(**mc_raw["solver"])
        except (TypeError, ValueError) as exc:
            errors.append(f"mc.solver: {exc}")
    if levels and not (0 <= mc_level < len(levels)):
        errors.append(f"mc.level {mc_level} outside the schedule (0..{len(levels) - 1})")

    quad_order = int(raw.get("quad_order", 64))
    if quad_order < 2:
        errors.append("quad_order must be at least 2")
    explicit_limit = int(raw.get("explicit_limit", EXPLICIT_LIMIT))

    if errors:
        raise ConfigError("; ".join(errors))

    return ExperimentConfig(
        problem=problem, mode=mode, levels=levels, solver=solver,
        dirichlet_mode=dirichlet_mode, mc_samples=mc_samples, mc_seed=mc_seed,
        mc_level=mc_level, mc_solver=mc_solver, quad_order=quad_order,
        explicit_limit=explicit_limit, output_dir=raw.get("output_dir", "out"),
        raw=raw,
    )


@dataclass
class TableRow:
    h: float
    s: float
    errors: dict  # eL2m1, eH1m1, eL2m2, eH1m2
    orders: dict  # same keys, values may be None
    iters: int
    seconds: float


@dataclass
class ErrorTable:
    rows: list

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(TABLE_HEADER + "\n")
            for row in self.rows:
                cells = [f"{row.h:.10g}", f"{row.s:.10g}"]
                for key in ("eL2m1", "eH1m1", "eL2m2", "eH1m2"):
                    cells.append(f"{row.errors[key]:.6e}")
                    order = row.orders[key]
                    cells.append("" if order is None else f"{order:.4f}")
                cells.append(str(row.iters))
                cells.append(f"{row.seconds:.3f}")
                fh.write(",".join(cells) + "\n")


def convergence_errors(mesh: Mesh, system: SGSystem, u: np.ndarray,
                       exact: ParametricFunction, densities,
                       quad_order: int = 64) -> dict:
    """Relative L2/H1-seminorm errors of the first two moment fields.

    One sweep over the tensor parameter quadrature accumulates the exact
    mean, second moment and their gradients at all spatial quadrature points;
    the discrete moments are P1 fields from the Galerkin coefficients.
    """
    mean_f = sg_mean(system, u).values
    m2_f = sg_second_moment(system, u).values
    pts, shapes, wq = _quad_points(mesh, 5)
    _, area, grads = _triangle_geometry(mesh)
    nt, nq, _ = pts.shape
    flat = pts.reshape(-1, 2)

    def discrete(vals):
        tv = vals[mesh.triangles]
        return tv @ shapes.T, np.einsum("tv,tvd->td", tv, grads)

    mh, gmh = discrete(mean_f)
    m2h, gm2h = discrete(m2_f)

    y_nodes, y_wts = tensor_quadrature(tuple(densities), quad_order)
    em = np.zeros(nt * nq)
    em2 = np.zeros(nt * nq)
    egm = np.zeros((nt * nq, 2))
    egm2 = np.zeros((nt * nq, 2))
    for y, w in zip(y_nodes, y_wts):
        v = np.asarray(exact.value(flat, y))
        g = np.asarray(exact.grad(flat, y))
        em += w * v
        em2 += w * v * v
        egm += w * g
        egm2 += (2.0 * w) * v[:, None] * g

    def l2(diff_tq):
        return float(np.sqrt(np.sum(2.0 * area * (diff_tq ** 2 @ wq))))

    def h1(diff_tqd):
        return float(np.sqrt(np.sum(2.0 * area * np.einsum("tqd,tqd,q->t",
                                                           diff_tqd, diff_tqd, wq))))

    em_t = em.reshape(nt, nq)
    em2_t = em2.reshape(nt, nq)
    egm_t = egm.reshape(nt, nq, 2)
    egm2_t = egm2.reshape(nt, nq, 2)
    return {
        "eL2m1": l2(mh - em_t) / l2(em_t),
        "eH1m1": h1(egm_t - gmh[:, None, :]) / h1(egm_t),
        "eL2m2": l2(m2h - em2_t) / l2(em2_t),
        "eH1m2": h1(egm2_t - gm2h[:, None, :]) / h1(egm2_t),
    }


def _interpolate_solution(old_system: SGSystem, u_old: np.ndarray,
                          new_mesh: Mesh, new_grid: ParamGrid) -> np.ndarray:
    """Transfer a tensor solution to a finer level (warm start)."""
    blocks = _full_blocks(old_system, u_old)
    y_new = new_grid.nodes()
    interp = multilinear_evaluate(old_system.grid, blocks, y_new)
    x_int = new_mesh.nodes[new_mesh.interior]
    out = np.empty((new_grid.n_nodes, len(new_mesh.interior)))
    for j in range(new_grid.n_nodes):
        out[j] = evaluate_p1(old_system.mesh, interp[j], x_int)
    return out.reshape(-1)


def _solve_level(cfg: ExperimentConfig, level: Level, warm_from=None):
    problem = cfg.problem
    mesh = build_uniform_mesh(problem.rect, level.nx, level.ny)
    grid = build_param_grid(problem.densities, level.cells)
    dirichlet = problem.dirichlet if cfg.dirichlet_mode == "exact" else None
    t0 = time.perf_counter()
    system = assemble_sg(mesh, grid, problem.fields["a"], problem.fields["f"],
                         problem.fields["g"], dirichlet,
                         explicit_limit=cfg.explicit_limit)
    x0 = None
    if warm_from is not None:
        x0 = _interpolate_solution(warm_from[0], warm_from[1], mesh, grid)
    u, report = solve_lcp(system, system.obs, cfg.solver, x0=x0)
    seconds = time.perf_counter() - t0
    return mesh, grid, system, u, report, seconds


def run_convergence(cfg: ExperimentConfig, write: bool = True):
    """Walk the schedule, build the error table, write table.csv and report.json.

    Returns (ErrorTable, reports).  Raises SolverNotConverged after writing
    outputs if any level failed.
    """
    problem = cfg.problem
    if problem.exact is None:
        raise ConfigError(f"problem {problem.name!r} has no exact solution; "
                          "convergence errors are unavailable")
    rows = []
    reports = []
    prev = None
    prev_row = None
    failed = []
    for k, level in enumerate(cfg.levels):
        mesh, grid, system, u, report, seconds = _solve_level(cfg, level, prev)
        errs = convergence_errors(mesh, system, u, problem.exact,
                                  problem.densities, cfg.quad_order)
        h = mesh.cell_side()
        s = grid.s
        orders = {}
        for key, e in errs.items():
            if prev_row is None:
                orders[key] = None
            else:
                ratio = prev_row.h / h if abs(prev_row.h - h) > 1e-14 else prev_row.s / s
                orders[key] = float(np.log(prev_row.errors[key] / e) / np.log(ratio))
        row = TableRow(h=h, s=s, errors=errs, orders=orders,
                       iters=report.iterations, seconds=seconds)
        rows.append(row)
        prev_row = row
        reports.append({"level": k, "nx": level.nx, "cells": level.cells,
                        "I": system.n_spatial, "J": system.n_param,
                        **report.as_dict()})
        log.info("level %d: nx=%d cells=%d IJ=%d eL2m1=%.4e eH1m1=%.4e "
                 "iters=%d (%.2fs)", k, level.nx, level.cells, system.n,
                 errs["eL2m1"], errs["eH1m1"], report.iterations, seconds)
        if not report.converged:
            failed.append(k)
        prev = (system, u)
    table = ErrorTable(rows=rows)
    if write:
        os.makedirs(cfg.output_dir, exist_ok=True)
        table.to_csv(os.path.join(cfg.output_dir, "table.csv"))
        with open(os.path.join(cfg.output_dir, "report.json"), "w") as fh:
            json.dump({"problem": problem.name, "mode": cfg.mode,
                       "levels": reports}, fh, indent=2)
    if failed:
        raise SolverNotConverged(f"levels {failed} did not converge")
    return table, reports


def _write_fields(cfg: ExperimentConfig, system: SGSystem, u: np.ndarray,
                  tag: str) -> dict:
    mean = sg_mean(system, u)
    var = sg_variance(system, u)
    os.makedirs(cfg.output_dir, exist_ok=True)
    paths = {}
    for fld in (mean, var):
        base = os.path.join(cfg.output_dir, f"{tag}_{fld.name}")
        write_stat_csv(fld, base + ".csv")
        paths[fld.name] = base + ".csv"
    write_stat_vtk([mean, var], os.path.join(cfg.output_dir, f"{tag}.vtk"))
    paths["vtk"] = os.path.join(cfg.output_dir, f"{tag}.vtk")
    return paths


def run_single(cfg: ExperimentConfig, level_index: int):
    """Solve one schedule level, write mean/variance exports and a report."""
    if not (0 <= level_index < len(cfg.levels)):
        raise ConfigError(f"level {level_index} outside the schedule "
                          f"(0..{len(cfg.levels) - 1})")
    level = cfg.levels[level_index]
    mesh, grid, system, u, report, seconds = _solve_level(cfg, level)
    tag = f"{cfg.problem.name}_level{level_index}"
    paths = _write_fields(cfg, system, u, tag)
    payload = {
        "problem": cfg.problem.name,
        "level": level_index,
        "nx": level.nx, "cells": level.cells,
        "I": system.n_spatial, "J": system.n_param,
        "seconds": seconds,
        "solver": report.as_dict(),
        "outputs": paths,
    }
    if cfg.problem.exact is not None:
        payload["errors"] = convergence_errors(mesh, system, u, cfg.problem.exact,
                                               cfg.problem.densities, cfg.quad_order)
    with open(os.path.join(cfg.output_dir, f"{tag}_report.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
    if not report.converged:
        raise SolverNotConverged(f"level {level_index} did not converge "
                                 f"(residual {report.residual:.3e})")
    return system, u, report, payload


def run_mc(cfg: ExperimentConfig):
    """Monte Carlo run at the configured level; mode 'both' adds a Galerkin
    run on the same mesh and reports the discrepancy and timing ratio."""
    problem = cfg.problem
    level = cfg.levels[cfg.mc_level]
    mesh = build_uniform_mesh(problem.rect, level.nx, level.ny)
    dirichlet = problem.dirichlet if cfg.dirichlet_mode == "exact" else None
    solver = cfg.mc_solver if cfg.mc_solver is not None else cfg.solver
    t0 = time.perf_counter()
    result = mc_run(mesh, problem.fields, problem.densities, cfg.mc_samples,
                    cfg.mc_seed, solver, dirichlet)
    mc_seconds = time.perf_counter() - t0

    mean = StatField(mesh=mesh, name="mean", values=result.mean)
    var = StatField(mesh=mesh, name="variance",
                    values=np.maximum(result.variance(), 0.0))
    os.makedirs(cfg.output_dir, exist_ok=True)
    tag = f"{problem.name}_mc"
    paths = {}
    for fld in (mean, var):
        base = os.path.join(cfg.output_dir, f"{tag}_{fld.name}")
        write_stat_csv(fld, base + ".csv")
        paths[fld.name] = base + ".csv"
    write_stat_vtk([mean, var], os.path.join(cfg.output_dir, f"{tag}.vtk"))
    timing_path = os.path.join(cfg.output_dir, f"{tag}_timing.csv")
    with open(timing_path, "w") as fh:
        fh.write("phase,seconds\n")
        for phase, secs in result.timings.items():
            fh.write(f"{phase},{secs:.6f}\n")
        fh.write(f"total,{mc_seconds:.6f}\n")

    payload = {
        "problem": problem.name,
        "n_samples": cfg.mc_samples,
        "seed": cfg.mc_seed,
        "n_failed": result.n_failed,
        "level": cfg.mc_level,
        "nx": level.nx,
        "mc_seconds": mc_seconds,
        "outputs": paths,
    }
    if cfg.mode == "both":
        t1 = time.perf_counter()
        _, _, system, u, report, _ = _solve_level(cfg, level)
        sg_mean_f = sg_mean(system, u)
        sg_seconds = time.perf_counter() - t1
        gap = float(np.max(np.abs(sg_mean_f.values - mean.values)))
        payload["sg_seconds"] = sg_seconds
        payload["mean_max_gap"] = gap
        payload["sg_converged"] = report.converged
        log.info("mc %.2fs vs sg %.2fs, mean gap %.3e", mc_seconds, sg_seconds, gap)
    with open(os.path.join(cfg.output_dir, f"{tag}_report.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
    return result, payload
