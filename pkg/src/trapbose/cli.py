"""Command line front end: ``trapbose solve|sweep|converge --config PATH``.

Exit status is 0 on success, 2 on a configuration error (nothing is
written) and 3 on a solver failure (``error.json`` is written to the output
directory).
"""

from __future__ import annotations

import argparse
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, RunConfig, load_config, sweep_key
from .export import (
    line_chart_svg,
    solution_record,
    write_csv,
    write_json,
    write_levels_csv,
    write_wavefunction_csv,
)
from .interaction import matrix_elements
from .oscillator_basis import QuadratureError, build_basis
from .spectral_solver import ConvergenceTable, SolverError, assemble, find_levels
from .wavefunction import default_grid, reconstruct

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class RunFailure(RuntimeError):
    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


@dataclass
class LevelRun:
    basis: object
    interaction: object
    solutions: list


def solve_levels(cfg: RunConfig, count: int, N: int | None = None, overrides: dict | None = None,
                 strict: bool = True) -> LevelRun:
    """Build basis and interaction from ``cfg`` and solve for ``count`` levels."""
    N = cfg.N if N is None else N
    Q = cfg.Q if cfg.Q is not None and cfg.Q >= N else None
    try:
        basis = build_basis(cfg.trap(), cfg.l, N, Q)
        V = matrix_elements(basis, cfg.potential_osc(overrides))
        solutions = find_levels(assemble(basis, V), count)
    except (SolverError, QuadratureError) as exc:
        raise RunFailure(str(exc)) from exc
    flagged = [s for s in solutions if s.status != "ok"]
    if strict and flagged:
        raise RunFailure(
            "solver flagged levels: " + ", ".join(f"{s.index} ({s.status})" for s in flagged),
            {"levels": [solution_record(s) for s in solutions]},
        )
    return LevelRun(basis, V, solutions)


def _versions() -> dict:
    return {
        "trapbose": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _run_record(command: str, cfg: RunConfig, summary: dict) -> dict:
    return {"command": command, "config": cfg.to_dict(), "versions": _versions(), "summary": summary}


def cmd_solve(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    run = solve_levels(cfg, cfg.levels)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in cfg.formats:
        write_levels_csv(out / "levels.csv", run.solutions)
    grid = default_grid(cfg.grid_points, cfg.r_max)
    waves = {k: reconstruct(run.solutions[k], run.basis, grid) for k in cfg.wavefunctions}
    for k, f in waves.items():
        if "csv" in cfg.formats:
            write_wavefunction_csv(out / f"wavefunction_{k}.csv", f)
    if "json" in cfg.formats:
        write_json(out / "levels.json", [solution_record(s) for s in run.solutions])
    if "svg" in cfg.formats and waves:
        svg = line_chart_svg(grid, {f"level {k}": f.u for k, f in waves.items()}, "r / b", "u(r)")
        (out / "wavefunctions.svg").write_text(svg)
    summary = {"levels": [{"index": s.index, "E_over_hw": s.energy, "status": s.status}
                          for s in run.solutions]}
    write_json(out / "run.json", _run_record("solve", cfg, summary))
    return EXIT_OK


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def cmd_sweep(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    var = cfg.sweep_variable
    if var is None:
        raise ConfigError("sweep", "the sweep command needs a [sweep] section")
    levels = cfg.sweep_levels
    key = sweep_key(cfg)

    def point(value):
        try:
            if var == "N":
                run = solve_levels(cfg, levels, N=int(value))
            else:
                run = solve_levels(cfg, levels, overrides={key: value})
        except RunFailure as exc:
            return value, str(exc), None
        V = run.interaction.matrix
        return value, "ok", [(s.energy, s.shift, V[s.n1, s.n1]) for s in run.solutions]

    results = _map(point, cfg.sweep_values, jobs)
    header = [var, "status"]
    for k in range(levels):
        header += [f"E{k}_over_hw", f"shift{k}_over_hw", f"first_order{k}_over_hw"]
    rows = []
    for value, status, data in results:
        row = [value, "ok" if data is not None else "error"]
        for k in range(levels):
            row += list(data[k]) if data is not None else [float("nan")] * 3
        rows.append(row)
    succeeded = sum(data is not None for _, _, data in results)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in cfg.formats:
        write_csv(out / "sweep.csv", header, rows)
    if "svg" in cfg.formats:
        series = {f"E{k}": [r[2 + 3 * k] for r in rows] for k in range(levels)}
        (out / "sweep.svg").write_text(
            line_chart_svg([r[0] for r in rows], series, var, "E / hbar omega"))
    summary = {
        "succeeded": succeeded,
        "failed": [{"value": v, "error": s} for v, s, d in results if d is None],
    }
    write_json(out / "run.json", _run_record("sweep", cfg, summary))
    if succeeded == 0:
        raise RunFailure("every sweep point failed", summary)
    return EXIT_OK


def cmd_converge(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    if not cfg.ladder:
        raise ConfigError("converge", "the converge command needs a [converge] section")
    levels = cfg.converge_levels
    runs = _map(lambda n: solve_levels(cfg, levels, N=n), cfg.ladder, jobs)
    table = ConvergenceTable(tuple(cfg.ladder), np.array([[s.energy for s in r.solutions] for r in runs]))
    flags = table.converged_rows(cfg.epsilon)
    deltas = table.deltas
    header = ["N"] + [f"E{k}_over_hw" for k in range(levels)] + [f"delta{k}" for k in range(levels)]
    header.append("converged")
    rows = []
    for i, n in enumerate(table.sizes):
        rows.append([n, *table.energies[i], *deltas[i], int(flags[i])])
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in cfg.formats:
        write_csv(out / "converge.csv", header, rows)
    if "svg" in cfg.formats:
        series = {f"E{k}": table.energies[:, k] for k in range(levels)}
        (out / "converge.svg").write_text(line_chart_svg(table.sizes, series, "N", "E / hbar omega"))
    summary = {"converged_at": table.converged_at(cfg.epsilon), "epsilon": cfg.epsilon}
    write_json(out / "run.json", _run_record("converge", cfg, summary))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "converge": cmd_converge}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trapbose",
        description="Perturbed levels of two trapped bosons from the secular determinant.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="INI config file or a previous run.json")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps/ladders")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.jobs < 1:
            raise ConfigError("--jobs", f"must be positive, got {args.jobs}")
        if args.out:
            cfg = replace(cfg, output_dir=args.out)
        out = Path(cfg.output_dir)
        return COMMANDS[args.command](cfg, out, args.jobs)
    except ConfigError as exc:
        print(f"trapbose: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunFailure as exc:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "error.json", {"command": args.command, "error": str(exc), "details": exc.details})
        print(f"trapbose: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
