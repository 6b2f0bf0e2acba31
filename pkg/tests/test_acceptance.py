"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
"""

import functools
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from trapbose import cli
from trapbose.greens_function import fixed_point_residual, greens_partial_sum, resolvent_residual
from trapbose.interaction import Potential, matrix_elements
from trapbose.oscillator_basis import build_basis
from trapbose.spectral_solver import (
    assemble,
    convergence_sweep,
    energy_shift_quotient,
    find_levels,
)
from trapbose.wavefunction import count_nodes, reconstruct, schrodinger_residual

SEED = 20240611
SIZES = (5, 10, 20, 30)


@functools.lru_cache(maxsize=None)
def random_potentials(count=20, seed=SEED):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        g = rng.choice([-1, 1]) * rng.uniform(0.05, 0.5)
        width = rng.uniform(0.5, 2.0)
        l = int(rng.integers(0, 3))
        p = Potential.gaussian(g, width) if rng.random() < 0.5 else Potential.square_well(g, width)
        out.append((p, l))
    return tuple(out)


@functools.lru_cache(maxsize=None)
def oracle_runs():
    """Every (potential, l, N) case of criterion 1 with its full root list and timing."""
    start = time.perf_counter()
    runs = []
    for p, l in random_potentials():
        for N in SIZES:
            basis = build_basis(l=l, size=N)
            V = matrix_elements(basis, p)
            system = assemble(basis, V)
            runs.append((basis, V, system, find_levels(system)))
    return runs, time.perf_counter() - start


def criterion_1():
    runs, elapsed = oracle_runs()
    worst, count = 0.0, 0
    for _, _, system, sols in runs:
        eig = np.linalg.eigvalsh(system.hamiltonian)
        roots = np.array([s.energy for s in sols])
        if len(roots) != len(eig):
            return False, f"root count {len(roots)} != {len(eig)}"
        worst = max(worst, float(np.max(np.abs(roots - eig))))
        count += len(roots)
    ok = worst < 1e-10 and elapsed < 10
    return ok, f"{count} roots, max |E - eig| = {worst:.2e}, {elapsed:.2f} s"


def criterion_2():
    for l in (0, 1, 2):
        basis = build_basis(l=l, size=12)
        sols = find_levels(assemble(basis, matrix_elements(basis, Potential.zero())))
        for n, s in enumerate(sols):
            if s.energy != 2 * n + l + 1.5:
                return False, f"l={l} n={n}: E = {s.energy!r}"
            if any(x != 0 for x in (s.shift, s.det_residual, s.oracle_gap, s.eq24_gap, s.eigen_residual)):
                return False, f"l={l} n={n}: nonzero residual column"
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "zero.ini"
        cfg.write_text("[basis]\nl = 1\nN = 8\n[potential]\nshape = none\n[solve]\nlevels = 8\n")
        if cli.main(["solve", "--config", str(cfg), "--out", tmp + "/out"]) != 0:
            return False, "CLI solve failed"
        lines = (Path(tmp) / "out" / "levels.csv").read_text().splitlines()
        header = lines[0].split(",")
        for n, line in enumerate(lines[1:]):
            row = dict(zip(header, line.split(",")))
            if float(row["E_over_hw"]) != 2 * n + 2.5:
                return False, f"CSV row {n}: E = {row['E_over_hw']}"
            if any(row[c] != "0" for c in ("shift_over_hw", "det_residual", "oracle_gap", "eq24_gap")):
                return False, f"CSV row {n}: nonzero residual column"
    return True, "l = 0, 1, 2 exact; CSV zero columns exact"


def criterion_3():
    gs = np.geomspace(1e-3, 1e-1, 9)
    gaps, rel = [], None
    for g in gs:
        basis = build_basis(l=0, size=20)
        V = matrix_elements(basis, Potential.gaussian(g, 1.0))
        shift = find_levels(assemble(basis, V), 1)[0].shift
        gaps.append(abs(shift - V.matrix[0, 0]))
        if rel is None:
            rel = abs(shift - V.matrix[0, 0]) / abs(V.matrix[0, 0])
    slope = np.polyfit(np.log(gs), np.log(gaps), 1)[0]
    ok = abs(slope - 2) <= 0.1 and rel < 0.005
    return ok, f"slope = {slope:.4f}, |shift - V00|/V00 at g=1e-3 = {rel:.2e}"


def criterion_4():
    runs, _ = oracle_runs()
    worst, checked = 0.0, 0
    for basis, V, system, sols in runs:
        for s in sols:
            if s.status != "ok":
                continue
            K = np.abs(s.coefficients)
            admissible = np.flatnonzero(K > 1e-8)
            best = min(abs(energy_shift_quotient(s, basis, V, n) - (s.energy - system.energies[n]))
                       for n in admissible)
            worst = max(worst, best)
            checked += 1
    return worst < 1e-9, f"{checked} solutions, worst best-index gap = {worst:.2e}"


def criterion_5():
    runs, _ = oracle_runs()
    fp, res = 0.0, 0.0
    for basis, V, _, sols in runs:
        for s in sols:
            if s.status != "ok":
                continue
            gps = greens_partial_sum(basis, s.energy)
            fp = max(fp, fixed_point_residual(s, gps, V))
            D = resolvent_residual(gps)
            res = max(res, float(np.max(np.abs(D))))
    return fp < 1e-9 and res < 1e-12, f"fixed point {fp:.2e}, resolvent {res:.2e}"


def criterion_6():
    ortho = 0.0
    for l in range(6):
        basis = build_basis(l=l, size=40, quad_order=60)
        ortho = max(ortho, float(np.max(np.abs(basis.gram() - np.eye(40)))))
    nodes_ok = True
    for l in range(4):
        basis = build_basis(l=l, size=11)
        zero = find_levels(assemble(basis, matrix_elements(basis, Potential.zero())))
        nodes_ok &= [count_nodes(reconstruct(s, basis)) for s in zero] == list(range(11))
    worst = 0.0
    for N in (20, 30):
        for sigma in (1.0, 1.5, 2.0):
            for g in (-0.5, -0.2, 0.2, 0.5):
                p = Potential.gaussian(g, sigma)
                basis = build_basis(size=N)
                f = reconstruct(find_levels(assemble(basis, matrix_elements(basis, p)), 1)[0], basis)
                worst = max(worst, float(np.max(np.abs(schrodinger_residual(f, p))) / np.max(np.abs(f.u))))
    ok = ortho < 1e-10 and nodes_ok and worst < 1e-4
    return ok, f"orthonormality {ortho:.2e}, nodes {'ok' if nodes_ok else 'WRONG'}, residual/max|u| {worst:.2e}"


def criterion_7():
    worst, ladders = 0.0, 0
    sizes = list(range(3, 31))
    for p, l in random_potentials():
        eig = []
        for n in sizes:
            basis = build_basis(l=l, size=n)
            eig.append(np.linalg.eigvalsh(assemble(basis, matrix_elements(basis, p)).hamiltonian)[:3])
        worst = max(worst, float(np.max(np.diff(eig, axis=0))))
        table = convergence_sweep(lambda n: build_basis(l=l, size=n), p, sizes, levels=3)
        worst = max(worst, float(np.nanmax(table.deltas)))
        ladders += 1
    return worst <= 1e-12, f"{ladders} ladders N = 3..30, largest upward step {worst:.2e}"


def criterion_8():
    start = time.perf_counter()
    table = convergence_sweep(lambda n: build_basis(size=n), Potential.contact(1.0), list(range(1, 41)))
    steps = table.deltas[1:, 0]
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "contact.ini"
        cfg.write_text("[potential]\nshape = contact\ng_c = 1.0\n[converge]\nstart = 1\nstop = 40\nstep = 1\n")
        code = cli.main(["converge", "--config", str(cfg), "--out", tmp + "/out"])
        flags = [line.rsplit(",", 1)[1] for line in (Path(tmp) / "out" / "converge.csv").read_text().splitlines()[1:]]
    elapsed = time.perf_counter() - start
    ok = (np.all(steps < 0) and table.converged_at() is None and code == 0
          and set(flags) == {"0"} and elapsed < 5)
    return ok, (f"smallest drop {-steps.max():.2e} over N = 1..40, E0(40) = {table.energies[-1, 0]:.6f}, "
                f"no convergence flag, {elapsed:.2f} s")


def criterion_9():
    base = ("[basis]\nN = 20\n[potential]\nshape = square_well\nV0 = -0.4\na = 1.2\n"
            "[solve]\nlevels = 3\nwavefunctions = 0, 2\n"
            "[sweep]\nvariable = V0\nstart = -0.5\nstop = 0.5\nnum = 7\nlevels = 2\n"
            "[converge]\nladder = 5, 10, 20, 30\nlevels = 2\n")
    compared = 0
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "run.ini"
        cfg.write_text(base)
        for command in ("solve", "sweep", "converge"):
            outs = []
            for k, jobs in enumerate((1, 1, 3)):
                out = Path(tmp) / f"{command}{k}"
                if cli.main([command, "--config", str(cfg), "--out", str(out), "--jobs", str(jobs)]) != 0:
                    return False, f"{command} failed"
                outs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
            if not (outs[0] == outs[1] == outs[2]):
                return False, f"{command}: CSV bytes differ"
            compared += len(outs[0])
    return True, f"{compared} CSV files byte-identical over 3 runs (jobs 1, 1, 3)"


CRITERIA = [
    ("1 oracle equivalence", criterion_1),
    ("2 unperturbed exactness", criterion_2),
    ("3 perturbative limit", criterion_3),
    ("4 energy-shift quotient", criterion_4),
    ("5 fixed point and resolvent", criterion_5),
    ("6 basis quality", criterion_6),
    ("7 variational interlacing", criterion_7),
    ("8 contact pathology", criterion_8),
    ("9 determinism", criterion_9),
]


def report(name, fn):
    ok, detail = fn()
    print(f"{'PASS' if ok else 'FAIL'} criterion {name}: {detail}")
    return ok


@pytest.mark.parametrize("name, fn", CRITERIA, ids=[n.split()[0] for n, _ in CRITERIA])
def test_criterion(name, fn):
    assert report(name, fn)


if __name__ == "__main__":
    results = [report(name, fn) for name, fn in CRITERIA]
    sys.exit(0 if all(results) else 1)
