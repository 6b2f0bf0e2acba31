import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trapbose.interaction import Potential, matrix_elements
from trapbose.oscillator_basis import build_basis
from trapbose.spectral_solver import (
    PoleError,
    SecularSystem,
    SolverError,
    assemble,
    convergence_sweep,
    energy_shift_quotient,
    find_levels,
    refine_root,
    secular_determinant,
)


def system(p, size=20, l=0, quad_order=None):
    basis = build_basis(l=l, size=size, quad_order=quad_order)
    V = matrix_elements(basis, p)
    return basis, V, assemble(basis, V)


def manual_system(energies, V):
    energies = np.asarray(energies, dtype=float)
    V = np.asarray(V, dtype=float)
    return SecularSystem(0, energies, V)


def test_trivial_system():
    _, _, sys = system(Potential.zero(), size=6)
    for e in (-3.0, 0.2, 2.5, 100.0):
        assert np.array_equal(sys.matrix(e), np.eye(6))
        assert secular_determinant(sys, e).value == 1.0
    sols = find_levels(sys)
    assert [s.energy for s in sols] == list(sys.energies)
    assert all(s.shift == 0 and s.det_residual == 0 and s.eq24_gap == 0 for s in sols)
    assert [s.n1 for s in sols] == list(range(6))


def test_single_function_closed_form():
    basis, V, sys = system(Potential.gaussian(0.3, 1.0), size=1)
    v00 = V.matrix[0, 0]
    (sol,) = find_levels(sys)
    assert sol.energy == pytest.approx(1.5 + v00, abs=1e-12)
    d = 1e-4
    below = secular_determinant(sys, 1.5 + v00 - d)
    above = secular_determinant(sys, 1.5 + v00 + d)
    assert below.sign == -above.sign
    assert below.value == pytest.approx(1 - v00 / (v00 - d), rel=1e-12)
    assert energy_shift_quotient(sol, basis, V, 0) == v00


def test_two_function_closed_form():
    _, V, sys = system(Potential.gaussian(0.2, 1.0), size=2)
    H = sys.hamiltonian
    mean, half = (H[0, 0] + H[1, 1]) / 2, (H[0, 0] - H[1, 1]) / 2
    root = math.hypot(half, H[0, 1])
    sols = find_levels(sys)
    assert abs(sols[0].energy - (mean - root)) < 1e-12
    assert abs(sols[1].energy - (mean + root)) < 1e-12


def test_determinant_tends_to_one_far_away():
    _, _, sys = system(Potential.gaussian(0.2, 1.0), size=10)
    assert abs(secular_determinant(sys, 1e8).value - 1) < 1e-7
    assert abs(secular_determinant(sys, -1e8).value - 1) < 1e-7


def test_pole_guard():
    _, _, sys = system(Potential.gaussian(0.2, 1.0), size=5)
    with pytest.raises(PoleError):
        secular_determinant(sys, 3.5)
    with pytest.raises(PoleError):
        sys.matrix(5.5 + 5e-7)
    secular_determinant(sys, 3.5 + 2e-6)


def test_weak_coupling_first_and_second_order():
    _, V, sys = system(Potential.gaussian(0.01, 1.0), size=20)
    sol = find_levels(sys, 1)[0]
    v = V.matrix
    E0 = sys.energies
    second = sum(v[n, 0] ** 2 / (E0[0] - E0[n]) for n in range(1, 20))
    assert abs(sol.shift - v[0, 0]) / abs(v[0, 0]) < 0.02
    # second-order term accounts for the gap up to third-order corrections
    assert sol.shift - v[0, 0] == pytest.approx(second, rel=0.05)


@settings(max_examples=40, deadline=None)
@given(
    shape=st.sampled_from(["gaussian", "square_well"]),
    g=st.floats(-0.5, 0.5).filter(lambda x: abs(x) > 1e-3),
    width=st.floats(0.5, 2.5),
    size=st.integers(1, 30),
    l=st.integers(0, 3),
)
def test_roots_equal_oracle_eigenvalues(shape, g, width, size, l):
    p = Potential.gaussian(g, width) if shape == "gaussian" else Potential.square_well(g, width)
    _, _, sys = system(p, size=size, l=l)
    sols = find_levels(sys)
    eig = np.linalg.eigvalsh(sys.hamiltonian)
    for s, e in zip(sols, eig):
        if s.status == "ok":
            assert abs(s.energy - e) < 1e-10
        H = sys.hamiltonian
        assert np.max(np.abs(H @ s.coefficients - s.energy * s.coefficients)) < 1e-9
        assert np.linalg.norm(s.coefficients) == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(-20, 20), st.integers(2, 25))
def test_inertia_count_matches_eigenvalues(e, size):
    _, _, sys = system(Potential.square_well(-0.8, 1.3), size=size)
    eig = np.linalg.eigvalsh(sys.hamiltonian)
    if np.min(np.abs(eig - e)) > 1e-9:
        assert sys.count_below(e) == np.count_nonzero(eig < e)


def test_no_spurious_roots_between_poles():
    _, _, sys = system(Potential.gaussian(-0.4, 0.8), size=15)
    sols = find_levels(sys)
    eig = np.linalg.eigvalsh(sys.hamiltonian)
    roots = np.array([s.energy for s in sols])
    edges = np.concatenate([[-50.0], sys.energies + 1e-3, [100.0]])
    for a, b in zip(edges[:-1], edges[1:]):
        assert np.count_nonzero((roots > a) & (roots < b)) == np.count_nonzero((eig > a) & (eig < b))


def test_strong_attraction_below_all_poles():
    _, _, sys = system(Potential.gaussian(-25.0, 1.0), size=15)
    sols = find_levels(sys, 3)
    eig = np.linalg.eigvalsh(sys.hamiltonian)
    assert sols[0].energy < -5
    assert all(abs(s.energy - e) < 1e-10 for s, e in zip(sols, eig))


def test_sign_and_label_conventions():
    _, _, sys = system(Potential.gaussian(0.2, 1.0), size=12)
    sols = find_levels(sys, 5)
    for s in sols:
        K = s.coefficients
        first = K[np.flatnonzero(np.abs(K) > 1e-8)[0]]
        assert first > 0
    assert [s.n1 for s in sols] == [0, 1, 2, 3, 4]
    assert len({s.n1 for s in sols}) == 5


def test_solution_independent_of_quadrature_order():
    p = Potential.gaussian(-0.3, 0.9)
    _, _, a = system(p, size=15, quad_order=15)
    _, _, b = system(p, size=15, quad_order=60)
    for sa, sb in zip(find_levels(a, 4), find_levels(b, 4)):
        assert abs(sa.energy - sb.energy) < 1e-10
        assert np.max(np.abs(sa.coefficients - sb.coefficients)) < 1e-8


def test_degenerate_cluster_is_flagged():
    # diag(1.5, 3.5) + diag(1, -1) = 2.5 I has a double eigenvalue off the poles
    sys = manual_system([1.5, 3.5], [[1.0, 0.0], [0.0, -1.0]])
    sols = find_levels(sys)
    assert [s.status for s in sols] == ["degenerate", "degenerate"]
    assert all(s.energy == pytest.approx(2.5, abs=1e-12) for s in sols)
    assert abs(sols[0].coefficients @ sols[1].coefficients) < 1e-12


def test_root_on_unperturbed_level_is_flagged():
    # third state decouples, so E = 5.5 stays a root sitting on its own pole
    V = [[0.1, 0.05, 0.0], [0.05, 0.2, 0.0], [0.0, 0.0, 0.0]]
    sols = find_levels(manual_system([1.5, 3.5, 5.5], V))
    assert [s.status for s in sols] == ["ok", "ok", "on_shell"]
    assert sols[2].energy == 5.5
    assert math.isnan(sols[2].det_residual)


def test_energy_shift_quotient():
    basis, V, sys = system(Potential.gaussian(0.2, 1.0), size=20)
    sol = find_levels(sys, 1)[0]
    assert abs(energy_shift_quotient(sol, basis, V, 0) - (sol.energy - 1.5)) < 1e-9
    for n in range(1, 4):
        assert abs(energy_shift_quotient(sol, basis, V, n) - (sol.energy - sys.energies[n])) < 1e-9
    basis0, V0, sys0 = system(Potential.zero(), size=4)
    sol0 = find_levels(sys0, 1)[0]
    assert energy_shift_quotient(sol0, basis0, V0, 0) == 0.0
    with pytest.raises(ValueError, match="vanishes"):
        energy_shift_quotient(sol0, basis0, V0, 2)


def test_weak_coupling_scaling_is_quadratic():
    gs = np.geomspace(1e-3, 1e-1, 7)
    residual = []
    for g in gs:
        _, V, sys = system(Potential.gaussian(g, 1.0), size=20)
        residual.append(abs(find_levels(sys, 1)[0].shift - V.matrix[0, 0]))
    slope = np.polyfit(np.log(gs), np.log(residual), 1)[0]
    assert abs(slope - 2) < 0.1


def test_variational_interlacing_of_oracle():
    p = Potential.square_well(-0.4, 1.2)
    previous = None
    for n in range(3, 31):
        _, _, sys = system(p, size=n)
        eig = np.linalg.eigvalsh(sys.hamiltonian)[:3]
        if previous is not None:
            assert np.all(eig <= previous + 1e-12)
        previous = eig


def test_convergence_sweep_tables():
    factory = lambda n: build_basis(size=n)
    flat = convergence_sweep(factory, Potential.zero(), [3, 5, 8], levels=2)
    assert np.all(flat.energies == [[1.5, 3.5]] * 3)
    assert np.all(flat.deltas[1:] == 0)

    gauss = convergence_sweep(factory, Potential.gaussian(0.2, 1.0), list(range(5, 31, 5)), levels=2)
    assert np.all(gauss.deltas[1:] <= 2e-12)
    assert gauss.converged_at() is not None and gauss.converged_at() <= 25

    contact = convergence_sweep(factory, Potential.contact(1.0), list(range(5, 41)))
    assert np.all(contact.deltas[1:] < -1e-4)
    assert contact.converged_at() is None

    with pytest.raises(ValueError):
        convergence_sweep(factory, Potential.zero(), [5, 4])


def test_refine_root_basic():
    root = refine_root(lambda x: x**3 - 2, 0.0, 3.0, tol=1e-13)
    assert abs(root - 2 ** (1 / 3)) < 1e-13
    with pytest.raises(SolverError):
        refine_root(lambda x: x * x + 1, -1.0, 1.0)


def test_assemble_checks_dimensions():
    b5 = build_basis(size=5)
    V4 = matrix_elements(build_basis(size=4), Potential.gaussian(0.1, 1.0))
    with pytest.raises(ValueError):
        assemble(b5, V4)
    V5l1 = matrix_elements(build_basis(l=1, size=5), Potential.gaussian(0.1, 1.0))
    with pytest.raises(ValueError):
        assemble(b5, V5l1)
    _, _, sys = system(Potential.gaussian(0.1, 1.0), size=5)
    with pytest.raises(ValueError):
        find_levels(sys, 6)
