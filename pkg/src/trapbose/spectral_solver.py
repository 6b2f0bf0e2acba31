"""Perturbed levels from the vanishing of the truncated secular determinant.

Expanding u = sum_n K_n R_n and inserting it in the separable integral
equation gives the homogeneous system

    (E - E0_n) K_n = sum_m V_nm K_m,    n = 0 .. N-1,

written here as M(E) K = 0 with M_nm(E) = delta_nm - V_nm / (E - E0_n).
Nontrivial K exist where det M(E) = 0.  det M has simple poles at the
unperturbed energies; roots are isolated by Sylvester inertia counts of
E - H (H = diag(E0) + V, which never has poles) and then refined on
det M itself by safeguarded bisection/secant.  A dense symmetric eigensolver
on H is the independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.linalg import eigh
from scipy.linalg.lapack import dsytrf
from scipy.optimize import linear_sum_assignment

from .interaction import InteractionMatrix, Potential, matrix_elements
from .oscillator_basis import RadialBasis

POLE_GUARD = 1e-6
ROOT_TOL = 1e-13
CLUSTER_TOL = 1e-8


class SolverError(RuntimeError):
    """Root finding failed (no bracket, or a level escaped the search window)."""


class PoleError(ValueError):
    """Energy lies within the guard band of an unperturbed level."""


class Determinant(NamedTuple):
    sign: float
    log_abs: float

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(min(self.log_abs, 700.0))


@dataclass(frozen=True)
class SecularSystem:
    """Truncated homogeneous system for one l channel, in hbar*omega units."""

    l: int
    energies: np.ndarray = field(repr=False)
    interaction: np.ndarray = field(repr=False)
    potential: Potential | None = None
    pole_guard: float = POLE_GUARD

    @property
    def size(self) -> int:
        return len(self.energies)

    @property
    def is_trivial(self) -> bool:
        return not np.any(self.interaction)

    @property
    def hamiltonian(self) -> np.ndarray:
        return np.diag(self.energies) + self.interaction

    def check_energy(self, energy: float):
        gap = np.min(np.abs(energy - self.energies))
        if gap < self.pole_guard:
            raise PoleError(
                f"E = {energy!r} lies within {self.pole_guard:g} of an unperturbed level"
            )

    def matrix(self, energy: float) -> np.ndarray:
        """M(E) = I - V / (E - E0_row)."""
        self.check_energy(energy)
        return np.eye(self.size) - self.interaction / (energy - self.energies)[:, None]

    def count_below(self, energy: float) -> int:
        """Number of roots of det M strictly below ``energy``.

        Sylvester inertia of E - H from a Bunch-Kaufman factorization.
        """
        a = energy * np.eye(self.size) - self.hamiltonian
        ldu, ipiv, info = dsytrf(a, lower=1)
        if info < 0:  # pragma: no cover - argument error inside LAPACK
            raise SolverError(f"dsytrf failed with info={info}")
        positive = 0
        k = 0
        while k < self.size:
            if ipiv[k] > 0:
                positive += ldu[k, k] > 0
                k += 1
            else:
                d11, d22, d21 = ldu[k, k], ldu[k + 1, k + 1], ldu[k + 1, k]
                det = d11 * d22 - d21 * d21
                if det < 0:
                    positive += 1
                elif d11 + d22 > 0:
                    positive += 2
                k += 2
        # positive eigenvalues of E - H are eigenvalues of H below E
        return int(positive)


@dataclass(frozen=True)
class SpectralSolution:
    """One perturbed level of the truncated system.

    ``coefficients`` is K with unit 2-norm and its first significant
    component positive.  ``status`` is ``"ok"``, ``"degenerate"`` (member of
    a root cluster closer than the cluster tolerance) or ``"on_shell"`` (root
    inside a pole guard band, energy taken from the oracle).
    """

    index: int
    n1: int
    l: int
    energy: float
    unperturbed_energy: float
    coefficients: np.ndarray = field(repr=False)
    det_residual: float
    oracle_gap: float
    eq24_gap: float
    eq24_reference: int
    eigen_residual: float
    size: int
    status: str = "ok"

    @property
    def shift(self) -> float:
        return self.energy - self.unperturbed_energy


def assemble(basis: RadialBasis, V: InteractionMatrix, pole_guard: float = POLE_GUARD) -> SecularSystem:
    if basis.size != V.size:
        raise ValueError(f"basis size {basis.size} does not match interaction size {V.size}")
    if basis.l != V.l:
        raise ValueError(f"basis channel l={basis.l} does not match interaction l={V.l}")
    energies = basis.energies.copy()
    interaction = np.array(V.matrix, dtype=float)
    energies.setflags(write=False)
    interaction.setflags(write=False)
    return SecularSystem(basis.l, energies, interaction, V.potential, pole_guard)


def secular_determinant(sys: SecularSystem, energy: float) -> Determinant:
    """det M(E) as (sign, log|det|) from a partially pivoted LU."""
    sign, log_abs = np.linalg.slogdet(sys.matrix(energy))
    return Determinant(float(sign), float(log_abs))


def oracle_levels(sys: SecularSystem):
    """Eigenvalues and eigenvectors of diag(E0) + V, ascending."""
    return eigh(sys.hamiltonian)


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    vec = vec / np.linalg.norm(vec)
    significant = np.flatnonzero(np.abs(vec) > 1e-8 * np.max(np.abs(vec)))
    if vec[significant[0]] < 0:
        vec = -vec
    return vec


def _outer_bracket(sys: SecularSystem, count: int) -> tuple[float, float]:
    # grow downward (strong attraction) and upward until the window holds
    # every root we need
    lo = sys.energies[0] - 1.0
    step = 1.0
    for _ in range(200):
        if sys.count_below(lo) == 0:
            break
        step *= 2.0
        lo -= step
    else:
        raise SolverError("lowest level escaped the downward search window")
    hi = sys.energies[-1] + 1.0
    step = 1.0
    for _ in range(200):
        if sys.count_below(hi) >= count:
            break
        step *= 2.0
        hi += step
    else:
        raise SolverError("upper search window failed to enclose the requested levels")
    return lo, hi


def _isolate(sys: SecularSystem, lo: float, hi: float, count: int, cluster_tol: float):
    """Intervals (a, b, k, m) holding roots k..k+m-1 and nothing else."""
    out = []
    stack = [(lo, sys.count_below(lo), hi, sys.count_below(hi))]
    while stack:
        a, ca, b, cb = stack.pop()
        if ca >= count or cb == ca:
            continue
        if cb - ca == 1 or b - a < cluster_tol:
            out.append((a, b, ca, cb - ca))
            continue
        mid = 0.5 * (a + b)
        cm = sys.count_below(mid)
        stack.append((mid, cm, b, cb))
        stack.append((a, ca, mid, cm))
    out.sort(key=lambda item: item[2])
    return out


def _pole_free(sys: SecularSystem, a: float, b: float, k: int):
    """Shrink [a, b] (holding root k only) to a sub-bracket clear of pole guards.

    Returns None when the root sits inside a guard band.
    """
    # slack keeps p +- guard outside the band after rounding
    guard = sys.pole_guard * (1 + 1e-6)
    pieces = []
    left = a
    for p in sys.energies:
        if p + guard <= a or p - guard >= b:
            continue
        if p - guard > left:
            pieces.append((left, float(p - guard)))
        left = max(left, float(p + guard))
    if left < b:
        pieces.append((left, b))
    for lo, hi in pieces:
        if sys.count_below(lo) == k and sys.count_below(hi) == k + 1:
            return lo, hi
    return None


def _det_value(sys: SecularSystem, energy: float) -> float:
    return secular_determinant(sys, energy).value


def refine_root(f: Callable[[float], float], a: float, b: float, tol: float = ROOT_TOL,
                max_iter: int = 200) -> float:
    """Root of ``f`` in [a, b] by bisection with secant acceleration.

    Secant steps are taken from the two latest iterates whenever they land
    inside the bracket and the bracket has at least halved over the last two
    steps; otherwise the step is a bisection.  A secant-converged estimate is
    accepted only after a sign check at +-tol/2 confirms it.
    """
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise SolverError(f"no sign change on [{a!r}, {b!r}]")
    x0, f0, x1, f1 = a, fa, b, fb
    width_two_ago = width_one_ago = b - a
    for _ in range(max_iter):
        if b - a <= tol:
            return 0.5 * (a + b)
        x = None
        if f1 != f0 and math.isfinite(f0) and math.isfinite(f1) and (b - a) <= 0.5 * width_two_ago:
            s = x1 - f1 * (x1 - x0) / (f1 - f0)
            if a < s < b:
                x = s
        if x is None:
            x = 0.5 * (a + b)
        fx = f(x)
        if fx == 0:
            return x
        step = abs(x - x1)
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b, fb = x, fx
        x0, f0, x1, f1 = x1, f1, x, fx
        width_two_ago, width_one_ago = width_one_ago, b - a
        if step < tol and a < x - tol / 2 and x + tol / 2 < b:
            left, right = f(x - tol / 2), f(x + tol / 2)
            if np.sign(left) != np.sign(right):
                return x
            if np.sign(left) == np.sign(fx):
                a, fa = x - tol / 2, left
            else:
                b, fb = x + tol / 2, right
    raise SolverError(f"root refinement did not converge on [{a!r}, {b!r}]")


def energy_shift_quotient(sol: SpectralSolution, basis: RadialBasis, V: InteractionMatrix, n: int,
                          min_component: float = 1e-8) -> float:
    """<R_n|v|u> / <R_n|u>, evaluated in coefficient space as (V K)_n / K_n.

    Equals E - E0_n for an exact solution.  Raises ``ValueError`` when K_n is
    too small for the quotient to be meaningful.
    """
    K = sol.coefficients
    if len(K) != basis.size or V.size != basis.size:
        raise ValueError("solution, basis and interaction sizes disagree")
    if not 0 <= n < basis.size:
        raise IndexError(f"reference index {n} outside 0..{basis.size - 1}")
    if abs(K[n]) < min_component:
        raise ValueError(f"<R_{n}|u> vanishes (K_{n} = {K[n]:.3g}); quotient undefined")
    return float(V.matrix[n] @ K / K[n])


def _eq24_check(V: np.ndarray, energies: np.ndarray, energy: float, K: np.ndarray,
                min_component: float = 1e-8):
    for n in np.argsort(-np.abs(K), kind="stable"):
        if abs(K[n]) < min_component:
            break
        quotient = V[n] @ K / K[n]
        return abs(quotient - (energy - energies[n])), int(n)
    return math.nan, -1


def _trivial_levels(sys: SecularSystem, count: int) -> list[SpectralSolution]:
    out = []
    for k in range(count):
        K = np.zeros(sys.size)
        K[k] = 1.0
        K.setflags(write=False)
        e = float(sys.energies[k])
        out.append(SpectralSolution(k, k, sys.l, e, e, K, 0.0, 0.0, 0.0, k, 0.0, sys.size))
    return out


def find_levels(sys: SecularSystem, count: int | None = None, tol: float = ROOT_TOL,
                cluster_tol: float = CLUSTER_TOL) -> list[SpectralSolution]:
    """Lowest ``count`` roots of det M(E) = 0 with their coefficient vectors.

    With V = 0 the unperturbed levels are returned directly.  Coefficient
    vectors come from the oracle eigensolver (the null vector of M(E) at the
    root is the same vector, computed less stably).
    """
    N = sys.size
    count = N if count is None else int(count)
    if not 1 <= count <= N:
        raise ValueError(f"level count must lie in 1..{N}, got {count}")
    if sys.is_trivial:
        return _trivial_levels(sys, count)

    H = sys.hamiltonian
    oracle_vals, oracle_vecs = oracle_levels(sys)
    lo, hi = _outer_bracket(sys, count)

    energies: dict[int, float] = {}
    status: dict[int, str] = {}
    for a, b, k, mult in _isolate(sys, lo, hi, count, cluster_tol):
        if mult > 1:
            for j in range(k, min(k + mult, count)):
                energies[j] = float(oracle_vals[j])
                status[j] = "degenerate"
            continue
        bracket = _pole_free(sys, a, b, k)
        if bracket is None:
            energies[k] = float(oracle_vals[k])
            status[k] = "on_shell"
            continue
        energies[k] = refine_root(lambda e: _det_value(sys, e), *bracket, tol=tol)
        status[k] = "ok"
    if len(energies) < count:
        raise SolverError(f"found {len(energies)} of {count} requested levels")

    vectors = np.array([_fix_sign(oracle_vecs[:, k]) for k in range(count)])
    # unique unperturbed labels by maximal total overlap
    rows, labels = linear_sum_assignment(-(vectors**2))
    label_of = dict(zip(rows, labels))

    solutions = []
    for k in range(count):
        e = energies[k]
        K = vectors[k]
        K.setflags(write=False)
        try:
            det_res = abs(secular_determinant(sys, e).value)
        except PoleError:
            det_res = math.nan
        eq24_gap, ref = _eq24_check(sys.interaction, sys.energies, e, K)
        n1 = int(label_of[k])
        solutions.append(SpectralSolution(
            index=k,
            n1=n1,
            l=sys.l,
            energy=e,
            unperturbed_energy=float(sys.energies[n1]),
            coefficients=K,
            det_residual=det_res,
            oracle_gap=abs(e - float(oracle_vals[k])),
            eq24_gap=float(eq24_gap),
            eq24_reference=ref,
            eigen_residual=float(np.max(np.abs(H @ K - e * K))),
            size=N,
            status=status[k],
        ))
    return solutions


@dataclass(frozen=True)
class ConvergenceTable:
    """Level energies against truncation size."""

    sizes: tuple[int, ...]
    energies: np.ndarray  # (len(sizes), levels)

    @property
    def deltas(self) -> np.ndarray:
        """E(N_i) - E(N_{i-1}); the first row is NaN."""
        d = np.full_like(self.energies, np.nan)
        d[1:] = np.diff(self.energies, axis=0)
        return d

    def converged_rows(self, epsilon: float = 1e-8) -> np.ndarray:
        """True on rows whose delta and previous delta are below ``epsilon`` for all levels."""
        small = np.all(np.abs(self.deltas) < epsilon, axis=1)
        flags = np.zeros(len(self.sizes), dtype=bool)
        flags[2:] = small[2:] & small[1:-1]
        return flags

    def converged_at(self, epsilon: float = 1e-8) -> int | None:
        flags = self.converged_rows(epsilon)
        return int(self.sizes[int(np.argmax(flags))]) if flags.any() else None


def convergence_sweep(basis_factory: Callable[[int], RadialBasis], p: Potential,
                      sizes: Sequence[int], levels: int = 1) -> ConvergenceTable:
    """Solve for the lowest ``levels`` energies at each truncation in ``sizes``."""
    sizes = tuple(int(n) for n in sizes)
    if not sizes:
        raise ValueError("truncation ladder is empty")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"truncation ladder must be increasing, got {sizes}")
    if sizes[0] < levels:
        raise ValueError(f"smallest truncation {sizes[0]} holds fewer than {levels} levels")
    rows = []
    for n in sizes:
        basis = basis_factory(n)
        sys = assemble(basis, matrix_elements(basis, p))
        rows.append([s.energy for s in find_levels(sys, levels)])
    return ConvergenceTable(sizes, np.array(rows))
