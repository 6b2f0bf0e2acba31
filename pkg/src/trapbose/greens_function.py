"""Spectral Green's function of the unperturbed radial channel.

    g(r, r'; E) = sum_{n < T} R_n(r) R_n(r') / (E - E0_n)

These objects validate the secular solution rather than produce it: at
T = N the spectral sum carries exactly the information already in the
truncated system.  (E - H0) is applied term by term, each R_n being an
eigenfunction of H0, so no numerical differentiation is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interaction import InteractionMatrix
from .oscillator_basis import RadialBasis
from .spectral_solver import POLE_GUARD, PoleError, SpectralSolution


@dataclass(frozen=True)
class GreensPartialSum:
    """First ``terms`` terms of the spectral sum at energy ``energy``."""

    basis: RadialBasis
    energy: float
    terms: int
    pole_guard: float = POLE_GUARD

    def __post_init__(self):
        if not 1 <= self.terms <= self.basis.size:
            raise ValueError(f"term count must lie in 1..{self.basis.size}, got {self.terms}")
        gap = np.min(np.abs(self.energy - self.basis.energies[: self.terms]))
        if gap < self.pole_guard:
            raise PoleError(f"E = {self.energy!r} lies on the unperturbed spectrum")

    @property
    def l(self) -> int:
        return self.basis.l

    @property
    def denominators(self) -> np.ndarray:
        return self.energy - self.basis.energies[: self.terms]

    def __call__(self, r, rp):
        return eval_kernel(self, r, rp)


def greens_partial_sum(basis: RadialBasis, energy: float, terms: int | None = None) -> GreensPartialSum:
    return GreensPartialSum(basis, float(energy), basis.size if terms is None else int(terms))


def eval_kernel(gps: GreensPartialSum, r, rp):
    """g(r, r') for broadcastable arrays of radii (oscillator lengths)."""
    r, rp = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(rp, dtype=float))
    a = gps.basis.values(r, size=gps.terms)
    b = gps.basis.values(rp, size=gps.terms)
    # elementwise product commutes, so swapping r and r' is bit-identical
    shape = (gps.terms,) + (1,) * r.ndim
    out = np.sum(a * b / gps.denominators.reshape(shape), axis=0)
    return out if out.ndim else float(out)


def resolvent_residual(gps: GreensPartialSum, basis: RadialBasis | None = None) -> np.ndarray:
    """D_mn = <R_m|(E - H0) g|R_n> - delta_mn over the whole basis.

    Overlaps come from the basis quadrature, so inside the first ``terms``
    functions D vanishes up to quadrature rounding; outside it is -delta_mn.
    """
    basis = gps.basis if basis is None else basis
    if basis.l != gps.l:
        raise ValueError("basis and Green's function belong to different channels")
    if gps.terms > basis.size:
        raise ValueError(f"term count {gps.terms} exceeds basis size {basis.size}")
    overlap = basis.gram()[:, : gps.terms]
    # (E - H0) R_n = (E - E0_n) R_n cancels each denominator
    factors = (gps.energy - basis.energies[: gps.terms]) / gps.denominators
    return (overlap * factors) @ overlap.T - np.eye(basis.size)


def fixed_point_residual(sol: SpectralSolution, gps: GreensPartialSum, V: InteractionMatrix,
                         basis: RadialBasis | None = None) -> float:
    """max_n |K_n - (V K)_n / (E - E0_n)|: how far u is from int g v u dr'."""
    basis = gps.basis if basis is None else basis
    K = sol.coefficients
    if gps.terms != len(K) or V.size != len(K) or basis.size != len(K):
        raise ValueError("Green's function, interaction and solution sizes disagree")
    if not np.isclose(gps.energy, sol.energy, rtol=0, atol=1e-14 * max(1.0, abs(sol.energy))):
        raise ValueError(f"Green's function built at E={gps.energy!r}, solution has E={sol.energy!r}")
    image = (V.matrix @ K) / gps.denominators
    return float(np.max(np.abs(K - image)))


def kernel_samples(gps: GreensPartialSum, grid) -> np.ndarray:
    """(r, r', g) triples over the tensor grid, row-major in r."""
    grid = np.asarray(grid, dtype=float)
    rr, rp = np.meshgrid(grid, grid, indexing="ij")
    return np.column_stack([rr.ravel(), rp.ravel(), np.ravel(eval_kernel(gps, rr, rp))])
