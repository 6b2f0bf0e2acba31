"""Perturbed radial wavefunctions u(r) = sum_n K_n R_n(r) and their observables."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .interaction import Potential, project_radial
from .oscillator_basis import RadialBasis, effective_radial_potential
from .spectral_solver import SpectralSolution

DEFAULT_POINTS = 600
DEFAULT_RMAX = 8.0
NODE_TOL = 1e-10
MIN_POINTS_PER_LENGTH = 200


@dataclass(frozen=True)
class RadialFunction:
    """Samples of a reduced radial function on an ascending grid starting at 0."""

    r: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    n1: int
    l: int
    energy: float
    normalization: str = "unit-L2"

    def norm(self) -> float:
        return float(np.trapezoid(self.u**2, self.r))


def default_grid(points: int = DEFAULT_POINTS, r_max: float = DEFAULT_RMAX) -> np.ndarray:
    return np.linspace(0.0, r_max, points)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("grid must be a one-dimensional array with at least two points")
    if grid[0] != 0.0:
        raise ValueError("grid must start at r = 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending")
    return grid


def reconstruct(sol: SpectralSolution, basis: RadialBasis, grid=None) -> RadialFunction:
    """Sample u(r) = sum_n K_n R_n(r) on ``grid`` (default 600 points on [0, 8b])."""
    grid = _check_grid(default_grid() if grid is None else grid)
    K = sol.coefficients
    if len(K) != basis.size:
        raise ValueError(f"solution has {len(K)} coefficients, basis has {basis.size} functions")
    u = K @ basis.values(grid)
    u[0] = 0.0
    for arr in (grid, u):
        arr.setflags(write=False)
    return RadialFunction(grid, u, sol.n1, basis.l, sol.energy)


def count_nodes(f: RadialFunction, tol: float = NODE_TOL) -> int:
    """Sign changes of u on (0, r_max); samples with |u| < tol are skipped."""
    density = (len(f.r) - 1) / (f.r[-1] - f.r[0])
    if density < MIN_POINTS_PER_LENGTH / 2.7:
        # 600 points on [0, 8] is the reference density
        warnings.warn(f"grid has only {density:.0f} points per oscillator length; nodes may be missed")
    u = f.u[1:]
    signs = np.sign(u[np.abs(u) >= tol])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def observable_moments(f: RadialFunction, powers) -> list[float]:
    """<r^p> = int u^2 r^p dr by the trapezoid rule on the sample grid."""
    r_max = f.r[-1]
    out = []
    for p in powers:
        out.append(float(np.trapezoid(f.u**2 * f.r**p, f.r)))
        # Gaussian tail: int_R^inf r^p e^{-r^2} dr ~ R^(p-1) e^{-R^2} / 2
        tail = f.u[-1] ** 2 * r_max ** (p - 1) / 2 if r_max > 0 else 0.0
        if tail > 1e-8:
            warnings.warn(f"grid truncation at r = {r_max:g} leaves an estimated {tail:.2e} of <r^{p}>")
    return out


def second_derivative(u: np.ndarray, h: float) -> np.ndarray:
    """Five-point central second difference at interior points 2..n-3."""
    return (-u[:-4] + 16 * u[1:-3] - 30 * u[2:-2] + 16 * u[3:-1] - u[4:]) / (12 * h * h)


def schrodinger_residual(f: RadialFunction, p: Potential) -> np.ndarray:
    """-(1/2) u'' + (V_l + v - E) u at interior points of a uniform grid.

    Oscillator units: -(1/m) d^2/dr^2 becomes -(1/2) d^2/dr^2 with mu = 1.
    """
    h = f.r[1] - f.r[0]
    if not np.allclose(np.diff(f.r), h, rtol=1e-9, atol=0):
        raise ValueError("schrodinger_residual needs a uniform grid")
    r = f.r[2:-2]
    u = f.u[2:-2]
    v = project_radial(p, f.l)(r)
    return -0.5 * second_derivative(f.u, h) + (effective_radial_potential(f.l, r) + v - f.energy) * u
