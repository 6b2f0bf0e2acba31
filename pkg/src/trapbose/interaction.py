"""Central effective interactions and their matrix elements in the radial basis.

Parameters are given in oscillator units: energies in hbar*omega, lengths in
b, and the contact coupling in hbar*omega*b^3.  For a central potential the
angular projection <Y_lm| v |Y_lm> is just v(r), so the radial channel sees
the potential unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .oscillator_basis import (
    DEFAULT_QUADRATURE_MARGIN,
    QuadratureError,
    RadialBasis,
    gauss_laguerre,
    laguerre_table,
)

SHAPES = ("none", "gaussian", "square_well", "contact")

# serialized parameter names per shape: (strength key, range key)
_PARAM_KEYS = {
    "none": (None, None),
    "gaussian": ("g", "sigma"),
    "square_well": ("V0", "a"),
    "contact": ("g_c", None),
}


@dataclass(frozen=True)
class Potential:
    """Shape plus parameters of a central two-body interaction.

    ``strength`` is g (gaussian), V0 (square well) or g_c (contact);
    ``range`` is sigma or the well radius a.  ``scattering_length`` is
    carried along for bookkeeping only.
    """

    shape: str
    strength: float = 0.0
    range: float | None = None
    scattering_length: float | None = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown potential shape {self.shape!r}; expected one of {SHAPES}")
        if not math.isfinite(self.strength):
            raise ValueError(f"potential strength must be finite, got {self.strength!r}")
        _, range_key = _PARAM_KEYS[self.shape]
        if range_key is not None:
            if self.range is None or not (math.isfinite(self.range) and self.range > 0):
                raise ValueError(f"{range_key} must be positive and finite, got {self.range!r}")
        elif self.range is not None:
            raise ValueError(f"{self.shape} potential takes no range parameter")

    @classmethod
    def zero(cls) -> "Potential":
        return cls("none")

    @classmethod
    def gaussian(cls, g: float, sigma: float, scattering_length: float | None = None) -> "Potential":
        """v(r) = g exp(-r^2 / sigma^2)."""
        return cls("gaussian", float(g), float(sigma), scattering_length)

    @classmethod
    def square_well(cls, depth: float, radius: float, scattering_length: float | None = None) -> "Potential":
        """v(r) = V0 for r < a, zero outside.  Negative V0 is attractive."""
        return cls("square_well", float(depth), float(radius), scattering_length)

    @classmethod
    def contact(cls, coupling: float, scattering_length: float | None = None) -> "Potential":
        """Zero-range pseudo-potential g_c delta^3(r)."""
        return cls("contact", float(coupling), None, scattering_length)

    @property
    def is_zero(self) -> bool:
        return self.shape == "none" or self.strength == 0.0

    def scaled(self, factor: float) -> "Potential":
        return Potential(self.shape, self.strength * factor, self.range, self.scattering_length)

    def replace(self, **params) -> "Potential":
        """Copy with serialized parameter names overridden, e.g. ``replace(g=0.1)``."""
        data = self.to_dict()
        data.update(params)
        return Potential.from_dict(data)

    def to_dict(self) -> dict:
        data = {"shape": self.shape}
        strength_key, range_key = _PARAM_KEYS[self.shape]
        if strength_key:
            data[strength_key] = self.strength
        if range_key:
            data[range_key] = self.range
        if self.scattering_length is not None:
            data["scattering_length"] = self.scattering_length
        return data

    @classmethod
    def from_dict(cls, data) -> "Potential":
        data = dict(data)
        shape = data.pop("shape", None)
        if shape not in _PARAM_KEYS:
            raise KeyError(f"shape: expected one of {SHAPES}, got {shape!r}")
        strength_key, range_key = _PARAM_KEYS[shape]
        kwargs = {}
        if strength_key:
            if strength_key not in data:
                raise KeyError(f"{strength_key}: required for {shape} potential")
            kwargs["strength"] = float(data.pop(strength_key))
        if range_key:
            if range_key not in data:
                raise KeyError(f"{range_key}: required for {shape} potential")
            kwargs["range"] = float(data.pop(range_key))
        a_s = data.pop("scattering_length", None)
        kwargs["scattering_length"] = None if a_s is None else float(a_s)
        if data:
            raise KeyError(f"{sorted(data)[0]}: not a parameter of the {shape} potential")
        return cls(shape, **kwargs)


@dataclass(frozen=True)
class RadialProjection:
    """v_l(r) for a central potential, evaluable at any r >= 0."""

    potential: Potential
    l: int

    def __call__(self, r):
        p = self.potential
        r = np.asarray(r, dtype=float)
        if p.shape == "none":
            return np.zeros_like(r)
        if p.shape == "gaussian":
            return p.strength * np.exp(-((r / p.range) ** 2))
        if p.shape == "square_well":
            return np.where(r < p.range, p.strength, 0.0)
        raise ValueError("contact potential has no pointwise radial form")


def project_radial(p: Potential, l: int) -> RadialProjection:
    """Radial projection v_l(r); identical to v(r) for every l."""
    if p.shape == "contact":
        raise ValueError("contact potential is handled analytically by matrix_elements")
    if int(l) != l or l < 0:
        raise ValueError(f"angular momentum must be a non-negative integer, got {l!r}")
    return RadialProjection(p, int(l))


@dataclass(frozen=True)
class InteractionMatrix:
    """V_mn = int R_m v_l R_n dr for one channel, in hbar*omega."""

    l: int
    size: int
    matrix: np.ndarray = field(repr=False)
    potential: Potential
    quad_order: int
    method: str

    def __post_init__(self):
        if self.matrix.shape != (self.size, self.size):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match size {self.size}")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("interaction matrix has non-finite entries")
        self.matrix.setflags(write=False)


def _symmetrize(upper_source: np.ndarray) -> np.ndarray:
    # copy the upper triangle down so V_mn == V_nm bit for bit
    return np.triu(upper_source) + np.triu(upper_source, 1).T


@lru_cache(maxsize=64)
def _laguerre_rule(order: int, alpha: float):
    return gauss_laguerre(order, alpha)


def _gaussian_elements(basis: RadialBasis, p: Potential, order: int) -> np.ndarray:
    # int x^a e^{-c x} L_m L_n dx = c^{-a-1} int y^a e^{-y} L_m(y/c) L_n(y/c) dy,
    # which the Q-point rule integrates exactly for m, n < Q.
    c = 1.0 + 1.0 / p.range**2
    nodes, weights, _ = _laguerre_rule(order, basis.alpha)
    poly = laguerre_table(basis.size, basis.alpha, nodes / c) * basis.norms[:, None]
    mat = 0.5 * (poly * weights) @ poly.T
    return p.strength * c ** (-basis.alpha - 1.0) * mat


def _square_well_elements(basis: RadialBasis, p: Potential, order: int) -> np.ndarray:
    # R_m R_n is smooth on [0, a]; Gauss-Legendre in r converges spectrally
    t, w = np.polynomial.legendre.leggauss(order)
    r = 0.5 * p.range * (t + 1.0)
    w = 0.5 * p.range * w
    vals = basis.values(r)
    return p.strength * (vals * w) @ vals.T


def _legendre_order(basis: RadialBasis, radius: float) -> int:
    return 2 * basis.size + basis.l + DEFAULT_QUADRATURE_MARGIN + int(math.ceil(2 * radius**2))


def quadrature_matrix(basis: RadialBasis, v, order: int | None = None) -> np.ndarray:
    """Matrix of an arbitrary radial function ``v(r)`` with the basis rule.

    Exact only when ``v`` is a low-degree polynomial in r^2; smooth decaying
    potentials converge with the order.
    """
    order = basis.quad_order if order is None else order
    nodes, _, log_weights = _laguerre_rule(order, basis.alpha)
    r = np.sqrt(nodes)
    dr_w = np.exp(log_weights + nodes - math.log(2.0) - (basis.l + 1) * np.log(nodes))
    vals = basis.values(r)
    return (vals * (dr_w * v(r))) @ vals.T


def matrix_elements(basis: RadialBasis, p: Potential, check_tol: float | None = 1e-9) -> InteractionMatrix:
    """Interaction matrix of ``p`` in ``basis``.

    Gaussian entries use the basis Laguerre rule rescaled to absorb the
    Gaussian, which makes them exact.  Square-well entries use Gauss-Legendre
    on [0, a].  The contact potential uses the closed form

        V_mn = g_c / (4 pi) R'_m(0) R'_n(0)

    and is only defined for l = 0.  Quadrature-based entries are recomputed at
    twice the order; a change above ``check_tol`` relative to max|V| raises
    :class:`QuadratureError`.  Pass ``check_tol=None`` to skip the check.
    """
    size = basis.size
    if p.shape == "contact":
        if basis.l != 0:
            raise ValueError("contact potential only acts in the l = 0 channel")
        d = basis.derivative_at_origin()
        mat = p.strength / (4 * math.pi) * np.outer(d, d)
        return InteractionMatrix(basis.l, size, _symmetrize(mat), p, 0, "analytic")
    if p.is_zero:
        return InteractionMatrix(basis.l, size, np.zeros((size, size)), p, 0, "zero")

    if p.shape == "gaussian":
        order = basis.quad_order
        compute, method = _gaussian_elements, "scaled-gauss-laguerre"
    elif p.shape == "square_well":
        order = max(basis.quad_order, _legendre_order(basis, p.range))
        compute, method = _square_well_elements, "gauss-legendre"
    else:  # pragma: no cover - guarded by Potential
        raise ValueError(p.shape)

    mat = compute(basis, p, order)
    if check_tol is not None:
        finer = compute(basis, p, 2 * order)
        scale = np.max(np.abs(finer))
        change = np.max(np.abs(finer - mat)) / scale if scale > 0 else 0.0
        if change > check_tol:
            raise QuadratureError(
                f"{p.shape} matrix elements changed by {change:.3g} (relative) when the "
                f"quadrature order was doubled from {order}; increase the order"
            )
    return InteractionMatrix(basis.l, size, _symmetrize(mat), p, order, method)
