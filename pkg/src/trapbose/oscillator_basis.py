"""Relative-motion oscillator basis for two atoms in a common isotropic trap.

Everything inside the package works in oscillator units, hbar = omega = mu = 1,
where mu = m/2 is the reduced mass.  In these units the Gaussian width is
nu = 1, lengths are measured in b = 1/sqrt(nu) and energies in hbar*omega.
:class:`TrapModel` converts to and from physical units at the boundary.

The reduced radial functions are

    R_nl(r) = N_nl r^(l+1) exp(-r^2/2) L_n^(l+1/2)(r^2),

normalised in dr (not r^2 dr), with the modern Laguerre index n.  The older
labelling L_{n+l+1/2}^{l+1/2} found in some texts refers to the same
polynomial; only the modern form reproduces E_nl = 2n + l + 3/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

DEFAULT_QUADRATURE_MARGIN = 20


class QuadratureError(RuntimeError):
    """Raised when a quadrature rule cannot be built or is inadequate."""


@dataclass(frozen=True)
class TrapModel:
    """Two identical atoms of mass ``mass`` in a trap of frequency ``omega``.

    ``hbar`` defaults to 1; pass the SI value to work in SI units.
    """

    mass: float = 2.0
    omega: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("mass", "omega", "hbar"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    @classmethod
    def oscillator_units(cls) -> "TrapModel":
        """The internal unit system: hbar = omega = mu = 1."""
        return cls(mass=2.0, omega=1.0, hbar=1.0)

    @property
    def reduced_mass(self) -> float:
        return self.mass / 2

    @property
    def total_mass(self) -> float:
        return 2 * self.mass

    @property
    def spring_constant(self) -> float:
        # k in H_rel = p^2/(2 mu) + k r^2
        return self.mass * self.omega**2 / 4

    @property
    def nu(self) -> float:
        return self.reduced_mass * self.omega / self.hbar

    @property
    def length_scale(self) -> float:
        return 1.0 / math.sqrt(self.nu)

    @property
    def energy_scale(self) -> float:
        return self.hbar * self.omega

    def length_to_osc(self, r):
        return np.asarray(r, dtype=float) / self.length_scale

    def length_from_osc(self, r):
        return np.asarray(r, dtype=float) * self.length_scale

    def energy_to_osc(self, e):
        return np.asarray(e, dtype=float) / self.energy_scale

    def energy_from_osc(self, e):
        return np.asarray(e, dtype=float) * self.energy_scale


def laguerre_table(nmax: int, alpha: float, x) -> np.ndarray:
    """Generalized Laguerre polynomials L_0..L_{nmax-1} at ``x``.

    Returns an array of shape ``(nmax,) + x.shape`` built with the upward
    three-term recurrence

        (k+1) L_{k+1} = (2k + 1 + alpha - x) L_k - (k + alpha) L_{k-1}.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax,) + x.shape)
    if nmax == 0:
        return out
    out[0] = 1.0
    if nmax > 1:
        out[1] = 1.0 + alpha - x
    for k in range(1, nmax - 1):
        out[k + 1] = ((2 * k + 1 + alpha - x) * out[k] - (k + alpha) * out[k - 1]) / (k + 1)
    return out


def _laguerre_and_derivative(n: int, alpha: float, x):
    """L_n^(alpha)(x) and its derivative, via x L_n' = n L_n - (n+alpha) L_{n-1}."""
    table = laguerre_table(n + 1, alpha, x)
    ln, lnm1 = table[n], table[n - 1]
    return ln, (n * ln - (n + alpha) * lnm1) / x


def gauss_laguerre(order: int, alpha: float, newton_steps: int = 50):
    """Generalized Gauss-Laguerre rule for the weight x^alpha e^-x on [0, inf).

    Nodes come from the eigenvalues of the symmetric Jacobi matrix of the
    Laguerre recurrence and are then polished by Newton iteration on
    L_order^(alpha), which brings the relative node error down to a few ulp.
    Weights use the closed form

        w_i = Gamma(order + alpha + 1) / (order! x_i [L_order'(x_i)]^2)

    evaluated in log space.

    Returns
    -------
    nodes, weights, log_weights : numpy.ndarray
        ``log_weights`` stays finite where ``weights`` underflows.
    """
    if order < 1:
        raise ValueError(f"quadrature order must be positive, got {order}")
    if alpha <= -1:
        raise ValueError(f"alpha must exceed -1, got {alpha}")
    k = np.arange(order)
    diag = 2.0 * k + alpha + 1.0
    off = np.sqrt(k[1:] * (k[1:] + alpha))
    nodes = eigh_tridiagonal(diag, off, eigvals_only=True)

    if order == 1:
        nodes = np.array([alpha + 1.0])
    for i in range(order):
        x = best = nodes[i]
        best_residual = math.inf
        converged = False
        for _ in range(newton_steps):
            value, deriv = _laguerre_and_derivative(order, alpha, x)
            if abs(value) < best_residual:
                best, best_residual = x, abs(value)
            step = value / deriv
            x -= step
            # near the origin the recurrence noise floor sits around 1e-14 relative
            if abs(step) <= 1e-15 * abs(x):
                converged = True
                break
            if abs(step) <= 1e-12 * abs(x):
                converged = True
        if not converged:
            raise QuadratureError(
                f"Newton refinement of Laguerre node {i} (order {order}) did not converge"
            )
        nodes[i] = best
    if np.any(np.diff(nodes) <= 0) or nodes[0] <= 0:
        raise QuadratureError(f"Laguerre nodes of order {order} are not strictly increasing")

    _, deriv = _laguerre_and_derivative(order, alpha, nodes)
    log_weights = (
        gammaln(order + alpha + 1) - gammaln(order + 1) - np.log(nodes) - 2 * np.log(np.abs(deriv))
    )
    if not np.all(np.isfinite(log_weights)):
        bad = int(np.flatnonzero(~np.isfinite(log_weights))[0])
        raise QuadratureError(f"non-finite Laguerre weight at node {bad} (order {order})")
    return nodes, np.exp(log_weights), log_weights


@dataclass(frozen=True)
class RadialBasis:
    """Truncated set of reduced radial oscillator functions for one channel l.

    Functions ``n = 0 .. size-1`` are stored implicitly through their
    normalisation constants; values come from :meth:`values`.  The attached
    Gauss-Laguerre rule in x = r^2 (exponent l + 1/2) integrates every product
    R_m R_n exactly.
    """

    l: int
    size: int
    quad_order: int
    trap: TrapModel
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    log_weights: np.ndarray = field(repr=False)
    log_norms: np.ndarray = field(repr=False)
    nu: float = 1.0

    @property
    def alpha(self) -> float:
        return self.l + 0.5

    @property
    def energies(self) -> np.ndarray:
        """Unperturbed energies 2n + l + 3/2 in units of hbar*omega."""
        return 2.0 * np.arange(self.size) + self.l + 1.5

    @property
    def norms(self) -> np.ndarray:
        return np.exp(self.log_norms)

    @property
    def r_nodes(self) -> np.ndarray:
        return np.sqrt(self.nodes)

    @property
    def dr_weights(self) -> np.ndarray:
        """Weights W_i such that int_0^inf f(r) dr ~ sum_i W_i f(r_i).

        Exact when f is r^(2l+2) exp(-r^2) times a polynomial in r^2 of degree
        below 2*quad_order - l - 1; in particular for every R_m R_n.
        """
        x = self.nodes
        return np.exp(self.log_weights + x - math.log(2.0) - (self.l + 1) * np.log(x))

    def values(self, r, size: int | None = None) -> np.ndarray:
        """R_0..R_{size-1} at ``r`` (oscillator lengths), shape ``(size,) + r.shape``."""
        size = self.size if size is None else size
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("radial coordinate must be non-negative")
        x = r * r
        poly = laguerre_table(size, self.alpha, x)
        envelope = r ** (self.l + 1) * np.exp(-x / 2)
        return self.norms[:size].reshape((size,) + (1,) * r.ndim) * poly * envelope

    def derivative_at_origin(self) -> np.ndarray:
        """lim_{r->0} R_n(r)/r^(l+1) = N_nl L_n^(l+1/2)(0) for every n."""
        n = np.arange(self.size)
        log_l0 = gammaln(n + self.alpha + 1) - gammaln(n + 1) - gammaln(self.alpha + 1)
        return np.exp(self.log_norms + log_l0)

    def node_values(self) -> np.ndarray:
        """Basis functions sampled at the quadrature nodes, shape (size, quad_order)."""
        return self.values(self.r_nodes)

    def gram(self) -> np.ndarray:
        """Overlap matrix int R_m R_n dr evaluated with the attached rule."""
        # Polynomial part only: R_m R_n dr = (N_m N_n / 2) L_m L_n x^alpha e^-x dx
        poly = laguerre_table(self.size, self.alpha, self.nodes) * self.norms[:, None]
        return 0.5 * (poly * self.weights) @ poly.T


def build_basis(
    trap: TrapModel | None = None, l: int = 0, size: int = 10, quad_order: int | None = None
) -> RadialBasis:
    """Build the radial basis R_{0l}..R_{size-1,l} with a Q-point Laguerre rule.

    ``quad_order`` defaults to ``size + 20``.
    """
    trap = TrapModel.oscillator_units() if trap is None else trap
    if int(l) != l or l < 0:
        raise ValueError(f"angular momentum must be a non-negative integer, got {l!r}")
    if int(size) != size or size < 1:
        raise ValueError(f"basis size must be a positive integer, got {size!r}")
    if quad_order is None:
        quad_order = size + DEFAULT_QUADRATURE_MARGIN
    if int(quad_order) != quad_order or quad_order < 1:
        raise ValueError(f"quadrature order must be a positive integer, got {quad_order!r}")
    if quad_order < size:
        raise ValueError(f"quadrature order {quad_order} cannot integrate a basis of size {size}")
    l, size, quad_order = int(l), int(size), int(quad_order)

    nodes, weights, log_weights = gauss_laguerre(quad_order, l + 0.5)
    n = np.arange(size)
    log_norms = 0.5 * (math.log(2.0) + gammaln(n + 1) - gammaln(n + l + 1.5))
    for arr in (nodes, weights, log_weights, log_norms):
        arr.setflags(write=False)
    return RadialBasis(
        l=l,
        size=size,
        quad_order=quad_order,
        trap=trap,
        nodes=nodes,
        weights=weights,
        log_weights=log_weights,
        log_norms=log_norms,
    )


def _check_index(basis: RadialBasis, n: int):
    if int(n) != n or not 0 <= n < basis.size:
        raise IndexError(f"radial index {n!r} outside 0..{basis.size - 1}")


def eval_radial(basis: RadialBasis, n: int, r):
    """R_nl(r) for a single radial quantum number; ``r`` in oscillator lengths."""
    _check_index(basis, n)
    values = basis.values(r, size=int(n) + 1)[int(n)]
    return values if values.ndim else float(values)


def unperturbed_energy(basis: RadialBasis, n: int) -> float:
    """E0_nl = 2n + l + 3/2 in units of hbar*omega."""
    _check_index(basis, n)
    return 2 * int(n) + basis.l + 1.5


def effective_radial_potential(l: int, r):
    """Centrifugal-plus-trap potential r^2/2 + l(l+1)/(2 r^2) in oscillator units."""
    r = np.asarray(r, dtype=float)
    if l == 0:
        return 0.5 * r * r
    return 0.5 * r * r + 0.5 * l * (l + 1) / (r * r)
