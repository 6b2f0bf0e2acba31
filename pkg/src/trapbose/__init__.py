"""Two bosons in an isotropic harmonic trap with a weak central interaction.

Perturbed levels come from the vanishing of the truncated secular
determinant of the separable Green's-function equation, checked against
direct diagonalization.
"""

__version__ = "0.1.0"

from .oscillator_basis import (
    QuadratureError,
    RadialBasis,
    TrapModel,
    build_basis,
    eval_radial,
    gauss_laguerre,
    unperturbed_energy,
)
from .interaction import InteractionMatrix, Potential, matrix_elements, project_radial
from .spectral_solver import (
    ConvergenceTable,
    PoleError,
    SecularSystem,
    SolverError,
    SpectralSolution,
    assemble,
    convergence_sweep,
    energy_shift_quotient,
    find_levels,
    oracle_levels,
    secular_determinant,
)
from .greens_function import (
    GreensPartialSum,
    eval_kernel,
    fixed_point_residual,
    greens_partial_sum,
    resolvent_residual,
)
from .wavefunction import (
    RadialFunction,
    count_nodes,
    observable_moments,
    reconstruct,
    schrodinger_residual,
)
