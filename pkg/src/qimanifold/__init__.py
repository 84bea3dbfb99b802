"""Numerical toolkit for Gibbs-state geometry under unbounded perturbations.

Modules:

* :mod:`~qimanifold.linalg`  Hermitian operators, spectral calculus, Schatten norms
* :mod:`~qimanifold.gibbs`   Gibbs states, entropy, trace-class diagnostics
* :mod:`~qimanifold.norms`   omega-norm and form-norm checks
* :mod:`~qimanifold.kernel`  divided-difference kernels of ``exp`` on the simplex
* :mod:`~qimanifold.bkm`     BKM metric, n-point functions, cumulant bounds
* :mod:`~qimanifold.dyson`   Taylor series of ``Tr exp(-(H + lambda V))``
* :mod:`~qimanifold.models`  Hamiltonian families and perturbations
* :mod:`~qimanifold.experiments`  config-driven suites and the command line
"""

from .bkm import (BudgetError, bkm_metric, bkm_metric_quadrature, cumulant_table,
                  gram_matrix, npoint_function, regularized_mean, score,
                  third_cumulant, true_mean)
from .dyson import (direct_free_energy, direct_partition, duhamel_remainder_check,
                    expand, radius_report)
from .gibbs import (GibbsState, gibbs, normalize_hamiltonian, schatten_membership,
                    von_neumann_entropy)
from .kernel import simplex_kernel
from .linalg import (DomainError, EigenDecompositionError, HermitianOperator, eig,
                     matrix_function, operator_norm, schatten_quasinorm, trace_norm)
from .models import ModelSpec
from .norms import PerturbationDirection, form_norm, omega_norm

__version__ = '0.1.0'

__all__ = [
    'BudgetError', 'DomainError', 'EigenDecompositionError', 'GibbsState',
    'HermitianOperator', 'ModelSpec', 'PerturbationDirection', 'bkm_metric',
    'bkm_metric_quadrature', 'cumulant_table', 'direct_free_energy',
    'direct_partition', 'duhamel_remainder_check', 'eig', 'expand', 'form_norm',
    'gibbs', 'gram_matrix', 'matrix_function', 'normalize_hamiltonian',
    'npoint_function', 'omega_norm', 'operator_norm', 'radius_report',
    'regularized_mean', 'schatten_membership', 'schatten_quasinorm', 'score',
    'simplex_kernel', 'third_cumulant', 'trace_norm', 'true_mean',
    'von_neumann_entropy',
]
