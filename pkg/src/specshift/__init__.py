"""Spectral shift functions, double operator integrals and unitary dilations
for finite matrices."""
from .errors import (
    BranchError,
    ConvergenceError,
    PhaseTrackingError,
    SpecShiftError,
    ValidationError,
)
from .operators import (
    OperatorClass,
    check_contraction,
    check_dissipative,
    check_hermitian,
    check_unitary,
    hermitian_log_split,
    normal_eig,
    polar_decompose,
    random_ensemble,
    schur_decompose,
    unitary_log,
    validate,
)
from .calculus import (
    GridFunction,
    LaurentPoly,
    LineFn,
    a_integral,
    cayley,
    divided_difference,
    eval_on_contraction,
    eval_on_dissipative,
    haagerup_terms,
    inverse_cayley,
    realize_real_ssf,
    riesz_project,
)
from .dilation import (
    CircleMeasure,
    cnu_split,
    kernel_isometry_check,
    poisson_density,
    power_dilation,
    schaffer_block,
    semi_spectral_measure,
)
from .doi import (
    SchurSymbol,
    doi_dissipative_difference,
    doi_semispectral,
    doi_spectral,
    doi_trace,
    finite_difference_error,
    lipschitz_difference,
    parametric_derivative,
)
from .ssf import (
    QuadratureSpec,
    SSFSample,
    a_integral_trace,
    brothers_riesz_check,
    langer_contour_trace,
    perturbation_determinant,
    ssf_contraction_pair,
    ssf_dissipative_additive,
    ssf_dissipative_resolvent_pair,
    ssf_selfadjoint_pair,
    ssf_unitary_pair,
    ssf_via_determinant,
    verify_trace_formula,
)
from .intermediate import (
    IntermediateResult,
    fredholm_regularize,
    intermediate_contraction,
    intermediate_general,
    ssf_positive_factor,
    ssf_schaffer_transfer,
    ssf_unitary_factor,
    ssf_unitary_to_contraction,
)

__version__ = "0.1.0"
