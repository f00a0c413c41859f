import sys
import os

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

PRIVATE_PATH = os.path.join(PROJECT_ROOT, "private")
if PRIVATE_PATH not in sys.path:
    sys.path.append(PRIVATE_PATH)

# config only needs the standard library, so errors and options stay importable without numpy/scipy
from .config import (
    SolverConfig,
    SolverOption,
    WithQuadTolerance,
    WithOdeTolerance,
    WithOdeMethod,
    WithEigenTolerance,
    WithScanPoints,
    WithResidueTolerance,
    WithTruncations,
    SpectralError,
    DomainError,
    UsageError,
    ValidationError,
    BoundaryConditionError,
    LambdaForbiddenError,
    IntegrationError,
    ToleranceError,
    PoleError,
    UnsupportedError,
    ParseError,
)

try:
    from .model import (
        RealInterval,
        Atom,
        PiecewisePiece,
        ValidationReport,
        BalancedSolution,
        LambdaSet,
        KernelData,
        BoundaryConditions,
        SpectralMeasure,
        TransformResult,
        ParsevalReport,
        DiagonalizationReport,
        WeylClassification,
        ThetaPhiPair,
        MRouteReport,
        RunConfig,
    )
    from .measures import MatrixMeasure, combine, validate_coefficients
    from .ivp import (
        SpectralProblem,
        FundamentalMatrix,
        BalancedPropagator,
        solve_ivp_balanced,
        fundamental_matrix,
        lambda_set,
        wronskian,
        variation_of_constants,
        dlambda_check,
    )
    from .structure import (
        compute_kernel,
        deficiency_indices_regular,
        boundary_space_w,
        validate_boundary_conditions,
        reduce_conditions,
        inner_product,
        w_norm,
        lagrange_residual,
        sided_value,
    )
    from .greens import (
        MFunction,
        GreenKernel,
        assemble_F,
        m_function,
        green_kernel,
        resolvent_apply,
        resolvent_defect,
        eigenvalues,
        residue_weights,
        spectral_measure,
    )
    from .spectral import fourier, inverse, projection, parseval_check, diagonalization_check, transform_at
    from .weyl2 import (
        classify_endpoint,
        deficiency_index_2x2,
        separated_condition,
        theta_phi,
        m_function_2x2,
        lc_boundary_vector,
        plucker_residual,
    )
    from .problem_file import ProblemSpec, parse, load, serialize, build_problem, boundary_conditions

    _SOLVER_AVAILABLE = True
except ImportError as e:
    print(f"Warning: Could not import solver modules: {e}")
    _SOLVER_AVAILABLE = False

__all__ = [
    # Configuration
    'SolverConfig',
    'SolverOption',
    'WithQuadTolerance',
    'WithOdeTolerance',
    'WithOdeMethod',
    'WithEigenTolerance',
    'WithScanPoints',
    'WithResidueTolerance',
    'WithTruncations',

    # Errors
    'SpectralError',
    'DomainError',
    'UsageError',
    'ValidationError',
    'BoundaryConditionError',
    'LambdaForbiddenError',
    'IntegrationError',
    'ToleranceError',
    'PoleError',
    'UnsupportedError',
    'ParseError',
]

if _SOLVER_AVAILABLE:
    __all__ += [
        # Model classes
        'RealInterval',
        'Atom',
        'PiecewisePiece',
        'ValidationReport',
        'BalancedSolution',
        'LambdaSet',
        'KernelData',
        'BoundaryConditions',
        'SpectralMeasure',
        'TransformResult',
        'ParsevalReport',
        'DiagonalizationReport',
        'WeylClassification',
        'ThetaPhiPair',
        'MRouteReport',
        'RunConfig',

        # Measures and propagation
        'MatrixMeasure',
        'combine',
        'validate_coefficients',
        'SpectralProblem',
        'FundamentalMatrix',
        'BalancedPropagator',
        'solve_ivp_balanced',
        'fundamental_matrix',
        'lambda_set',
        'wronskian',
        'variation_of_constants',
        'dlambda_check',

        # Boundary structure
        'compute_kernel',
        'deficiency_indices_regular',
        'boundary_space_w',
        'validate_boundary_conditions',
        'reduce_conditions',
        'inner_product',
        'w_norm',
        'lagrange_residual',
        'sided_value',

        # Green's function and spectrum
        'MFunction',
        'GreenKernel',
        'assemble_F',
        'm_function',
        'green_kernel',
        'resolvent_apply',
        'resolvent_defect',
        'eigenvalues',
        'residue_weights',
        'spectral_measure',
        'fourier',
        'inverse',
        'projection',
        'parseval_check',
        'diagonalization_check',
        'transform_at',

        # Weyl theory
        'classify_endpoint',
        'deficiency_index_2x2',
        'separated_condition',
        'theta_phi',
        'm_function_2x2',
        'lc_boundary_vector',
        'plucker_residual',

        # Problem files
        'ProblemSpec',
        'parse',
        'load',
        'serialize',
        'build_problem',
        'boundary_conditions',
    ]
