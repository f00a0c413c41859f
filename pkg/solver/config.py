import os
from dataclasses import dataclass, replace
from typing import Optional

from dotenv import find_dotenv, load_dotenv

## [Quadrature Defaults]

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 2000


## [Integrator Defaults]

ODE_RTOL = 1e-10
ODE_ATOL = 1e-12
ODE_METHOD = "RK45"

# 1 ± Δ_r/2 counts as singular below this fraction of its largest singular value
FORBIDDEN_RTOL = 1e-10
CONDITION_WARN = 1e12
LAMBDA_REAL_TOL = 1e-12


## [Structure Defaults]

NULLSPACE_RTOL = 1e-10
HERMITIAN_TOL = 1e-12
PSD_FLOOR = -1e-12
BOUNDARY_TOL = 1e-9


## [Eigenvalue / Residue Defaults]

EIG_THRESHOLD = 1e-8
EIG_TOL = 1e-10
SCAN_POINTS = 1000
SCAN_RTOL = 1e-7
RESIDUE_POINTS = 16
RESIDUE_MAX_POINTS = 1024
RESIDUE_TOL = 1e-9
RESIDUE_MAX_RADIUS = 0.1
# the row-equilibrated F(λ) counts as singular (a pole of M) below this σ_min
POLE_RTOL = 1e-13
MULTIPLICITY_RTOL = 1e-6


## [Weyl Defaults]

LP_RATIO = 1e6
LP_STREAK = 3
LC_RTOL = 1e-6
TRUNCATIONS = 7
TAIL_DOUBLINGS = 40


## [Exit Codes]

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_VALIDATION = 2
EXIT_PARSE = 3


## [Error Classes]

class SpectralError(Exception):
    exit_code = EXIT_NUMERIC


class DomainError(SpectralError):
    exit_code = EXIT_VALIDATION


class UsageError(SpectralError):
    exit_code = EXIT_VALIDATION


class ValidationError(SpectralError):
    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class BoundaryConditionError(ValidationError):
    def __init__(self, message: str, kinds=()):
        super().__init__(message)
        self.kinds = tuple(kinds)


class LambdaForbiddenError(SpectralError):
    def __init__(self, message: str, location: Optional[float] = None, lam: Optional[complex] = None):
        super().__init__(message)
        self.location = location
        self.lam = lam


class IntegrationError(SpectralError):
    pass


class ToleranceError(IntegrationError):
    pass


class PoleError(SpectralError):
    pass


class UnsupportedError(SpectralError):
    pass


class ParseError(SpectralError):
    exit_code = EXIT_PARSE

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


## [Solver Config]

@dataclass(frozen=True)
class SolverConfig:
    quad_epsabs: float = QUAD_EPSABS
    quad_epsrel: float = QUAD_EPSREL
    quad_limit: int = QUAD_LIMIT
    ode_rtol: float = ODE_RTOL
    ode_atol: float = ODE_ATOL
    ode_method: str = ODE_METHOD
    forbidden_rtol: float = FORBIDDEN_RTOL
    nullspace_rtol: float = NULLSPACE_RTOL
    boundary_tol: float = BOUNDARY_TOL
    eig_threshold: float = EIG_THRESHOLD
    eig_tol: float = EIG_TOL
    scan_points: int = SCAN_POINTS
    scan_rtol: float = SCAN_RTOL
    residue_points: int = RESIDUE_POINTS
    residue_tol: float = RESIDUE_TOL
    truncations: int = TRUNCATIONS

    @staticmethod
    def default() -> "SolverConfig":
        return SolverConfig()

    @staticmethod
    def from_env() -> "SolverConfig":
        """Defaults overridden by BVSPECTRA_* variables (a .env file is honoured)."""
        load_dotenv(find_dotenv(usecwd=True))

        config = SolverConfig()
        tol_quad = os.getenv("BVSPECTRA_TOL_QUAD", "")
        tol_eig = os.getenv("BVSPECTRA_TOL_EIG", "")
        method = os.getenv("BVSPECTRA_ODE_METHOD", "")
        try:
            if tol_quad:
                config = WithQuadTolerance(float(tol_quad)).apply(config)
            if tol_eig:
                config = WithEigenTolerance(float(tol_eig)).apply(config)
        except ValueError as e:
            raise DomainError(f"invalid tolerance in environment: {e}")
        if method:
            config = WithOdeMethod(method).apply(config)
        return config

    def with_options(self, *options: "SolverOption") -> "SolverConfig":
        config = self
        for option in options:
            config = option.apply(config)
        return config


## [Solver Options]

class SolverOption:
    def apply(self, config: SolverConfig) -> SolverConfig:
        raise NotImplementedError


def _positive(name: str, value: float) -> float:
    if not value > 0:
        raise DomainError(f"{name} must be positive, got {value}")
    return value


class WithQuadTolerance(SolverOption):
    def __init__(self, epsrel: float, epsabs: Optional[float] = None):
        self.epsrel = _positive("quadrature tolerance", epsrel)
        self.epsabs = _positive("quadrature tolerance", epsabs) if epsabs is not None else None

    def apply(self, config: SolverConfig) -> SolverConfig:
        epsabs = self.epsabs if self.epsabs is not None else min(config.quad_epsabs, self.epsrel * 1e-2)
        return replace(config, quad_epsrel=self.epsrel, quad_epsabs=epsabs)


class WithOdeTolerance(SolverOption):
    def __init__(self, rtol: float, atol: Optional[float] = None):
        self.rtol = _positive("integrator tolerance", rtol)
        self.atol = _positive("integrator tolerance", atol) if atol is not None else rtol * 1e-2

    def apply(self, config: SolverConfig) -> SolverConfig:
        return replace(config, ode_rtol=self.rtol, ode_atol=self.atol)


class WithOdeMethod(SolverOption):
    METHODS = ("RK45", "RK23", "DOP853")

    def __init__(self, method: str):
        if method not in self.METHODS:
            raise DomainError(f"unsupported integrator {method!r}, expected one of {self.METHODS}")
        self.method = method

    def apply(self, config: SolverConfig) -> SolverConfig:
        return replace(config, ode_method=self.method)


class WithEigenTolerance(SolverOption):
    def __init__(self, tol: float, threshold: Optional[float] = None):
        self.tol = _positive("eigenvalue tolerance", tol)
        self.threshold = _positive("eigenvalue threshold", threshold) if threshold is not None else None

    def apply(self, config: SolverConfig) -> SolverConfig:
        threshold = self.threshold if self.threshold is not None else config.eig_threshold
        return replace(config, eig_tol=self.tol, eig_threshold=threshold)


class WithScanPoints(SolverOption):
    def __init__(self, points: int):
        if points < 3:
            raise DomainError(f"scan needs at least 3 points, got {points}")
        self.points = int(points)

    def apply(self, config: SolverConfig) -> SolverConfig:
        return replace(config, scan_points=self.points)


class WithResidueTolerance(SolverOption):
    def __init__(self, tol: float, points: Optional[int] = None):
        self.tol = _positive("residue tolerance", tol)
        self.points = points

    def apply(self, config: SolverConfig) -> SolverConfig:
        points = self.points if self.points is not None else config.residue_points
        return replace(config, residue_tol=self.tol, residue_points=points)


class WithTruncations(SolverOption):
    def __init__(self, count: int):
        if count < LP_STREAK + 1:
            raise DomainError(f"need at least {LP_STREAK + 1} truncations, got {count}")
        self.count = int(count)

    def apply(self, config: SolverConfig) -> SolverConfig:
        return replace(config, truncations=self.count)
