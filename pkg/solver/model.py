import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import DomainError

Matrix = np.ndarray
Evaluator = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class RealInterval:
    """Open interval (a, b); either end may be infinite."""
    a: float
    b: float

    def __post_init__(self):
        if math.isnan(self.a) or math.isnan(self.b) or not self.a < self.b:
            raise DomainError(f"invalid interval ({self.a}, {self.b})")

    def contains(self, x: float) -> bool:
        return self.a < x < self.b

    def endpoint(self, end: str) -> float:
        if end not in ("a", "b"):
            raise DomainError(f"endpoint must be 'a' or 'b', got {end!r}")
        return self.a if end == "a" else self.b

    def is_finite(self, end: str) -> bool:
        return math.isfinite(self.endpoint(end))


@dataclass(frozen=True)
class Atom:
    """Point mass of a matrix measure."""
    location: float
    jump: Matrix


@dataclass(frozen=True)
class PiecewisePiece:
    """Density on [left, right]; polynomial pieces keep their coefficients."""
    left: float
    right: float
    density: Evaluator
    coefficients: Optional[Tuple[Matrix, ...]] = None

    @staticmethod
    def polynomial(left: float, right: float, coefficients: Sequence[Matrix]) -> "PiecewisePiece":
        coeffs = tuple(np.atleast_2d(np.asarray(c, dtype=complex)) for c in coefficients)
        if not coeffs:
            raise DomainError("polynomial piece needs at least one coefficient")

        def density(x: float) -> Matrix:
            value = np.zeros_like(coeffs[0])
            for c in reversed(coeffs):
                value = value * x + c
            return value

        return PiecewisePiece(left, right, density, coeffs)

    @property
    def is_constant(self) -> bool:
        if self.coefficients is None:
            return False
        return all(not np.any(c) for c in self.coefficients[1:])

    @property
    def is_zero(self) -> bool:
        return self.coefficients is not None and all(not np.any(c) for c in self.coefficients)

    def overlaps(self, c: float, d: float) -> bool:
        return self.left < d and c < self.right


@dataclass
class ValidationCheck:
    """One named pass/fail line of a validation report."""
    name: str
    passed: bool
    message: str = ""


@dataclass
class ValidationReport:
    """Outcome of the coefficient checks on (J, q, w)."""
    checks: List[ValidationCheck] = field(default_factory=list)

    def add(self, name: str, passed: bool, message: str = "") -> None:
        self.checks.append(ValidationCheck(name, bool(passed), message))

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[ValidationCheck]:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> List[str]:
        return [f"{'ok  ' if c.passed else 'FAIL'} {c.name}" + (f": {c.message}" if c.message else "") for c in self.checks]


@dataclass
class BalancedSolution:
    """Balanced solution sampled on a grid; one-sided limits kept at atoms."""
    grid: np.ndarray
    values: List[Matrix]
    left: Dict[float, Matrix]
    right: Dict[float, Matrix]
    lam: complex = 0.0
    tolerance: float = 0.0

    def value(self, x: float, side: str = "balanced") -> Matrix:
        if side == "left" and x in self.left:
            return self.left[x]
        if side == "right" and x in self.right:
            return self.right[x]
        index = int(np.searchsorted(self.grid, x))
        if index >= len(self.grid) or self.grid[index] != x:
            raise DomainError(f"{x} is not a grid point of this solution")
        return self.values[index]


@dataclass(frozen=True)
class LambdaPoint:
    """Root of det(2J ± Δ_{λw-q}(x)) at one atom."""
    value: complex
    location: float
    sign: int


@dataclass
class LambdaSet:
    """The forbidden set, per atom, plus infinite-eigenvalue flags of degenerate pencils."""
    points: List[LambdaPoint] = field(default_factory=list)
    infinite: Dict[float, int] = field(default_factory=dict)
    real_tol: float = 1e-12

    @property
    def values(self) -> List[complex]:
        return [p.value for p in self.points]

    @property
    def real_free(self) -> bool:
        return all(abs(p.value.imag) > self.real_tol * max(1.0, abs(p.value)) for p in self.points)

    def distance(self, lam: complex) -> float:
        if not self.points:
            return math.inf
        return min(abs(lam - p.value) for p in self.points)


@dataclass
class WronskianReport:
    """u^{±*} J v^{±} per grid point and the spread around their mean."""
    grid: np.ndarray
    left: List[Matrix]
    right: List[Matrix]
    deviation: float


@dataclass
class DerivativeReport:
    """Central-difference estimate of dU/dλ with a Richardson consistency ratio."""
    estimate: Matrix
    coarse: Matrix
    fine: Matrix
    step: float
    ratio: float


@dataclass
class KernelData:
    """𝓛₀ dimension, N₀ basis and the projection P onto N₀^⊥."""
    dim_l0: int
    n0_basis: Matrix
    projection: Matrix
    gram: Matrix
    gram_left: Matrix
    gram_right: Matrix


@dataclass
class BoundaryConditions:
    """Accepted boundary matrix Ã acting on (u(a); u(b))."""
    matrix: Matrix
    n_plus: int
    classification: str
    residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def at_a(self) -> Matrix:
        return self.matrix[:, : self.matrix.shape[1] // 2]

    @property
    def at_b(self) -> Matrix:
        return self.matrix[:, self.matrix.shape[1] // 2 :]


@dataclass
class SpectralMeasure:
    """Eigenvalues in a window with their matrix weights Δν(λₙ)."""
    eigenvalues: List[float] = field(default_factory=list)
    multiplicities: List[int] = field(default_factory=list)
    weights: List[Matrix] = field(default_factory=list)
    window: Tuple[float, float] = (0.0, 0.0)
    deviations: List[float] = field(default_factory=list)


@dataclass
class TransformResult:
    """Spectral coefficients f̂ₙ over the measure's window."""
    coefficients: List[Matrix]
    measure: SpectralMeasure
    window: Tuple[float, float]
    tail_energy: Optional[float] = None


@dataclass
class GridFunction:
    """Vector function sampled on a grid."""
    grid: np.ndarray
    values: List[Matrix]


@dataclass
class ParsevalReport:
    lhs: complex
    rhs: complex
    residual: float
    tail_energy: float
    window_complete: bool


@dataclass
class DiagonalizationReport:
    residual: float
    per_eigenvalue: List[float]
    membership_residual: float


@dataclass
class WeylClassification:
    """Limit-point / limit-circle verdict with its nested-interval diagnostics."""
    endpoint: str
    verdict: str
    lam: complex
    truncations: List[float] = field(default_factory=list)
    norms: List[Tuple[float, float]] = field(default_factory=list)
    radii: List[float] = field(default_factory=list)


@dataclass
class ThetaPhiPair:
    """θ = U(cos α, -sin α)ᵀ and φ = U(sin α, cos α)ᵀ, normalized at the left endpoint."""
    alpha: float
    lam: complex
    theta: Evaluator
    phi: Evaluator
    wronskian: complex


@dataclass
class MRouteReport:
    """Titchmarsh-Weyl m(λ) from the two independent routes."""
    lam: complex
    contraction: complex
    minimizer: complex
    difference: float
    contraction_sequence: List[complex] = field(default_factory=list)
    minimizer_sequence: List[complex] = field(default_factory=list)

    @property
    def value(self) -> complex:
        return self.contraction


@dataclass
class RunConfig:
    """Everything one CLI invocation needs."""
    problem_path: str
    subcommand: str
    tol_quad: Optional[float] = None
    tol_eig: Optional[float] = None
    tol_residue: Optional[float] = None
    out: Optional[str] = None
    window: Optional[Tuple[float, float]] = None
    lam_re: Optional[Tuple[float, float]] = None
    grid: int = 50
    alpha: float = 0.0
    lam: complex = 1j
    lam_im: float = 1.0
    x0: Optional[float] = None
    verbose: bool = False

    def __post_init__(self):
        for name in ("tol_quad", "tol_eig", "tol_residue"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise DomainError(f"{name} must be positive, got {value}")
        for name in ("window", "lam_re"):
            bounds = getattr(self, name)
            if bounds is not None and not bounds[0] <= bounds[1]:
                raise DomainError(f"{name} [{bounds[0]}, {bounds[1]}] is not ordered")
        if self.grid < 1:
            raise DomainError(f"grid must be positive, got {self.grid}")
