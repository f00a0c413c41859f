"""2×2 real systems: limit-point / limit-circle classification and the Titchmarsh-Weyl m-function."""

import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np

from private.refine import UntilStable

from .config import (
    DomainError,
    LC_RTOL,
    LP_RATIO,
    LP_STREAK,
    SolverConfig,
    TAIL_DOUBLINGS,
    ToleranceError,
    UnsupportedError,
    ValidationError,
)
from .greens import MFunction
from .ivp import SpectralProblem, lambda_set
from .model import BoundaryConditions, MRouteReport, ThetaPhiPair, WeylClassification
from .structure import compute_kernel, gram_matrix, sided_value, validate_boundary_conditions

logger = logging.getLogger(__name__)

LIMIT_POINT = "limit-point"
LIMIT_CIRCLE = "limit-circle"
UNDECIDED = "undecided"

ROUTE_RTOL = 1e-6

Vector = np.ndarray


def check_real_system(p: SpectralProblem) -> float:
    """β for J = β[[0,-1],[1,0]] with real q and w; raises otherwise."""
    if p.n != 2:
        raise ValidationError(f"2x2 machinery needs n = 2, got n = {p.n}")
    J = p.J
    beta = J[1, 0]
    if abs(beta.imag) > 1e-14 or abs(J[0, 0]) + abs(J[1, 1]) > 1e-14 or abs(J[0, 1] + beta) > 1e-14 or beta == 0:
        raise ValidationError("J must be a real multiple of [[0,-1],[1,0]]")
    for name, measure in (("q", p.q), ("w", p.w)):
        for atom in measure.atoms:
            if np.any(np.abs(atom.jump.imag) > 1e-14):
                raise ValidationError(f"{name} has a non-real atom at {atom.location}")
        for x in measure.sample_points():
            if np.any(np.abs(measure.density(x).imag) > 1e-14):
                raise ValidationError(f"{name} has a non-real density at {x}")
    return float(beta.real)


def truncations(p: SpectralProblem, endpoint: str, anchor: float, count: int) -> List[float]:
    """Nested cut points approaching the endpoint: doubling toward ∞, halving toward a finite edge."""
    edge = p.interval.endpoint(endpoint)
    sign = 1.0 if endpoint == "b" else -1.0
    atoms = set(p.atom_locations())
    points = []
    for k in range(count):
        if math.isinf(edge):
            x = anchor + sign * 2.0 ** (k + 1)
        else:
            x = edge - (edge - anchor) / 2.0 ** (k + 1)
        while x in atoms:
            x = math.nextafter(x, edge)
        points.append(x)
    return points


def classify_endpoint(p: SpectralProblem, endpoint: str, lam: complex = 1j, config: Optional[SolverConfig] = None) -> WeylClassification:
    """Limit-point or limit-circle at one endpoint from the growth of solution w-norms on nested intervals.

    Limit-point needs σ_max/σ_min of the Gram matrix above LP_RATIO on LP_STREAK
    successive truncations; limit-circle needs both eigenvalues to settle to LC_RTOL.
    Anything else is reported as undecided with the diagnostics.
    """
    config = config or p.config
    check_real_system(p)
    lam = complex(lam)
    if lam.imag == 0:
        raise DomainError("classification needs a non-real λ")
    if endpoint not in ("a", "b"):
        raise DomainError(f"endpoint must be 'a' or 'b', got {endpoint!r}")

    if p.endpoint_regular(endpoint):
        logger.info(f"endpoint {endpoint} is regular: limit-circle")
        return WeylClassification(endpoint=endpoint, verdict=LIMIT_CIRCLE, lam=lam)

    anchor = p.anchor()
    cuts = truncations(p, endpoint, anchor, config.truncations)
    gram = np.zeros((2, 2), dtype=complex)
    previous = anchor
    norms: List[Tuple[float, float]] = []
    radii: List[float] = []
    streak = 0
    verdict = UNDECIDED
    for x in cuts:
        lo, hi = sorted((previous, x))
        gram = gram + gram_matrix(p, lam, lo, hi, config)
        previous = x
        values = np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))
        top = float(values[-1])
        low = max(abs(float(values[0])), np.finfo(float).eps * top)
        norms.append((low, top))
        radii.append(1.0 / (2 * abs(lam.imag) * max(gram[1, 1].real, np.finfo(float).tiny)))
        streak = streak + 1 if top / low > LP_RATIO else 0
        if streak >= LP_STREAK:
            verdict = LIMIT_POINT
            break

    if verdict == UNDECIDED and len(norms) >= 2:
        (low1, top1), (low2, top2) = norms[-2], norms[-1]
        if abs(low2 - low1) <= LC_RTOL * low2 and abs(top2 - top1) <= LC_RTOL * top2:
            verdict = LIMIT_CIRCLE
    logger.info(f"endpoint {endpoint}: {verdict} after {len(norms)} truncations")
    return WeylClassification(endpoint=endpoint, verdict=verdict, lam=lam, truncations=cuts[: len(norms)], norms=norms, radii=radii)


def deficiency_index_2x2(p: SpectralProblem, lam: complex = 1j, config: Optional[SolverConfig] = None) -> int:
    """Number of limit-circle endpoints: 0, 1 or 2."""
    verdicts = [classify_endpoint(p, end, lam, config).verdict for end in ("a", "b")]
    if UNDECIDED in verdicts:
        raise UnsupportedError("an endpoint could not be classified")
    return sum(v == LIMIT_CIRCLE for v in verdicts)


def separated_condition(alpha: float, endpoint: str = "a", classification: Optional[WeylClassification] = None) -> BoundaryConditions:
    """cos α u₁ - sin α u₂ = 0 at one endpoint, as one row of Ã."""
    if not 0 <= alpha < math.pi:
        raise DomainError(f"α must lie in [0, π), got {alpha}")
    if classification is not None and classification.verdict == LIMIT_POINT:
        raise UnsupportedError(f"endpoint {classification.endpoint} is limit-point: boundary conditions have no effect there")
    row = np.array([math.cos(alpha), -math.sin(alpha)], dtype=complex)
    matrix = np.zeros((1, 4), dtype=complex)
    if endpoint == "a":
        matrix[0, :2] = row
    elif endpoint == "b":
        matrix[0, 2:] = row
    else:
        raise DomainError(f"endpoint must be 'a' or 'b', got {endpoint!r}")
    return BoundaryConditions(matrix=matrix, n_plus=1, classification="separated")


def _directions(alpha: float) -> Tuple[Vector, Vector]:
    c, s = math.cos(alpha), math.sin(alpha)
    return np.array([c, -s], dtype=complex), np.array([s, c], dtype=complex)


def _anchored(p: SpectralProblem) -> SpectralProblem:
    a = p.interval.a
    if not math.isfinite(a):
        raise UnsupportedError("the m-function needs a finite regular left endpoint")
    return p if p.x0 == a else p.with_anchor(a)


def theta_phi(p: SpectralProblem, alpha: float, lam: complex, config: Optional[SolverConfig] = None) -> ThetaPhiPair:
    """θ = U(cos α, -sin α)ᵀ and φ = U(sin α, cos α)ᵀ with U(a) = 𝟙."""
    check_real_system(p)
    p = _anchored(p)
    U = p.fundamental_matrix(lam, config)
    t, s = _directions(alpha)

    def theta(x: float, side: str = "balanced") -> Vector:
        return U(x, side) @ t

    def phi(x: float, side: str = "balanced") -> Vector:
        return U(x, side) @ s

    wronskian = complex(np.vdot(t, p.J @ s))
    return ThetaPhiPair(alpha=alpha, lam=complex(lam), theta=theta, phi=phi, wronskian=wronskian)


def _settled(sequence: List[complex], rtol: float = 1e-11) -> bool:
    return abs(sequence[-1] - sequence[-2]) <= rtol * max(1.0, abs(sequence[-1]))


def _aitken(sequence: List[complex]) -> complex:
    if len(sequence) < 3:
        return sequence[-1]
    if _settled(sequence, 1e-12):
        return sequence[-1]
    x0, x1, x2 = sequence[-3:]
    denominator = x2 - 2 * x1 + x0
    if abs(denominator) <= 1e-14 * max(1.0, abs(x2)):
        return x2
    value = x2 - (x2 - x1) ** 2 / denominator
    return value if np.isfinite(value) else x2


def m_function_2x2(
    p: SpectralProblem,
    alpha: float,
    lam: complex,
    config: Optional[SolverConfig] = None,
    strict: bool = True,
) -> MRouteReport:
    """m(λ) by contracting the truncated M-function and by the L²-minimizing coefficient of θ + mφ."""
    config = config or p.config
    beta = check_real_system(p)
    lam = complex(lam)
    if lam.imag == 0:
        raise DomainError("m(λ) needs a non-real λ")
    if abs(beta - 1.0) > 1e-14:
        raise ValidationError(f"m-function needs J = [[0,-1],[1,0]], got β = {beta}")
    if not p.endpoint_regular("a"):
        raise UnsupportedError("left endpoint must be regular")
    if not lambda_set(p).real_free:
        raise UnsupportedError("Λ meets the real axis")
    p = _anchored(p)
    if classify_endpoint(p, "b", lam, config).verdict != LIMIT_POINT:
        raise UnsupportedError("right endpoint must be limit-point")

    a = p.interval.a
    t, s = _directions(alpha)
    rows = np.zeros((2, 4), dtype=complex)
    rows[0, :2] = t
    rows[1, 2] = 1.0

    contraction: List[complex] = []
    minimizer: List[complex] = []
    gram = np.zeros((2, 2), dtype=complex)
    previous = a
    for cut in truncations(p, "b", a, config.truncations):
        truncated = p.restrict(a, cut, x0=a)
        kernel = compute_kernel(truncated, config)
        bc = validate_boundary_conditions(truncated, kernel, rows, config)
        M = MFunction(truncated, kernel, bc, "plus", config)(lam)
        contraction.append(complex(s @ M @ s))

        gram = gram + gram_matrix(p, lam, previous, cut, config)
        previous = cut
        minimizer.append(complex(-(s @ gram @ t) / (s @ gram @ s).real))
        logger.debug(f"m truncation at {cut}: contraction {contraction[-1]}, minimizer {minimizer[-1]}")
        if len(contraction) >= 3 and _settled(contraction) and _settled(minimizer):
            break

    first = contraction[-1]
    second = _aitken(minimizer)
    difference = abs(first - second)
    report = MRouteReport(
        lam=lam,
        contraction=first,
        minimizer=second,
        difference=difference,
        contraction_sequence=contraction,
        minimizer_sequence=minimizer,
    )
    if strict and difference > ROUTE_RTOL * max(1.0, abs(first)):
        raise ToleranceError(f"m-function routes disagree at λ={lam}: {first} vs {second} (|Δ| = {difference:.3e})")
    return report


def default_boundary_solutions(p: SpectralProblem, endpoint: str, config: Optional[SolverConfig] = None) -> Tuple[Callable, Callable]:
    """Real solutions of Ju' + qu = 0 with v₁ = (0, 1/β)ᵀ and v₂ = (-1/β, 0)ᵀ at a regular endpoint."""
    beta = check_real_system(p)
    if not p.endpoint_regular(endpoint):
        raise UnsupportedError(f"default boundary solutions need a regular endpoint, {endpoint} is singular")
    U = p.fundamental_matrix(0.0, config)
    at_edge = U.endpoint(endpoint)
    c1 = np.linalg.solve(at_edge, np.array([0.0, 1.0 / beta], dtype=complex))
    c2 = np.linalg.solve(at_edge, np.array([-1.0 / beta, 0.0], dtype=complex))
    return (lambda x, side="balanced": U(x, side) @ c1), (lambda x, side="balanced": U(x, side) @ c2)


def lc_boundary_vector(
    p: SpectralProblem,
    u: Callable[..., Vector],
    endpoint: str,
    v1: Optional[Callable[..., Vector]] = None,
    v2: Optional[Callable[..., Vector]] = None,
    config: Optional[SolverConfig] = None,
) -> Vector:
    """ū = ((v₁*Ju)⁺(a), (v₂*Ju)⁺(a)) at a, or the (·)⁻(b) limits at b."""
    config = config or p.config
    check_real_system(p)
    regular = p.endpoint_regular(endpoint)
    if not regular and classify_endpoint(p, endpoint, 1j, config).verdict == LIMIT_POINT:
        raise UnsupportedError(f"endpoint {endpoint} is limit-point")
    if v1 is None or v2 is None:
        v1, v2 = default_boundary_solutions(p, endpoint, config)
    side = "right" if endpoint == "a" else "left"

    def pairing(x: float) -> Vector:
        ux = sided_value(u, x, side)
        return np.array([np.vdot(sided_value(v, x, side), p.J @ ux) for v in (v1, v2)])

    edge = p.interval.endpoint(endpoint)
    if regular:
        return pairing(edge)

    anchor = p.anchor()
    toward = (lambda level: anchor + level) if endpoint == "b" else (lambda level: anchor - level)
    if math.isfinite(edge):
        toward = lambda level: edge - (edge - anchor) / level
    value, _, err = UntilStable(start=1.0, max_doublings=TAIL_DOUBLINGS, tol=LC_RTOL).do(lambda level: pairing(toward(level)))
    if err is not None:
        raise ToleranceError(f"boundary vector at {endpoint} did not settle: {err}")
    return value


def plucker_residual(J, g: Vector, u: Vector, v1: Vector, v2: Vector) -> complex:
    """(g*Ju)(v₁*Jv₂) - (g*Jv₂)(v₁*Ju) + (g*Jv₁)(v₂*Ju); zero for real v₁, v₂."""
    J = np.asarray(J, dtype=complex)

    def form(x: Vector, y: Vector) -> complex:
        return complex(np.vdot(x, J @ y))

    return form(g, u) * form(v1, v2) - form(g, v2) * form(v1, u) + form(g, v1) * form(v2, u)

