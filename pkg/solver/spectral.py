"""Spectral transform 𝓕, its inverse 𝓖 and the Parseval / diagonalization checks of the regular case."""

import logging
from typing import Callable, List, Optional, Sequence

import numpy as np

from .config import SolverConfig, UsageError, ValidationError
from .ivp import SpectralProblem
from .model import (
    BoundaryConditions,
    DiagonalizationReport,
    GridFunction,
    Matrix,
    ParsevalReport,
    SpectralMeasure,
    TransformResult,
)
from .structure import inner_product, pair_defect, sided_value, w_norm

logger = logging.getLogger(__name__)

Function = Callable[[float], np.ndarray]


def transform_at(p: SpectralProblem, f: Function, t: complex, config: Optional[SolverConfig] = None) -> np.ndarray:
    """(𝓕f)(t) = ∫ U(·, t̄)* w f over (a, b)."""
    config = config or p.config
    U = p.fundamental_matrix(complex(t).conjugate(), config)
    value = p.w.stieltjes_integrate(
        lambda y: U(y).conj().T,
        p.interval.a,
        p.interval.b,
        "()",
        right=lambda y: np.asarray(f(y), dtype=complex).reshape(p.n, 1),
        breaks=p.breaks(),
        config=config,
    )
    return value[:, 0]


def _energy(sm: SpectralMeasure, left: Sequence[np.ndarray], right: Sequence[np.ndarray]) -> complex:
    return complex(sum(np.vdot(a, weight @ b) for a, weight, b in zip(left, sm.weights, right)))


def _require_weights(sm: SpectralMeasure) -> None:
    if len(sm.weights) != len(sm.eigenvalues):
        raise UsageError("spectral measure has no weights; build it with spectral_measure")


def fourier(p: SpectralProblem, sm: SpectralMeasure, f: Function, config: Optional[SolverConfig] = None) -> TransformResult:
    """f̂ₙ = ∫ U(·, λₙ)* w f for every eigenvalue of the measure, with the tail energy left outside the window."""
    config = config or p.config
    _require_weights(sm)
    coefficients = [transform_at(p, f, lam, config) for lam in sm.eigenvalues]
    norm = inner_product(p, f, f, config).real
    tail = max(norm - _energy(sm, coefficients, coefficients).real, 0.0)
    return TransformResult(coefficients=coefficients, measure=sm, window=sm.window, tail_energy=tail)


def inverse_evaluator(p: SpectralProblem, sm: SpectralMeasure, coefficients: Sequence[np.ndarray], config: Optional[SolverConfig] = None) -> Function:
    """x ↦ Σₙ U(x, λₙ) Δν(λₙ) f̂ₙ."""
    config = config or p.config
    _require_weights(sm)
    if len(coefficients) != len(sm.eigenvalues):
        raise UsageError(f"{len(coefficients)} coefficients for {len(sm.eigenvalues)} eigenvalues")
    matrices = [p.fundamental_matrix(lam, config) for lam in sm.eigenvalues]
    weighted = [weight @ np.asarray(c, dtype=complex) for weight, c in zip(sm.weights, coefficients)]

    def value(x: float, side: str = "balanced") -> np.ndarray:
        total = np.zeros(p.n, dtype=complex)
        for U, c in zip(matrices, weighted):
            total = total + U(x, side) @ c
        return total

    return value


def inverse(
    p: SpectralProblem,
    sm: SpectralMeasure,
    coefficients: Sequence[np.ndarray],
    grid: Sequence[float],
    config: Optional[SolverConfig] = None,
) -> GridFunction:
    evaluate = inverse_evaluator(p, sm, coefficients, config)
    points = np.asarray(sorted(grid), dtype=float)
    return GridFunction(grid=points, values=[evaluate(x) for x in points])


def projection(p: SpectralProblem, sm: SpectralMeasure, f: Function, config: Optional[SolverConfig] = None) -> Function:
    """ℙf = 𝓖𝓕f restricted to the measure's window."""
    return inverse_evaluator(p, sm, fourier(p, sm, f, config).coefficients, config)


def parseval_check(
    p: SpectralProblem,
    sm: SpectralMeasure,
    f: Function,
    g: Function,
    tol: float = 1e-8,
    config: Optional[SolverConfig] = None,
) -> ParsevalReport:
    """|⟨f, ℙg⟩_w - Σₙ f̂ₙ* Δν(λₙ) ĝₙ| with ℙ = 𝓖∘𝓕."""
    config = config or p.config
    f_hat = fourier(p, sm, f, config)
    g_hat = fourier(p, sm, g, config)
    lhs = inner_product(p, f, inverse_evaluator(p, sm, g_hat.coefficients, config), config)
    rhs = _energy(sm, f_hat.coefficients, g_hat.coefficients)
    tail = max(f_hat.tail_energy, g_hat.tail_energy)
    scale = max(1.0, w_norm(p, f, config) * w_norm(p, g, config))
    complete = tail <= tol * scale
    if not complete:
        logger.warning(f"transform window [{sm.window[0]}, {sm.window[1]}] leaves tail energy {tail:.3e}")
    return ParsevalReport(lhs=lhs, rhs=rhs, residual=abs(lhs - rhs), tail_energy=tail, window_complete=complete)


def diagonalization_check(
    p: SpectralProblem,
    sm: SpectralMeasure,
    bc: BoundaryConditions,
    u: Callable[..., np.ndarray],
    f: Function,
    tol: float = 1e-8,
    config: Optional[SolverConfig] = None,
) -> DiagonalizationReport:
    """maxₙ ‖Δν(λₙ)^{1/2}(f̂ₙ - λₙûₙ)‖ for a pair (u, f) of the self-adjoint relation.

    The identity f̂ = tû holds in L²(ν), so each difference is measured in the
    seminorm of its weight; components in the kernel of Δν(λₙ) do not count.
    """
    config = config or p.config
    _require_weights(sm)
    defect = pair_defect(p, u, f, config=config)
    a, b = p.interval.a, p.interval.b
    boundary = bc.matrix @ np.concatenate([sided_value(u, a, "right"), sided_value(u, b, "left")])
    membership = max(defect, float(np.max(np.abs(boundary), initial=0.0)))
    if membership > tol * 1e2:
        raise ValidationError(f"pair is not in the self-adjoint relation (residual {membership:.3e})")

    per: List[float] = []
    for lam, weight in zip(sm.eigenvalues, sm.weights):
        difference = transform_at(p, f, lam, config) - lam * transform_at(p, u, lam, config)
        per.append(float(np.sqrt(max(np.vdot(difference, weight @ difference).real, 0.0))))
    return DiagonalizationReport(residual=max(per, default=0.0), per_eigenvalue=per, membership_residual=membership)


def coefficient_matrix(result: TransformResult) -> Matrix:
    """Coefficients stacked as rows, one per eigenvalue."""
    if not result.coefficients:
        return np.zeros((0, 0), dtype=complex)
    return np.vstack([np.asarray(c) for c in result.coefficients])
