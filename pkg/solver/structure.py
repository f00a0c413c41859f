"""Definiteness kernel, deficiency indices and self-adjoint boundary conditions at regular endpoints."""

import functools
import inspect
import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from private.linalg import null_space, numerical_rank, psd_split, range_basis

from .config import (
    BoundaryConditionError,
    DomainError,
    SolverConfig,
    UnsupportedError,
    ValidationError,
)
from .ivp import SpectralProblem, lambda_set
from .model import BoundaryConditions, KernelData, Matrix

logger = logging.getLogger(__name__)

SidedFunction = Callable[..., np.ndarray]

SEPARATED = "separated"
COUPLED = "coupled"
MIXED = "mixed"


def _require_regular(p: SpectralProblem) -> None:
    for end in ("a", "b"):
        if not p.endpoint_regular(end):
            raise UnsupportedError(f"endpoint {end}={p.interval.endpoint(end)} is not regular")


@functools.lru_cache(maxsize=256)
def _takes_side(u: SidedFunction) -> bool:
    try:
        parameters = inspect.signature(u).parameters.values()
    except (TypeError, ValueError):
        return False
    return any(param.name == "side" or param.kind is inspect.Parameter.VAR_KEYWORD for param in parameters)


def sided_value(u: SidedFunction, x: float, side: str) -> np.ndarray:
    """u(x, side=side) when u declares a side parameter, otherwise u(x)."""
    try:
        sided = _takes_side(u)
    except TypeError:
        # unhashable callables are inspected every time
        sided = _takes_side.__wrapped__(u)
    if sided:
        return np.asarray(u(x, side=side), dtype=complex)
    return np.asarray(u(x), dtype=complex)


def gram_matrix(p: SpectralProblem, lam: complex, c: float, d: float, config: Optional[SolverConfig] = None) -> Matrix:
    """∫_(c,d) U(·,λ)* w U(·,λ) with balanced U at atoms."""
    config = config or p.config
    if c >= d:
        return np.zeros((p.n, p.n), dtype=complex)
    U = p.fundamental_matrix(lam, config)
    return p.w.stieltjes_integrate(lambda y: U(y).conj().T, c, d, "()", right=U, breaks=p.breaks(), config=config)


def compute_kernel(p: SpectralProblem, config: Optional[SolverConfig] = None) -> KernelData:
    """𝓛₀ = {u : Ju' + qu = 0, wu = 0} through the null space of the Gram matrix of U(·, 0)."""
    config = config or p.config
    if p.w.is_zero:
        raise ValidationError("w vanishes identically, so L²(w) is trivial")
    _require_regular(p)

    a, b = p.interval.a, p.interval.b
    gram_left = gram_matrix(p, 0.0, a, p.x0, config)
    gram_right = gram_matrix(p, 0.0, p.x0, b, config)
    gram = gram_left + gram_right
    gram = 0.5 * (gram + gram.conj().T)

    null, _ = psd_split(gram, config.nullspace_rtol)
    projection = np.eye(p.n, dtype=complex) - null @ null.conj().T
    logger.info(f"definiteness kernel: dim L0 = {null.shape[1]}, n = {p.n}")
    return KernelData(
        dim_l0=null.shape[1],
        n0_basis=null,
        projection=projection,
        gram=gram,
        gram_left=gram_left,
        gram_right=gram_right,
    )


def deficiency_indices_regular(p: SpectralProblem, k: KernelData) -> Tuple[int, int]:
    _require_regular(p)
    index = p.n - k.dim_l0
    return index, index


def boundary_form(p: SpectralProblem) -> Matrix:
    """𝕁 = diag(J, -J) acting on (u(a); u(b))."""
    n = p.n
    form = np.zeros((2 * n, 2 * n), dtype=complex)
    form[:n, :n] = p.J
    form[n:, n:] = -p.J
    return form


def boundary_values(p: SpectralProblem, lam: complex, columns: Matrix, config: Optional[SolverConfig] = None) -> Matrix:
    """(U(a,λ)C; U(b,λ)C) for the columns C."""
    U = p.fundamental_matrix(lam, config)
    return np.vstack([U.endpoint("a") @ columns, U.endpoint("b") @ columns])


def null_boundary_values(p: SpectralProblem, k: KernelData, config: Optional[SolverConfig] = None) -> Matrix:
    """Boundary data N of 𝓛₀; its elements solve the equation for every λ."""
    return boundary_values(p, 0.0, k.n0_basis, config)


def _reference_lambda(p: SpectralProblem) -> complex:
    forbidden = lambda_set(p)
    for scale in (1.0, 2.0, 0.5, 3.0, 0.25, 5.0, 0.125, 7.0):
        lam = 1j * scale
        if forbidden.distance(lam) > 1e-3 and forbidden.distance(lam.conjugate()) > 1e-3:
            return lam
    raise UnsupportedError("no point off Λ on the imaginary axis")


def boundary_space_w(p: SpectralProblem, k: KernelData, lam: Optional[complex] = None, config: Optional[SolverConfig] = None) -> Matrix:
    """Orthonormal basis of W, the boundary values of U(·,λ)c and U(·,λ̄)c with c ∈ ran P."""
    config = config or p.config
    if k.dim_l0 == 0:
        # n₊ = n, so W is all of ℂ²ⁿ
        return np.eye(2 * p.n, dtype=complex)
    lam = _reference_lambda(p) if lam is None else complex(lam)
    if lam.imag == 0:
        raise DomainError("the boundary space needs a non-real λ")
    ran = range_basis(k.projection, config.nullspace_rtol)
    values = np.hstack([boundary_values(p, lam, ran, config), boundary_values(p, lam.conjugate(), ran, config)])
    return range_basis(values, config.nullspace_rtol)


def classify(matrix: Matrix, n_plus: int, rtol: float = 1e-9) -> str:
    """separated, coupled or mixed from the ranks of the a- and b-blocks."""
    matrix = np.atleast_2d(matrix)
    half = matrix.shape[1] // 2
    rank_a = numerical_rank(matrix[:, :half], rtol)
    rank_b = numerical_rank(matrix[:, half:], rtol)
    if rank_a + rank_b == n_plus:
        return SEPARATED
    if rank_a == n_plus and rank_b == n_plus:
        return COUPLED
    return MIXED


def validate_boundary_conditions(
    p: SpectralProblem,
    k: KernelData,
    matrix,
    config: Optional[SolverConfig] = None,
    space: Optional[Matrix] = None,
) -> BoundaryConditions:
    """Accept Ã iff it has full rank n₊, Ã𝕁⁻¹Ã* = 0, 𝕁⁻¹Ã* ⊂ W and Ã annihilates N."""
    config = config or p.config
    n_plus, _ = deficiency_indices_regular(p, k)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
    if n_plus == 0 and matrix.size == 0:
        matrix = np.zeros((0, 2 * p.n), dtype=complex)
    if matrix.shape != (n_plus, 2 * p.n):
        raise BoundaryConditionError(
            f"boundary matrix must be {n_plus}x{2 * p.n}, got {matrix.shape[0]}x{matrix.shape[1]}", kinds=("shape",)
        )

    scale = max(1.0, float(np.max(np.abs(matrix), initial=0.0)))
    form_inv = scipy.linalg.inv(boundary_form(p))
    adjoint = form_inv @ matrix.conj().T
    residuals = {}
    failed = []

    rank = numerical_rank(matrix, config.nullspace_rtol)
    residuals["rank"] = float(n_plus - rank)
    if rank != n_plus:
        failed.append("rank")

    residuals["symmetry"] = float(np.max(np.abs(matrix @ adjoint), initial=0.0)) / scale**2
    if residuals["symmetry"] > config.boundary_tol:
        failed.append("symmetry")

    if space is None:
        space = boundary_space_w(p, k, config=config)
    outside = adjoint - space @ (space.conj().T @ adjoint)
    residuals["range"] = float(np.max(np.abs(outside), initial=0.0)) / scale
    if residuals["range"] > config.boundary_tol:
        failed.append("range")

    if k.dim_l0:
        residuals["kernel"] = float(np.max(np.abs(matrix @ null_boundary_values(p, k, config)), initial=0.0)) / scale
        if residuals["kernel"] > config.boundary_tol:
            failed.append("kernel")
    else:
        residuals["kernel"] = 0.0

    if failed:
        detail = ", ".join(f"{name} ({residuals[name]:.3e})" for name in failed)
        logger.warning(f"boundary conditions rejected: {detail}")
        raise BoundaryConditionError(f"boundary conditions rejected: {detail}", kinds=failed)

    classification = classify(matrix, n_plus, config.boundary_tol)
    logger.info(f"boundary conditions accepted ({classification}, n+ = {n_plus})")
    return BoundaryConditions(matrix=matrix, n_plus=n_plus, classification=classification, residuals=residuals)


def reduce_conditions(p: SpectralProblem, k: KernelData, rows, config: Optional[SolverConfig] = None) -> BoundaryConditions:
    """Canonical n₊×2n boundary matrix from physically stated rows.

    Row combinations that do not vanish on N are discarded, the rest are replaced
    by Ã Q (Q*𝕁Q)⁻¹ Q*𝕁 with Q an orthonormal basis of W, which keeps their
    action on W and puts 𝕁⁻¹Ã* inside W.
    """
    config = config or p.config
    n_plus, _ = deficiency_indices_regular(p, k)
    rows = np.atleast_2d(np.asarray(rows, dtype=complex))
    if rows.shape[1] != 2 * p.n:
        raise BoundaryConditionError(f"boundary rows need {2 * p.n} columns, got {rows.shape[1]}", kinds=("shape",))

    if k.dim_l0:
        action = rows @ null_boundary_values(p, k, config)
        combos = null_space(action.conj().T, config.nullspace_rtol).conj().T
        rows = combos @ rows
    if rows.shape[0]:
        rows = range_basis(rows.conj().T, config.nullspace_rtol).conj().T
    if rows.shape[0] != n_plus:
        raise BoundaryConditionError(
            f"stated conditions leave {rows.shape[0]} independent rows on the boundary space, expected {n_plus}", kinds=("reduce",)
        )

    space = boundary_space_w(p, k, config=config)
    form = boundary_form(p)
    pairing = space.conj().T @ form @ space
    canonical = rows @ space @ scipy.linalg.solve(pairing, space.conj().T @ form)
    logger.debug(f"reduced boundary conditions to {canonical.shape[0]} rows")
    return validate_boundary_conditions(p, k, canonical, config, space)


def inner_product(p: SpectralProblem, u: SidedFunction, v: SidedFunction, config: Optional[SolverConfig] = None) -> complex:
    """⟨u, v⟩_w = ∫ u* w v over (a, b), balanced values at atoms."""
    config = config or p.config
    value = p.w.stieltjes_integrate(
        lambda x: np.conj(sided_value(u, x, "balanced")).reshape(1, -1),
        p.interval.a,
        p.interval.b,
        "()",
        right=lambda x: sided_value(v, x, "balanced").reshape(-1, 1),
        breaks=p.breaks(),
        config=config,
    )
    return complex(value[0, 0])


def w_norm(p: SpectralProblem, u: SidedFunction, config: Optional[SolverConfig] = None) -> float:
    return math.sqrt(max(inner_product(p, u, u, config).real, 0.0))


def pair_defect(
    p: SpectralProblem,
    u: SidedFunction,
    f: SidedFunction,
    grid: Sequence[float] = (),
    config: Optional[SolverConfig] = None,
) -> float:
    """Largest residual of J(u⁻(x) - u(x0)) = ∫_[x0,x) (wf - qu) and its mirror for x < x0."""
    config = config or p.config
    a, b = p.interval.a, p.interval.b
    if not grid:
        lo = a if math.isfinite(a) else p.x0 - 8.0
        hi = b if math.isfinite(b) else p.x0 + 8.0
        grid = list(np.linspace(lo, hi, 9)) + [x for x in p.atom_locations() if lo <= x <= hi]
    eye = np.eye(p.n, dtype=complex)
    breaks = p.breaks()
    start = sided_value(u, p.x0, "right")

    def column(g):
        return lambda x: sided_value(g, x, "balanced").reshape(-1, 1)

    worst = 0.0
    for x in sorted(set(grid)):
        if x == p.x0 or not a <= x <= b or math.isinf(x):
            continue
        if x > p.x0:
            forcing = p.w.stieltjes_integrate(lambda y: eye, p.x0, x, "[)", right=column(f), breaks=breaks, config=config)
            potential = p.q.stieltjes_integrate(lambda y: eye, p.x0, x, "[)", right=column(u), breaks=breaks, config=config)
            residual = p.J @ (sided_value(u, x, "left").reshape(-1, 1) - start.reshape(-1, 1)) - (forcing - potential)
        else:
            forcing = p.w.stieltjes_integrate(lambda y: eye, x, p.x0, "()", right=column(f), breaks=breaks, config=config)
            potential = p.q.stieltjes_integrate(lambda y: eye, x, p.x0, "()", right=column(u), breaks=breaks, config=config)
            residual = p.J @ (start.reshape(-1, 1) - sided_value(u, x, "right").reshape(-1, 1)) - (forcing - potential)
        worst = max(worst, float(np.max(np.abs(residual))))
    return worst


def lagrange_residual(
    p: SpectralProblem,
    first: Tuple[SidedFunction, SidedFunction],
    second: Tuple[SidedFunction, SidedFunction],
    config: Optional[SolverConfig] = None,
    check: bool = True,
    tol: float = 1e-8,
) -> complex:
    """(v*Ju)⁻(b) - (v*Ju)⁺(a) - (⟨v,f⟩ - ⟨g,u⟩) for pairs (u,f), (v,g) of the maximal relation."""
    config = config or p.config
    _require_regular(p)
    (u, f), (v, g) = first, second
    if check:
        for name, (sol, rhs) in (("(u, f)", first), ("(v, g)", second)):
            defect = pair_defect(p, sol, rhs, config=config)
            scale = max(1.0, float(np.max(np.abs(sided_value(sol, p.x0, "right")))))
            if defect > tol * scale * 1e2:
                raise ValidationError(f"{name} does not solve Ju' + qu = wf (defect {defect:.3e})")

    a, b = p.interval.a, p.interval.b
    at_b = np.vdot(sided_value(v, b, "left"), p.J @ sided_value(u, b, "left"))
    at_a = np.vdot(sided_value(v, a, "right"), p.J @ sided_value(u, a, "right"))
    return complex(at_b - at_a - (inner_product(p, v, f, config) - inner_product(p, g, u, config)))
