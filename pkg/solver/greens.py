"""F(λ), the M-function, Green's kernel, the resolvent and the discrete spectral measure at regular endpoints."""

import logging
import math
from dataclasses import replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import brentq, minimize_scalar

from private.linalg import hermitian_part, min_eigenvalue, singular_values
from private.refine import UntilStable

from .config import (
    LambdaForbiddenError,
    MULTIPLICITY_RTOL,
    PoleError,
    POLE_RTOL,
    RESIDUE_MAX_POINTS,
    RESIDUE_MAX_RADIUS,
    SolverConfig,
    ToleranceError,
    UsageError,
)
from .ivp import SpectralProblem, lambda_set, variation_of_constants
from .model import BalancedSolution, BoundaryConditions, KernelData, Matrix, SpectralMeasure
from .structure import pair_defect

logger = logging.getLogger(__name__)

ROUTES = ("plus", "minus")


def _column(f: Callable[[float], np.ndarray], n: int) -> Callable[[float], Matrix]:
    return lambda x: np.asarray(f(x), dtype=complex).reshape(n, 1)


def _blocks(p: SpectralProblem, k: KernelData, bc: BoundaryConditions, lam: complex, config: SolverConfig):
    """(F, b₊, b₋) with every boundary row divided by the norm of [Ã_a U(a), Ã_b U(b)] in that row."""
    U = p.fundamental_matrix(lam, config)
    left, right = bc.at_a @ U.endpoint("a"), bc.at_b @ U.endpoint("b")
    scale = np.linalg.norm(np.hstack([left, right]), axis=1)
    scale = np.where(scale > 0, scale, 1.0)[:, None]
    pad = np.zeros((k.dim_l0, p.n), dtype=complex)
    F = np.vstack([(left + right) / scale, k.n0_basis.conj().T])
    b_plus = np.vstack([-(right @ p.Jinv) / scale, pad])
    b_minus = np.vstack([(left @ p.Jinv) / scale, pad])
    return F, b_plus, b_minus


def _check_pole(F: Matrix, lam: complex) -> None:
    s = singular_values(F)
    if not s.size or s[-1] > POLE_RTOL:
        return
    if complex(lam).imag == 0:
        raise PoleError(f"F(λ) is singular at λ={lam}: λ is an eigenvalue")
    # off the real axis F is invertible; a vanishing σ_min means the propagation lost precision
    raise ToleranceError(f"F(λ) lost precision at non-real λ={lam} (σ_min {s[-1]:.3e})")


def assemble_F(p: SpectralProblem, k: KernelData, bc: BoundaryConditions, lam: complex, config: Optional[SolverConfig] = None) -> Matrix:
    """Boundary rows Ã_a U(a,λ) + Ã_b U(b,λ), row-equilibrated, stacked over the rows N₀* of 𝟙 - P."""
    F, _, _ = _blocks(p, k, bc, lam, config or p.config)
    return F


class MFunction:
    """λ ↦ M(λ) = P(F⁻¹b₊ + ½J⁻¹)P, or P(F⁻¹b₋ - ½J⁻¹)P on the minus route."""

    def __init__(self, p: SpectralProblem, k: KernelData, bc: BoundaryConditions, route: str = "plus", config: Optional[SolverConfig] = None):
        if route not in ROUTES:
            raise UsageError(f"route must be one of {ROUTES}, got {route!r}")
        self.problem, self.kernel, self.conditions = p, k, bc
        self.route = route
        self.config = config or p.config

    def blocks(self, lam: complex) -> Tuple[Matrix, Matrix, Matrix]:
        """(F, H₊, H₋) at λ."""
        F, b_plus, b_minus = _blocks(self.problem, self.kernel, self.conditions, lam, self.config)
        _check_pole(F, lam)
        return F, scipy.linalg.solve(F, b_plus), scipy.linalg.solve(F, b_minus)

    def __call__(self, lam: complex) -> Matrix:
        _, h_plus, h_minus = self.blocks(lam)
        P, half = self.kernel.projection, 0.5 * self.problem.Jinv
        inner = h_plus + half if self.route == "plus" else h_minus - half
        return P @ inner @ P

    def herglotz_floor(self, lam: complex) -> float:
        """Smallest eigenvalue of (M(λ) - M(λ)*)/(2i Im λ)."""
        if lam.imag == 0:
            raise UsageError("Herglotz test needs a non-real λ")
        m = self(lam)
        return min_eigenvalue((m - m.conj().T) / (2j * lam.imag))

    def conjugate_defect(self, lam: complex) -> float:
        """‖M(λ̄) - M(λ)*‖_max."""
        return float(np.max(np.abs(self(complex(lam).conjugate()) - self(lam).conj().T)))


def m_function(p: SpectralProblem, k: KernelData, bc: BoundaryConditions, route: str = "plus", config: Optional[SolverConfig] = None) -> MFunction:
    return MFunction(p, k, bc, route, config)


class GreenKernel:
    """G(x,y,λ) = U(x,λ) H̃(x,y,λ) U(y,λ̄)*."""

    def __init__(self, p: SpectralProblem, k: KernelData, bc: BoundaryConditions, lam: complex, config: Optional[SolverConfig] = None):
        self.problem, self.kernel, self.conditions = p, k, bc
        self.lam = complex(lam)
        self.config = config or p.config
        self.m = MFunction(p, k, bc, "plus", self.config)(self.lam)
        self._U = p.fundamental_matrix(self.lam, self.config)
        self._Ubar = p.fundamental_matrix(self.lam.conjugate(), self.config)

    def correction(self, x: float) -> Matrix:
        """S(x,λ) = ¼U(x,λ)⁻¹(U⁺(x,λ) - U⁻(x,λ))J⁻¹, zero away from atoms."""
        p = self.problem
        if not p.interval.contains(x) or x not in p.atom_locations():
            return np.zeros((p.n, p.n), dtype=complex)
        jump = self._U.right(x) - self._U.left(x)
        return 0.25 * scipy.linalg.solve(self._U(x), jump) @ p.Jinv

    def middle(self, x: float, y: float) -> Matrix:
        p, P = self.problem, self.kernel.projection
        eye = np.eye(p.n, dtype=complex)
        h = self.m + 0.5 * (eye - P) @ p.Jinv @ P * np.sign(y - p.x0) - 0.5 * p.Jinv @ P * np.sign(y - x)
        if x == y:
            h = h + self.correction(x)
        return h

    def __call__(self, x: float, y: float) -> Matrix:
        return self._U(x) @ self.middle(x, y) @ self._Ubar(y).conj().T


def green_kernel(p: SpectralProblem, k: KernelData, bc: BoundaryConditions, lam: complex, config: Optional[SolverConfig] = None) -> GreenKernel:
    return GreenKernel(p, k, bc, lam, config)


def _initial_value(p, k, bc, lam, f, config) -> Matrix:
    F, b_plus, b_minus = _blocks(p, k, bc, lam, config)
    _check_pole(F, lam)
    Ubar = p.fundamental_matrix(complex(lam).conjugate(), config)
    a, b = p.interval.a, p.interval.b
    column = _column(f, p.n)

    def integral(c: float, d: float) -> Matrix:
        if c >= d:
            return np.zeros((p.n, 1), dtype=complex)
        return p.w.stieltjes_integrate(lambda y: Ubar(y).conj().T, c, d, "()", right=column, breaks=p.breaks(), config=config)

    return scipy.linalg.solve(F, b_minus @ integral(a, p.x0) + b_plus @ integral(p.x0, b))


def resolvent_apply(
    p: SpectralProblem,
    k: KernelData,
    bc: BoundaryConditions,
    lam: complex,
    f: Callable[[float], np.ndarray],
    grid: Sequence[float] = (),
    config: Optional[SolverConfig] = None,
) -> BalancedSolution:
    """v = E_λ f: the balanced solution of Jv' + qv = w(λv + f) with Ãv_bnd = 0 and (𝟙 - P)v(x0) = 0."""
    config = config or p.config
    u0 = _initial_value(p, k, bc, lam, f, config)[:, 0]
    particular = variation_of_constants(p, lam, f, grid, config)
    U = p.fundamental_matrix(lam, config)
    values = [U(x) @ u0 + particular.values[i] for i, x in enumerate(particular.grid)]
    left = {x: U.left(x) @ u0 + v for x, v in particular.left.items()}
    right = {x: U.right(x) @ u0 + v for x, v in particular.right.items()}
    return BalancedSolution(grid=particular.grid, values=values, left=left, right=right, lam=lam, tolerance=particular.tolerance)


def resolvent_evaluator(
    p: SpectralProblem,
    k: KernelData,
    bc: BoundaryConditions,
    lam: complex,
    f: Callable[[float], np.ndarray],
    config: Optional[SolverConfig] = None,
) -> Callable[..., np.ndarray]:
    """E_λ f as a pointwise evaluator v(x, side)."""
    config = config or p.config
    u0 = _initial_value(p, k, bc, lam, f, config)
    U = p.fundamental_matrix(lam, config)
    Ubar = p.fundamental_matrix(complex(lam).conjugate(), config)
    column = _column(f, p.n)
    breaks = p.breaks()

    def integral(c: float, d: float, convention: str) -> Matrix:
        return p.w.stieltjes_integrate(lambda y: Ubar(y).conj().T, c, d, convention, right=column, breaks=breaks, config=config)

    def atom(x: float) -> Matrix:
        if not p.interval.contains(x) or p.w.atom_at(x) is None:
            return np.zeros((p.n, 1), dtype=complex)
        return Ubar(x).conj().T @ p.w.jump(x) @ column(x)

    def value(x: float, side: str = "balanced") -> np.ndarray:
        if x == p.x0:
            return U(x) @ u0[:, 0]
        if x > p.x0:
            before = integral(p.x0, x, "[)")
            left = U.left(x) @ (u0 + p.Jinv @ before)
            right = U.right(x) @ (u0 + p.Jinv @ (before + atom(x)))
        else:
            after = integral(x, p.x0, "()")
            right = U.right(x) @ (u0 - p.Jinv @ after)
            left = U.left(x) @ (u0 - p.Jinv @ (after + atom(x)))
        chosen = {"left": left, "right": right}.get(side, 0.5 * (left + right))
        return chosen[:, 0]

    return value


def resolvent_defect(
    p: SpectralProblem,
    k: KernelData,
    bc: BoundaryConditions,
    lam: complex,
    f: Callable[[float], np.ndarray],
    grid: Sequence[float] = (),
    config: Optional[SolverConfig] = None,
) -> Tuple[float, float]:
    """(equation residual, boundary residual) of v = E_λ f."""
    config = config or p.config
    v = resolvent_evaluator(p, k, bc, lam, f, config)

    def rhs(x: float, side: str = "balanced") -> np.ndarray:
        return lam * v(x, side) + np.asarray(f(x), dtype=complex)

    equation = pair_defect(p, v, rhs, grid, config)
    boundary = bc.matrix @ np.concatenate([v(p.interval.a, "right"), v(p.interval.b, "left")])
    return equation, float(np.max(np.abs(boundary), initial=0.0))


## [Eigenvalues]

def _indicator(F: Matrix) -> float:
    # rows of F are equilibrated, so σ_min is on the same scale for every λ and every n
    return float(singular_values(F)[-1])


def _narrow(indicator: Callable[[float], float], lo: float, hi: float, rounds: int = 4) -> Tuple[float, float]:
    for _ in range(rounds):
        xs = np.linspace(lo, hi, 5)
        values = [indicator(x) for x in xs]
        i = int(np.argmin(values))
        lo, hi = float(xs[max(i - 1, 0)]), float(xs[min(i + 1, 4)])
    return lo, hi


def _local_minima(values: np.ndarray) -> List[int]:
    last = len(values) - 1
    found = []
    for i in range(1, last):
        if values[i] <= values[i - 1] and values[i] <= values[i + 1] and values[i] < max(values[i - 1], values[i + 1]):
            found.append(i)
    if last > 0 and values[0] < values[1]:
        found.insert(0, 0)
    if last > 0 and values[last] < values[last - 1]:
        found.append(last)
    return found


def eigenvalues(
    p: SpectralProblem,
    k: KernelData,
    bc: BoundaryConditions,
    window: Tuple[float, float],
    config: Optional[SolverConfig] = None,
) -> SpectralMeasure:
    """Real λ in the window where F(λ) loses rank, with multiplicities.

    A coarse-tolerance scan of σ_min of the row-equilibrated F over scan_points nodes brackets the
    local minima; each bracket is narrowed by halving and then resolved on the
    phase-normalized det F(λ) (brentq) or, without a sign change, by bounded
    minimization of the indicator.
    """
    config = config or p.config
    lo, hi = float(window[0]), float(window[1])
    if not lo <= hi:
        raise UsageError(f"window [{lo}, {hi}] is not ordered")
    forbidden = lambda_set(p)
    if not forbidden.real_free:
        raise LambdaForbiddenError("Λ meets the real axis, the real spectrum cannot be scanned")
    if lo == hi:
        return SpectralMeasure(window=(lo, hi))

    coarse = replace(config, ode_rtol=max(config.scan_rtol, config.ode_rtol), ode_atol=max(config.scan_rtol * 1e-2, config.ode_atol))

    def rough(lam: float) -> float:
        return _indicator(assemble_F(p, k, bc, lam, coarse))

    def fine(lam: float) -> float:
        return _indicator(assemble_F(p, k, bc, lam, config))

    grid = np.linspace(lo, hi, config.scan_points)
    values = np.array([rough(x) for x in grid])
    step = grid[1] - grid[0]

    found: List[float] = []
    for i in _local_minima(values):
        left, right = max(lo, grid[i] - step), min(hi, grid[i] + step)
        left, right = _narrow(rough, left, right)
        candidate = None
        if p.n <= 4:
            d_left = np.linalg.det(assemble_F(p, k, bc, left, config))
            d_right = np.linalg.det(assemble_F(p, k, bc, right, config))
            chord = d_right - d_left
            if abs(chord) > 0:
                phase = np.conj(chord) / abs(chord)

                def signed(lam: float) -> float:
                    return float((np.linalg.det(assemble_F(p, k, bc, lam, config)) * phase).real)

                g_left, g_right = (d_left * phase).real, (d_right * phase).real
                if g_left == 0:
                    candidate = left
                elif g_right == 0:
                    candidate = right
                elif g_left * g_right < 0:
                    candidate = brentq(signed, left, right, xtol=config.eig_tol, rtol=4 * np.finfo(float).eps)
        if candidate is None:
            result = minimize_scalar(fine, bounds=(left, right), method="bounded", options={"xatol": config.eig_tol})
            candidate = float(result.x)
        level = fine(candidate)
        if level < config.eig_threshold and lo <= candidate <= hi:
            if not any(abs(candidate - e) <= 10 * config.eig_tol * max(1.0, abs(e)) for e in found):
                found.append(float(candidate))
                logger.info(f"eigenvalue {candidate:.12g} (indicator {level:.3e})")
        else:
            logger.debug(f"rejected local minimum near {candidate:.6g} (indicator {level:.3e})")

    found.sort()
    multiplicities = []
    for lam in found:
        s = singular_values(assemble_F(p, k, bc, lam, config))
        multiplicities.append(max(1, int(np.sum(s <= MULTIPLICITY_RTOL))))
    return SpectralMeasure(eigenvalues=found, multiplicities=multiplicities, window=(lo, hi))


## [Spectral Measure]

def _residue(mf: MFunction, lam_n: float, gap: float = math.inf) -> Tuple[Matrix, float]:
    config = mf.config
    distance = lambda_set(mf.problem).distance(lam_n)
    radius = min(gap / 4, distance / 4, RESIDUE_MAX_RADIUS)
    if not radius > 0:
        raise PoleError(f"no contour room around {lam_n} (gap {gap}, distance to Λ {distance})")

    def trapezoid(points: float) -> Matrix:
        count = int(points)
        theta = 2 * np.pi * np.arange(count) / count
        total = np.zeros((mf.problem.n, mf.problem.n), dtype=complex)
        for t in theta:
            z = lam_n + radius * np.exp(1j * t)
            try:
                total = total + mf(z) * np.exp(1j * t)
            except (PoleError, ToleranceError, LambdaForbiddenError) as e:
                raise PoleError(f"residue contour around {lam_n} hits a singularity: {e}")
        return -radius / count * total

    doublings = max(1, int(round(math.log2(RESIDUE_MAX_POINTS / config.residue_points))))
    value, change, err = UntilStable(start=config.residue_points, max_doublings=doublings, tol=config.residue_tol).do(trapezoid)
    if err is not None:
        logger.warning(f"residue at {lam_n} not stable: {err}")
    weight, deviation = hermitian_part(value)
    if deviation > config.residue_tol * max(1.0, float(np.max(np.abs(weight)))):
        logger.warning(f"residue at {lam_n} symmetrized, skew part {deviation:.3e}")
    return weight, deviation


def residue_weights(mf: MFunction, lam_n: float, gap: float = math.inf) -> Matrix:
    """Δν(λₙ) = -(1/2πi)∮ M(z) dz on a circle around λₙ, symmetrized to a Hermitian matrix."""
    weight, _ = _residue(mf, lam_n, gap)
    return weight


def spectral_measure(mf: MFunction, window: Tuple[float, float]) -> SpectralMeasure:
    measure = eigenvalues(mf.problem, mf.kernel, mf.conditions, window, mf.config)
    points = measure.eigenvalues
    for i, lam in enumerate(points):
        neighbours = [abs(lam - other) for j, other in enumerate(points) if j != i]
        weight, deviation = _residue(mf, lam, min(neighbours, default=math.inf))
        measure.weights.append(weight)
        measure.deviations.append(deviation)
    logger.info(f"spectral measure on [{window[0]}, {window[1]}]: {len(points)} atoms")
    return measure
