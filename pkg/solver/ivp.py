"""Balanced initial value problems, fundamental matrices and the forbidden set Λ."""

import logging
import math
import threading
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from private.linalg import near_singular
from private.refine import UntilStable

from .cache import EvaluatorCache
from .config import (
    CONDITION_WARN,
    DomainError,
    IntegrationError,
    LAMBDA_REAL_TOL,
    LambdaForbiddenError,
    SolverConfig,
    TAIL_DOUBLINGS,
    ToleranceError,
    UnsupportedError,
    UsageError,
    ValidationError,
)
from .measures import MatrixMeasure, combine, validate_coefficients
from .model import (
    BalancedSolution,
    DerivativeReport,
    Evaluator,
    LambdaPoint,
    LambdaSet,
    Matrix,
    RealInterval,
    WronskianReport,
)

logger = logging.getLogger(__name__)

Endpoint = Union[float, str]


def _cross_matrix(r: MatrixMeasure, x: float, sign: int) -> Matrix:
    return np.eye(r.shape[0], dtype=complex) + sign * r.jump(x) / 2


def _check_crossing(m: Matrix, x: float, lam: complex, config: SolverConfig) -> None:
    singular, cond = near_singular(m, config.forbidden_rtol)
    if singular:
        raise LambdaForbiddenError(f"lambda-forbidden: 1 ± Δ_r/2 is singular at atom x={x} (λ={lam})", location=x, lam=lam)
    if cond > CONDITION_WARN:
        logger.warning(f"ill-conditioned atom crossing at x={x}: condition number {cond:.3e}")


class _Segment:
    __slots__ = ("lo", "hi", "start", "value", "kind", "payload", "cols")

    def __init__(self, lo, hi, start, value, kind, payload, cols):
        self.lo, self.hi, self.start, self.value = lo, hi, start, value
        self.kind, self.payload, self.cols = kind, payload, cols

    def evaluate(self, x: float) -> Matrix:
        if self.kind == "zero":
            return self.value
        if self.kind == "expm":
            n = self.value.shape[0]
            lifted = np.vstack([self.value, np.eye(self.cols, dtype=complex)])
            return (scipy.linalg.expm(self.payload * (x - self.start)) @ lifted)[:n]
        return np.asarray(self.payload(x)).reshape(self.value.shape)


class _Sweep:
    """Propagation of u' = r u + g from an anchor in one direction, extended on demand."""

    def __init__(self, r: MatrixMeasure, g: Optional[MatrixMeasure], x0: float, start: Matrix, direction: int, lam: complex, config: SolverConfig):
        self.r, self.g, self.direction, self.lam, self.config = r, g, direction, lam, config
        self.reach = x0
        self.state = start
        self.segments: List[_Segment] = []
        self.sides: Dict[float, Tuple[Matrix, Matrix, Matrix]] = {}
        stops = set(r.breakpoints())
        atoms = {a.location for a in r.atoms}
        if g is not None:
            stops |= set(g.breakpoints())
            atoms |= {a.location for a in g.atoms}
        self.atoms = atoms
        ordered = sorted(s for s in stops if (s > x0 if direction > 0 else s < x0))
        self.stops = ordered if direction > 0 else ordered[::-1]
        self.limit: Optional[Matrix] = None

    def _beyond(self, x: float, y: float) -> bool:
        return x > y if self.direction > 0 else x < y

    def _densities(self, s: float, t: float):
        mid = _midpoint(s, t)
        piece_r = self.r.piece_at(mid)
        piece_g = self.g.piece_at(mid) if self.g is not None else None
        return piece_r, piece_g

    def _integrate(self, t: float) -> None:
        s = self.reach
        if s == t:
            return
        piece_r, piece_g = self._densities(s, t)
        cols = self.state.shape[1]
        zero_r = piece_r is None or piece_r.is_zero
        zero_g = piece_g is None or piece_g.is_zero
        lo, hi = min(s, t), max(s, t)

        if zero_r and zero_g:
            segment = _Segment(lo, hi, s, self.state, "zero", None, cols)
        elif (zero_r or piece_r.is_constant) and (zero_g or piece_g.is_constant):
            n = self.state.shape[0]
            a = np.zeros((n + cols, n + cols), dtype=complex)
            if not zero_r:
                a[:n, :n] = piece_r.coefficients[0]
            if not zero_g:
                a[:n, n:] = np.broadcast_to(piece_g.coefficients[0], (n, cols))
            segment = _Segment(lo, hi, s, self.state, "expm", a, cols)
        else:
            shape = self.state.shape

            def rhs(x, y):
                u = y.reshape(shape)
                du = (piece_r.density(x) @ u) if not zero_r else np.zeros(shape, dtype=complex)
                if not zero_g:
                    du = du + np.asarray(piece_g.density(x)).reshape(shape[0], -1)
                return du.ravel()

            try:
                sol = solve_ivp(
                    rhs, (s, t), self.state.ravel().astype(complex),
                    method=self.config.ode_method, rtol=self.config.ode_rtol, atol=self.config.ode_atol, dense_output=True,
                )
            except Exception as e:
                raise IntegrationError(f"failed to integrate on [{lo}, {hi}]: {e}")
            if sol.status != 0:
                raise ToleranceError(f"integrator failed on [{lo}, {hi}]: {sol.message}")
            segment = _Segment(lo, hi, s, self.state, "ode", sol.sol, cols)

        self.segments.append(segment)
        self.state = segment.evaluate(t)
        self.reach = t

    def _cross(self, x: float) -> None:
        arriving = self.state
        dg = self.g.jump(x) if self.g is not None and self.g.interval.contains(x) else None
        m = _cross_matrix(self.r, x, -self.direction)
        _check_crossing(m, x, self.lam, self.config)
        rhs = arriving + (self.direction * dg / 2 if dg is not None else 0)
        balanced = scipy.linalg.solve(m, rhs)
        leaving = 2 * balanced - arriving
        if self.direction > 0:
            self.sides[x] = (arriving, balanced, leaving)
        else:
            self.sides[x] = (leaving, balanced, arriving)
        self.state = leaving

    def extend(self, target: float) -> None:
        if math.isinf(target) and self.limit is not None:
            return
        while self._beyond(target, self.reach):
            if math.isinf(target) and not self.stops:
                self._tail(target)
                return
            if self.stops and not self._beyond(self.stops[0], target):
                stop = self.stops.pop(0)
                self._integrate(stop)
                if stop in self.atoms:
                    self._cross(stop)
            else:
                self._integrate(target)

    def _tail(self, target: float) -> None:
        piece_r, piece_g = self._densities(self.reach, target)
        if (piece_r is None or piece_r.is_zero) and (piece_g is None or piece_g.is_zero):
            self.limit = self.state
            return
        if (piece_r is None or piece_r.coefficients is not None) and (piece_g is None or piece_g.coefficients is not None):
            raise UnsupportedError(f"endpoint {target} is not regular: polynomial density does not decay")
        base = self.reach

        def value(level):
            point = base + self.direction * level
            self.extend(point)
            return self.evaluate(point)

        limit, change, err = UntilStable(start=1.0, max_doublings=TAIL_DOUBLINGS, tol=self.config.ode_rtol * 10).do(value)
        if err is not None:
            raise UnsupportedError(f"no limit at endpoint {target} (not regular?): {err}")
        logger.debug(f"tail limit at {target} reached, last change {change:.3e}")
        self.limit = limit

    def evaluate(self, x: float, side: str = "balanced") -> Matrix:
        if math.isinf(x):
            if self.limit is None:
                self.extend(x)
            return self.limit
        if x in self.sides:
            left, balanced, right = self.sides[x]
            return {"left": left, "right": right}.get(side, balanced)
        for segment in reversed(self.segments):
            if segment.lo <= x <= segment.hi:
                return segment.evaluate(x)
        raise DomainError(f"{x} is outside the integrated range")


def _midpoint(s: float, t: float) -> float:
    lo, hi = min(s, t), max(s, t)
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    if math.isfinite(lo):
        return lo + 1.0
    if math.isfinite(hi):
        return hi - 1.0
    return 0.0


class BalancedPropagator:
    """Balanced solution of u' = r u + g with u(x0) = u0, evaluated anywhere on [a, b]."""

    def __init__(self, r: MatrixMeasure, g: Optional[MatrixMeasure], x0: float, u0, lam: complex = 0.0, config: Optional[SolverConfig] = None):
        self.config = config or SolverConfig.default()
        self.r, self.g, self.x0, self.lam = r, g, float(x0), lam
        interval = r.interval
        if not (interval.contains(x0) or x0 == interval.a or x0 == interval.b):
            raise DomainError(f"anchor {x0} is outside ({interval.a}, {interval.b})")
        u0 = np.asarray(u0, dtype=complex)
        self.vector = u0.ndim == 1
        u0 = u0.reshape(r.shape[0], -1)
        if g is not None and g.shape[1] != u0.shape[1]:
            raise UsageError(f"g has {g.shape[1]} columns, initial value has {u0.shape[1]}")
        self.u0 = u0
        self._lock = threading.RLock()

        at_atom = interval.contains(x0) and (r.atom_at(x0) is not None or (g is not None and g.atom_at(x0) is not None))
        if at_atom:
            dr = r.jump(x0)
            dg = g.jump(x0) if g is not None else np.zeros_like(u0)
            step = (dr @ u0 + dg) / 2
            right_start, left_start = u0 + step, u0 - step
            self._anchor_sides = (left_start, u0, right_start)
        else:
            right_start = left_start = u0
            self._anchor_sides = None
        self._right = _Sweep(r, g, self.x0, right_start, +1, lam, self.config)
        self._left = _Sweep(r, g, self.x0, left_start, -1, lam, self.config)

    def _shape(self, value: Matrix) -> Matrix:
        return value[:, 0] if self.vector else value

    def value(self, x: float, side: str = "balanced") -> Matrix:
        a, b = self.r.interval.a, self.r.interval.b
        if not a <= x <= b:
            raise DomainError(f"{x} is outside [{a}, {b}]")
        if x == self.x0:
            if self._anchor_sides is None:
                return self._shape(self.u0)
            left, balanced, right = self._anchor_sides
            return self._shape({"left": left, "right": right}.get(side, balanced))
        sweep = self._right if x > self.x0 else self._left
        with self._lock:
            sweep.extend(x)
            return self._shape(sweep.evaluate(x, side))

    def crossed_atoms(self) -> Dict[float, Tuple[Matrix, Matrix, Matrix]]:
        with self._lock:
            sides = dict(self._left.sides)
            sides.update(self._right.sides)
        if self._anchor_sides is not None:
            sides[self.x0] = self._anchor_sides
        return sides


def solve_ivp_balanced(
    r: MatrixMeasure,
    g: Optional[MatrixMeasure],
    x0: float,
    u0,
    target: Endpoint,
    grid: Sequence[float] = (),
    lam: complex = 0.0,
    config: Optional[SolverConfig] = None,
) -> BalancedSolution:
    """Unique balanced solution of u' = r u + g, u(x0) = u0, sampled from x0 to target."""
    config = config or SolverConfig.default()
    if isinstance(target, str):
        target = r.interval.endpoint(target)
    propagator = BalancedPropagator(r, g, x0, u0, lam, config)
    lo, hi = min(x0, target), max(x0, target)

    locations = {a.location for a in r.atoms} | ({a.location for a in g.atoms} if g is not None else set())
    points = {x0, target} | {x for x in grid if lo <= x <= hi} | {x for x in locations if lo <= x <= hi}
    points = sorted(points, reverse=target < x0)

    values, left, right = [], {}, {}
    for x in points:
        values.append(propagator.value(x))
        if x in locations:
            left[x] = propagator.value(x, "left")
            right[x] = propagator.value(x, "right")
    order = np.argsort(points)
    return BalancedSolution(
        grid=np.asarray(points, dtype=float)[order],
        values=[values[i] for i in order],
        left=left,
        right=right,
        lam=lam,
        tolerance=config.ode_rtol,
    )


class SpectralProblem:
    """Ju' + qu = λwu on (a, b) with measure coefficients, anchored at a continuity point x0."""

    def __init__(self, interval: RealInterval, J, q: MatrixMeasure, w: MatrixMeasure, x0: float, config: Optional[SolverConfig] = None):
        self.config = config or SolverConfig.default()
        self.interval = interval
        self.J = np.atleast_2d(np.asarray(J, dtype=complex))
        self.q, self.w = q, w
        self.n = self.J.shape[0]

        report = validate_coefficients(q, w, self.J, self.config)
        self.report = report
        if not report.ok:
            raise ValidationError("problem does not satisfy the coefficient hypotheses: " + "; ".join(report.lines()), report)
        if q.interval != interval:
            raise ValidationError("coefficients live on a different interval")

        x0 = float(x0)
        if not (interval.contains(x0) or (x0 == interval.a and math.isfinite(x0))):
            raise DomainError(f"anchor x0={x0} must lie in ({interval.a}, {interval.b}) or at a finite left endpoint")
        if interval.contains(x0) and (q.atom_at(x0) is not None or w.atom_at(x0) is not None):
            raise DomainError(f"anchor x0={x0} carries an atom; choose a continuity point")
        self.x0 = x0
        self.Jinv = scipy.linalg.inv(self.J)
        self._cache: EvaluatorCache = EvaluatorCache()

    def r_measure(self, lam: complex) -> MatrixMeasure:
        return combine([(lam, self.w), (-1.0, self.q)], left=self.Jinv)

    def breaks(self) -> List[float]:
        return sorted(set(self.q.breakpoints()) | set(self.w.breakpoints()))

    def atom_locations(self) -> List[float]:
        return sorted({a.location for a in self.q.atoms} | {a.location for a in self.w.atoms})

    def fundamental_matrix(self, lam: complex, config: Optional[SolverConfig] = None) -> "FundamentalMatrix":
        config = config or self.config
        key = (complex(lam), config.ode_rtol, config.ode_method)
        return self._cache.get(key, lambda: FundamentalMatrix(self, lam, config))

    def anchor(self) -> float:
        """An interior continuity point (x0 itself unless x0 is the left endpoint)."""
        if self.interval.contains(self.x0):
            return self.x0
        a, b = self.interval.a, self.interval.b
        candidate = _midpoint(a, b)
        atoms = set(self.atom_locations())
        while candidate in atoms:
            candidate = 0.5 * (a + candidate) if math.isfinite(a) else candidate - 0.5
        return candidate

    def endpoint_regular(self, end: str) -> bool:
        anchor = self.anchor()
        return self.q.is_regular_at(end, anchor, self.config) and self.w.is_regular_at(end, anchor, self.config)

    def restrict(self, c: float, d: float, x0: Optional[float] = None) -> "SpectralProblem":
        x0 = self.x0 if x0 is None else x0
        return SpectralProblem(RealInterval(c, d), self.J, self.q.restrict(c, d), self.w.restrict(c, d), x0, self.config)

    def with_anchor(self, x0: float) -> "SpectralProblem":
        return SpectralProblem(self.interval, self.J, self.q, self.w, x0, self.config)


class FundamentalMatrix:
    """U(·, λ) with U(x0, λ) = 1; columns are balanced solutions of Ju' + qu = λwu."""

    def __init__(self, problem: SpectralProblem, lam: complex, config: Optional[SolverConfig] = None):
        self.problem = problem
        self.lam = complex(lam)
        self.config = config or problem.config
        r = problem.r_measure(self.lam)
        for atom in r.atoms:
            for sign in (1, -1):
                _check_crossing(_cross_matrix(r, atom.location, sign), atom.location, self.lam, self.config)
        self._propagator = BalancedPropagator(r, None, problem.x0, np.eye(problem.n, dtype=complex), self.lam, self.config)

    def __call__(self, x: float, side: str = "balanced") -> Matrix:
        return self._propagator.value(x, side)

    def left(self, x: float) -> Matrix:
        return self._propagator.value(x, "left")

    def right(self, x: float) -> Matrix:
        return self._propagator.value(x, "right")

    def endpoint(self, end: str) -> Matrix:
        """Limit of U at a regular endpoint (U⁺ at a, U⁻ at b)."""
        x = self.problem.interval.endpoint(end)
        return self._propagator.value(x, "right" if end == "a" else "left")


def fundamental_matrix(p: SpectralProblem, lam: complex) -> FundamentalMatrix:
    return p.fundamental_matrix(lam)


def lambda_set(p: SpectralProblem, region: Optional[Tuple[float, float, float, float]] = None) -> LambdaSet:
    """All λ with det(2J ± (λΔ_w - Δ_q)(x)) = 0 at some atom x, as pencil eigenvalues.

    The minus-sign roots are the conjugates of the plus-sign roots, so the set is
    closed under conjugation by construction.
    """
    result = LambdaSet(real_tol=LAMBDA_REAL_TOL)
    for x in p.atom_locations():
        dq, dw = p.q.jump(x), p.w.jump(x)
        if not np.any(dw):
            continue
        ab = scipy.linalg.eig(2 * p.J - dq, -dw, right=False, homogeneous_eigvals=True)
        alphas, betas = np.atleast_2d(ab)
        scale = max(1.0, float(np.max(np.abs(2 * p.J - dq))))
        infinite = 0
        for alpha, beta in zip(alphas, betas):
            if abs(beta) <= 1e-14 * max(scale, abs(alpha)):
                infinite += 1
                continue
            value = complex(alpha / beta)
            for sign, root in ((1, value), (-1, value.conjugate())):
                if region is not None:
                    re_lo, re_hi, im_lo, im_hi = region
                    if not (re_lo <= root.real <= re_hi and im_lo <= root.imag <= im_hi):
                        continue
                result.points.append(LambdaPoint(root, x, sign))
        if infinite:
            result.infinite[x] = infinite
    logger.info(f"lambda set: {len(result.points)} finite points, real-free={result.real_free}")
    return result


def wronskian(u: BalancedSolution, v: BalancedSolution, J) -> WronskianReport:
    """u^{±*} J v^{±} at every grid point; constant when u solves the λ̄- and v the λ-equation."""
    if len(u.grid) != len(v.grid) or not np.array_equal(u.grid, v.grid):
        raise UsageError("wronskian needs both solutions on one grid")
    J = np.atleast_2d(np.asarray(J, dtype=complex))
    left, right = [], []
    for i, x in enumerate(u.grid):
        um, up = u.left.get(x, u.values[i]), u.right.get(x, u.values[i])
        vm, vp = v.left.get(x, v.values[i]), v.right.get(x, v.values[i])
        left.append(np.atleast_2d(np.conj(np.asarray(um)).T @ J @ np.asarray(vm)))
        right.append(np.atleast_2d(np.conj(np.asarray(up)).T @ J @ np.asarray(vp)))
    stacked = np.array(left + right)
    mean = stacked.mean(axis=0)
    deviation = float(np.max(np.abs(stacked - mean))) if stacked.size else 0.0
    return WronskianReport(grid=u.grid, left=left, right=right, deviation=deviation)


def variation_of_constants(
    p: SpectralProblem,
    lam: complex,
    f: Evaluator,
    grid: Sequence[float],
    config: Optional[SolverConfig] = None,
) -> BalancedSolution:
    """Balanced solution of Ju' + qu = λwu + wf with u(x0) = 0.

    u⁻(x) = U⁻(x) J⁻¹ ∫_[x0,x) U(·,λ̄)* w f and u⁺(x) = U⁺(x) J⁻¹ ∫_[x0,x] ... for x ≥ x0,
    u^±(x) = -U^±(x) J⁻¹ ∫ over (x,x0) resp. [x,x0) for x ≤ x0.
    """
    config = config or p.config
    U = p.fundamental_matrix(lam, config)
    Ubar = p.fundamental_matrix(complex(lam).conjugate(), config)
    n = p.n
    breaks = p.breaks()
    a, b = p.interval.a, p.interval.b
    for x in grid:
        if not a <= x <= b:
            raise DomainError(f"grid point {x} is outside [{a}, {b}]")

    def kernel(y: float) -> Matrix:
        return Ubar(y).conj().T

    def column(y: float) -> Matrix:
        return np.asarray(f(y), dtype=complex).reshape(n, 1)

    def piece(s: float, t: float, convention: str) -> Matrix:
        return p.w.stieltjes_integrate(kernel, s, t, convention, right=column, breaks=breaks, config=config)

    def atom(x: float) -> Matrix:
        if not p.interval.contains(x) or p.w.atom_at(x) is None:
            return np.zeros((n, 1), dtype=complex)
        return kernel(x) @ p.w.jump(x) @ column(x)

    atoms = set(p.atom_locations())
    lo, hi = min([*grid, p.x0]), max([*grid, p.x0])
    points = sorted(set(grid) | {x for x in atoms if lo <= x <= hi} | {p.x0})
    results: Dict[float, Tuple[Matrix, Matrix]] = {p.x0: (np.zeros((n, 1), complex), np.zeros((n, 1), complex))}

    ahead = [x for x in points if x > p.x0]
    acc_left = np.zeros((n, 1), dtype=complex)
    previous = p.x0
    for x in ahead:
        acc_left = acc_left + piece(previous, x, "[)")
        acc_right = acc_left + atom(x)
        results[x] = (U.left(x) @ p.Jinv @ acc_left, U.right(x) @ p.Jinv @ acc_right)
        previous = x

    behind = [x for x in points if x < p.x0][::-1]
    acc_right = np.zeros((n, 1), dtype=complex)
    acc_left = np.zeros((n, 1), dtype=complex)
    previous = p.x0
    for x in behind:
        acc_right = acc_left + piece(x, previous, "()")
        acc_left = acc_right + atom(x)
        results[x] = (-U.left(x) @ p.Jinv @ acc_left, -U.right(x) @ p.Jinv @ acc_right)
        previous = x

    grid_out = np.asarray(points, dtype=float)
    values, left, right = [], {}, {}
    for x in points:
        um, up = results[x]
        values.append(((um + up) / 2)[:, 0])
        if x in atoms:
            left[x], right[x] = um[:, 0], up[:, 0]
    return BalancedSolution(grid=grid_out, values=values, left=left, right=right, lam=lam, tolerance=config.quad_epsrel)


def dlambda_check(p: SpectralProblem, lam0: complex, x: float, step: float = 1e-3) -> DerivativeReport:
    """Central-difference ∂U(x,λ)/∂λ at λ0 from steps h, h/2, h/4 with a Richardson estimate."""
    if step <= 1e-12 * max(1.0, abs(lam0)):
        raise ToleranceError(f"step underflow: h={step} at λ0={lam0}")
    if lambda_set(p).distance(lam0) <= 2 * step:
        raise LambdaForbiddenError(f"difference disk around {lam0} touches Λ", lam=lam0)

    def central(h: float) -> Matrix:
        return (p.fundamental_matrix(lam0 + h)(x) - p.fundamental_matrix(lam0 - h)(x)) / (2 * h)

    d1, d2, d4 = central(step), central(step / 2), central(step / 4)
    estimate = (4 * d2 - d1) / 3
    denominator = float(np.max(np.abs(d2 - d4)))
    numerator = float(np.max(np.abs(d1 - d2)))
    ratio = numerator / denominator if denominator > 0 else math.nan
    return DerivativeReport(estimate=estimate, coarse=d1, fine=d2, step=step, ratio=ratio)
