"""Matrix-valued measures of order 0 on an interval: piecewise densities plus finitely many atoms."""

import bisect
import logging
import math
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from private.linalg import is_hermitian, min_eigenvalue, near_singular
from private.quadrature import integrate, QuadratureError

from .config import (
    DomainError,
    HERMITIAN_TOL,
    IntegrationError,
    PSD_FLOOR,
    SolverConfig,
    ToleranceError,
    UsageError,
)
from .model import Atom, Evaluator, Matrix, PiecewisePiece, RealInterval, ValidationReport

logger = logging.getLogger(__name__)

CONVENTIONS = ("[]", "[)", "(]", "()")
LOCATION_RTOL = 1e-14


def _as_matrix(value, shape: Optional[Tuple[int, int]] = None) -> Matrix:
    m = np.atleast_2d(np.asarray(value, dtype=complex))
    if shape is not None and m.shape != shape:
        raise DomainError(f"expected a {shape[0]}x{shape[1]} matrix, got {m.shape[0]}x{m.shape[1]}")
    return m


def _same_point(x: float, y: float) -> bool:
    return abs(x - y) <= LOCATION_RTOL * max(1.0, abs(x), abs(y))


class MatrixMeasure:
    def __init__(
        self,
        shape: Tuple[int, int],
        interval: RealInterval,
        pieces: Iterable[PiecewisePiece] = (),
        atoms: Iterable[Atom] = (),
        hermitian: bool = False,
        nonnegative: bool = False,
        reference: Optional[float] = None,
    ):
        self.shape = (int(shape[0]), int(shape[1]))
        self.interval = interval
        self.hermitian = hermitian
        self.nonnegative = nonnegative

        pieces = sorted(pieces, key=lambda p: p.left)
        for piece in pieces:
            if not piece.left < piece.right:
                raise DomainError(f"empty piece [{piece.left}, {piece.right}]")
            if piece.left < interval.a or piece.right > interval.b:
                raise DomainError(f"piece [{piece.left}, {piece.right}] leaves the interval ({interval.a}, {interval.b})")
        for first, second in zip(pieces, pieces[1:]):
            if second.left < first.right:
                raise DomainError(f"pieces [{first.left}, {first.right}] and [{second.left}, {second.right}] overlap")
        self.pieces: Tuple[PiecewisePiece, ...] = tuple(pieces)

        atoms = list(atoms)
        for atom in atoms:
            if not interval.contains(atom.location):
                raise DomainError(f"atom at {atom.location} is not inside ({interval.a}, {interval.b})")
        for first, second in zip(atoms, atoms[1:]):
            if not first.location < second.location:
                raise DomainError(f"atom locations must increase strictly: {first.location}, {second.location}")
        self.atoms: Tuple[Atom, ...] = tuple(Atom(float(a.location), _as_matrix(a.jump, self.shape)) for a in atoms)
        self._locations = [a.location for a in self.atoms]

        if reference is None:
            if interval.contains(0.0):
                reference = 0.0
            elif math.isfinite(interval.a):
                reference = interval.a
            else:
                reference = interval.b
        self.reference = float(reference)

    ## [Construction Helpers]

    @staticmethod
    def zero(shape: Tuple[int, int], interval: RealInterval) -> "MatrixMeasure":
        return MatrixMeasure(shape, interval)

    @staticmethod
    def constant(matrix, interval: RealInterval, left: Optional[float] = None, right: Optional[float] = None, **kwargs) -> "MatrixMeasure":
        matrix = _as_matrix(matrix)
        left = interval.a if left is None else left
        right = interval.b if right is None else right
        return MatrixMeasure(matrix.shape, interval, [PiecewisePiece.polynomial(left, right, [matrix])], **kwargs)

    @staticmethod
    def point_masses(masses: Sequence[Tuple[float, object]], interval: RealInterval, **kwargs) -> "MatrixMeasure":
        atoms = [Atom(x, _as_matrix(m)) for x, m in sorted(masses, key=lambda item: item[0])]
        if not atoms:
            raise DomainError("point_masses needs at least one atom")
        return MatrixMeasure(atoms[0].jump.shape, interval, atoms=atoms, **kwargs)

    def with_atoms(self, atoms: Iterable[Atom]) -> "MatrixMeasure":
        merged = sorted(list(self.atoms) + list(atoms), key=lambda a: a.location)
        return MatrixMeasure(self.shape, self.interval, self.pieces, merged, self.hermitian, self.nonnegative)

    def restrict(self, c: float, d: float) -> "MatrixMeasure":
        """The measure on (c, d); atoms outside the open interval are dropped."""
        interval = RealInterval(c, d)
        pieces = []
        for piece in self.pieces:
            if piece.overlaps(c, d):
                pieces.append(PiecewisePiece(max(piece.left, c), min(piece.right, d), piece.density, piece.coefficients))
        atoms = [a for a in self.atoms if c < a.location < d]
        reference = self.reference if interval.contains(self.reference) else None
        return MatrixMeasure(self.shape, interval, pieces, atoms, self.hermitian, self.nonnegative, reference)

    def weighted(self, f: Evaluator) -> "MatrixMeasure":
        """The measure f·dQ read as dQ·f: density ρ(x) f(x), atoms Δ(x) f(x) with f balanced."""
        sample = _as_matrix(f(self._sample_point()))
        if sample.shape[0] == 1 and self.shape[1] != 1:
            sample = sample.T
        cols = sample.shape[1]

        def column(x: float) -> Matrix:
            v = np.asarray(f(x), dtype=complex).reshape(self.shape[1], cols)
            return v

        pieces = [
            PiecewisePiece(p.left, p.right, (lambda x, p=p: p.density(x) @ column(x)))
            for p in self.pieces
            if not p.is_zero
        ]
        atoms = [Atom(a.location, a.jump @ column(a.location)) for a in self.atoms]
        return MatrixMeasure((self.shape[0], cols), self.interval, pieces, atoms, reference=self.reference)

    def _sample_point(self) -> float:
        a, b = self.interval.a, self.interval.b
        if math.isfinite(a) and math.isfinite(b):
            return 0.5 * (a + b)
        if math.isfinite(a):
            return a + 1.0
        if math.isfinite(b):
            return b - 1.0
        return 0.0

    ## [Evaluation]

    @property
    def is_zero(self) -> bool:
        return all(p.is_zero for p in self.pieces) and not any(np.any(a.jump) for a in self.atoms)

    def _check_domain(self, x: float) -> None:
        if not self.interval.contains(x):
            raise DomainError(f"{x} is outside ({self.interval.a}, {self.interval.b})")

    def piece_at(self, x: float) -> Optional[PiecewisePiece]:
        for piece in self.pieces:
            if piece.left <= x <= piece.right:
                return piece
        return None

    def density(self, x: float) -> Matrix:
        piece = self.piece_at(x)
        if piece is None:
            return np.zeros(self.shape, dtype=complex)
        return _as_matrix(piece.density(x), self.shape)

    def atom_at(self, x: float) -> Optional[Atom]:
        i = bisect.bisect_left(self._locations, x)
        for j in (i - 1, i):
            if 0 <= j < len(self._locations) and _same_point(self._locations[j], x):
                return self.atoms[j]
        return None

    def jump(self, x: float) -> Matrix:
        self._check_domain(x)
        atom = self.atom_at(x)
        if atom is None:
            return np.zeros(self.shape, dtype=complex)
        return atom.jump.copy()

    def atoms_in(self, c: float, d: float, convention: str = "[]") -> List[Atom]:
        if convention not in CONVENTIONS:
            raise UsageError(f"unknown interval convention {convention!r}")
        closed_left, closed_right = convention[0] == "[", convention[1] == "]"
        found = []
        for atom in self.atoms:
            x = atom.location
            left_ok = x > c or (closed_left and _same_point(x, c))
            right_ok = x < d or (closed_right and _same_point(x, d))
            if left_ok and right_ok:
                found.append(atom)
        return found

    def breakpoints(self, c: float = -math.inf, d: float = math.inf) -> List[float]:
        """Piece boundaries and atom locations strictly inside (c, d)."""
        points = {p.left for p in self.pieces} | {p.right for p in self.pieces} | set(self._locations)
        return sorted(x for x in points if c < x < d and math.isfinite(x))

    ## [Integration]

    def _segments(self, c: float, d: float, breaks: Sequence[float]) -> List[Tuple[PiecewisePiece, float, float]]:
        segments = []
        for piece in self.pieces:
            if piece.is_zero or not piece.overlaps(c, d):
                continue
            lo, hi = max(piece.left, c), min(piece.right, d)
            cuts = [lo] + sorted(x for x in set(breaks) | set(self._locations) if lo < x < hi) + [hi]
            for s, t in zip(cuts, cuts[1:]):
                segments.append((piece, s, t))
        return segments

    def _quad(self, f: Evaluator, s: float, t: float, config: SolverConfig) -> Matrix:
        try:
            return integrate(f, s, t, epsabs=config.quad_epsabs, epsrel=config.quad_epsrel, limit=config.quad_limit)
        except QuadratureError as e:
            raise ToleranceError(f"failed to integrate measure density: {e}")

    def integrate_density(self, c: float, d: float, config: Optional[SolverConfig] = None) -> Matrix:
        config = config or SolverConfig.default()
        if c > d:
            return -self.integrate_density(d, c, config)
        total = np.zeros(self.shape, dtype=complex)
        for piece, s, t in self._segments(c, d, ()):
            total = total + self._quad(lambda x, p=piece: _as_matrix(p.density(x), self.shape), s, t, config)
        return total

    def antiderivative(self, x: float, side: str = "balanced", config: Optional[SolverConfig] = None) -> Matrix:
        """Q^-(x), Q^+(x) or Q^#(x) with Q^-(reference) = 0."""
        self._check_domain(x)
        if side not in ("left", "right", "balanced"):
            raise UsageError(f"side must be left, right or balanced, got {side!r}")
        c = self.reference
        if x >= c:
            left = self.integrate_density(c, x, config) + sum((a.jump for a in self.atoms_in(c, x, "[)")), np.zeros(self.shape, dtype=complex))
        else:
            left = -(self.integrate_density(x, c, config) + sum((a.jump for a in self.atoms_in(x, c, "[)")), np.zeros(self.shape, dtype=complex)))
        if side == "left":
            return left
        right = left + self.jump(x)
        if side == "right":
            return right
        return (left + right) / 2

    def variation(self, c: float, d: float, config: Optional[SolverConfig] = None) -> float:
        """Total |.|_1 variation of the antiderivative over the closed interval [c, d]."""
        config = config or SolverConfig.default()
        if c > d:
            raise UsageError(f"variation needs c <= d, got [{c}, {d}]")
        total = 0.0
        for piece, s, t in self._segments(c, d, ()):
            try:
                part = integrate(
                    lambda x, p=piece: np.abs(_as_matrix(p.density(x), self.shape)),
                    s, t, epsabs=config.quad_epsabs, epsrel=config.quad_epsrel, limit=config.quad_limit,
                )
            except QuadratureError as e:
                raise IntegrationError(f"density is not integrable on [{s}, {t}] (unbounded variation?): {e}")
            total += float(np.sum(part.real))
        total += sum(float(np.sum(np.abs(a.jump))) for a in self.atoms_in(c, d, "[]"))
        return total

    def stieltjes_integrate(
        self,
        f: Callable[[float], object],
        c: float,
        d: float,
        convention: str = "[]",
        right: Optional[Callable[[float], object]] = None,
        breaks: Sequence[float] = (),
        config: Optional[SolverConfig] = None,
    ) -> Matrix:
        """∫ f dQ (or ∫ f dQ g with right=g) over [c, d] under the given endpoint convention.

        Atoms contribute f(x) Δ(x) [g(x)]; the density part is integrated adaptively
        between piece boundaries, atoms and the extra breaks (jumps of f or g).
        """
        config = config or SolverConfig.default()
        if convention not in CONVENTIONS:
            raise UsageError(f"unknown interval convention {convention!r}")
        if c > d:
            raise UsageError(f"integration range [{c}, {d}] is reversed")

        def term(x: float, q: Matrix) -> Matrix:
            value = _as_matrix(f(x)) @ q
            if right is not None:
                value = value @ _as_matrix(right(x))
            return value

        total = None
        for atom in self.atoms_in(c, d, convention):
            value = term(atom.location, atom.jump)
            total = value if total is None else total + value

        if c < d:
            for piece, s, t in self._segments(c, d, breaks):
                value = self._quad(lambda x, p=piece: term(x, _as_matrix(p.density(x), self.shape)), s, t, config)
                total = value if total is None else total + value

        if total is None:
            x = c if math.isfinite(c) else self._sample_point()
            total = np.zeros_like(term(x, np.zeros(self.shape, dtype=complex)))
        return total

    ## [Regularity]

    def is_regular_at(self, end: str, anchor: Optional[float] = None, config: Optional[SolverConfig] = None) -> bool:
        """Whether the antiderivative has bounded variation between the endpoint and an interior anchor."""
        config = config or SolverConfig.default()
        anchor = self._sample_point() if anchor is None else anchor
        edge = self.interval.endpoint(end)
        lo, hi = (edge, anchor) if end == "a" else (anchor, edge)
        for piece in self.pieces:
            if piece.is_zero or not piece.overlaps(lo, hi):
                continue
            reaches_infinity = (end == "a" and piece.left == -math.inf) or (end == "b" and piece.right == math.inf)
            if reaches_infinity and piece.coefficients is not None:
                return False
        try:
            self.variation(lo, hi, config)
        except IntegrationError:
            return False
        return True

    ## [Validation Sampling]

    def sample_points(self, nodes: int = 8) -> List[float]:
        points = []
        base, _ = np.polynomial.legendre.leggauss(nodes)
        for piece in self.pieces:
            lo, hi = piece.left, piece.right
            if math.isfinite(lo) and math.isfinite(hi):
                points.extend([lo, hi])
                points.extend(0.5 * (hi - lo) * base + 0.5 * (hi + lo))
            elif math.isfinite(lo):
                points.extend([lo] + [lo + 2.0**k for k in range(-4, 11)])
            elif math.isfinite(hi):
                points.extend([hi] + [hi - 2.0**k for k in range(-4, 11)])
            else:
                points.extend([s * 2.0**k for k in range(-4, 11) for s in (-1.0, 1.0)] + [0.0])
        return points

    def check_hermitian(self, tol: float = HERMITIAN_TOL) -> Tuple[bool, str]:
        for atom in self.atoms:
            if not is_hermitian(atom.jump, tol):
                return False, f"atom at {atom.location} is not Hermitian"
        for x in self.sample_points():
            if not is_hermitian(self.density(x), tol):
                return False, f"density at {x} is not Hermitian"
        return True, ""

    def check_nonnegative(self, floor: float = PSD_FLOOR) -> Tuple[bool, str]:
        ok, message = self.check_hermitian()
        if not ok:
            return ok, message
        for atom in self.atoms:
            scale = max(1.0, float(np.max(np.abs(atom.jump))))
            if min_eigenvalue(atom.jump) < floor * scale:
                return False, f"atom at {atom.location} is not positive semi-definite"
        for x in self.sample_points():
            rho = self.density(x)
            if min_eigenvalue(rho) < floor * max(1.0, float(np.max(np.abs(rho)))):
                return False, f"density at {x} is not positive semi-definite"
        return True, ""

    def __repr__(self) -> str:
        return f"MatrixMeasure(shape={self.shape}, interval=({self.interval.a}, {self.interval.b}), pieces={len(self.pieces)}, atoms={self._locations})"


def combine(terms: Sequence[Tuple[complex, MatrixMeasure]], left: Optional[Matrix] = None) -> MatrixMeasure:
    """left · Σ cᵢ mᵢ as one measure; polynomial pieces stay polynomial."""
    terms = [(complex(c), m) for c, m in terms]
    if not terms:
        raise UsageError("combine needs at least one measure")
    interval = terms[0][1].interval
    shape = terms[0][1].shape
    for _, m in terms:
        if m.interval != interval or m.shape != shape:
            raise UsageError("combined measures must share interval and shape")
    left = np.eye(shape[0], dtype=complex) if left is None else _as_matrix(left)
    out_shape = (left.shape[0], shape[1])

    cuts = sorted({x for _, m in terms for p in m.pieces for x in (p.left, p.right)})
    pieces = []
    for s, t in zip(cuts, cuts[1:]):
        if math.isfinite(s) and math.isfinite(t):
            mid = 0.5 * (s + t)
        elif math.isfinite(t):
            mid = t - 1.0
        elif math.isfinite(s):
            mid = s + 1.0
        else:
            mid = 0.0
        active = [(c, m.piece_at(mid)) for c, m in terms if c != 0]
        active = [(c, p) for c, p in active if p is not None and p.left <= s and t <= p.right and not p.is_zero]
        if not active:
            continue
        if all(p.coefficients is not None for _, p in active):
            degree = max(len(p.coefficients) for _, p in active)
            coeffs = []
            for k in range(degree):
                acc = np.zeros(shape, dtype=complex)
                for c, p in active:
                    if k < len(p.coefficients):
                        acc = acc + c * p.coefficients[k]
                coeffs.append(left @ acc)
            pieces.append(PiecewisePiece.polynomial(s, t, coeffs))
        else:
            def density(x, active=active):
                return left @ sum(c * _as_matrix(p.density(x)) for c, p in active)

            pieces.append(PiecewisePiece(s, t, density))

    locations = sorted({a.location for _, m in terms for a in m.atoms})
    atoms = []
    for x in locations:
        jump = left @ sum((c * m.jump(x) for c, m in terms), np.zeros(shape, dtype=complex))
        if np.any(jump):
            atoms.append(Atom(x, jump))
    return MatrixMeasure(out_shape, interval, pieces, atoms, reference=terms[0][1].reference)


def validate_coefficients(q: MatrixMeasure, w: MatrixMeasure, J, config: Optional[SolverConfig] = None) -> ValidationReport:
    """The coefficient hypotheses: J invertible and skew-Hermitian, q Hermitian, w ⪰ 0, 2J ± Δ_q invertible."""
    config = config or SolverConfig.default()
    report = ValidationReport()
    J = _as_matrix(J)
    n = J.shape[0]

    shapes_ok = J.shape == (n, n) and q.shape == (n, n) and w.shape == (n, n) and q.interval == w.interval
    report.add("shapes", shapes_ok, "" if shapes_ok else f"J {J.shape}, q {q.shape}, w {w.shape} must be square of one size on one interval")
    if not shapes_ok:
        return report

    singular, cond = near_singular(J, config.forbidden_rtol)
    report.add("J invertible", not singular, f"condition number {cond:.3e}" if singular else "")
    skew = float(np.max(np.abs(J + J.conj().T)))
    skew_ok = skew <= HERMITIAN_TOL * max(1.0, float(np.max(np.abs(J))))
    report.add("J skew-Hermitian", skew_ok, "" if skew_ok else f"J not skew-Hermitian (|J+J*| = {skew:.3e})")

    ok, message = q.check_hermitian()
    report.add("q Hermitian", ok, message)
    ok, message = w.check_nonnegative()
    report.add("w non-negative", ok, message)

    bad = []
    for atom in q.atoms:
        for sign in (1, -1):
            singular, _ = near_singular(2 * J + sign * atom.jump, config.forbidden_rtol)
            if singular:
                bad.append(f"2J{'+' if sign > 0 else '-'}Δq({atom.location})")
    report.add("2J±Δq invertible", not bad, ", ".join(bad))

    for check in report.failures():
        logger.warning(f"coefficient check failed: {check.name} {check.message}")
    return report
