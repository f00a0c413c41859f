"""Line-oriented problem files: parse, serialize and turn into a SpectralProblem."""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .config import DomainError, ParseError, SolverConfig, UsageError
from .ivp import SpectralProblem
from .measures import MatrixMeasure
from .model import Atom, BoundaryConditions, KernelData, PiecewisePiece, RealInterval
from .structure import reduce_conditions, validate_boundary_conditions

Piece = Tuple[float, float, List[np.ndarray]]
PointMass = Tuple[float, np.ndarray]

MODES = ("exact", "reduce")


@dataclass
class ProblemSpec:
    """Everything a problem file states, before any numerics."""
    interval: Tuple[float, float]
    x0: float
    n: int
    J: np.ndarray
    q_pieces: List[Piece] = field(default_factory=list)
    q_atoms: List[PointMass] = field(default_factory=list)
    w_pieces: List[Piece] = field(default_factory=list)
    w_atoms: List[PointMass] = field(default_factory=list)
    boundary: Optional[np.ndarray] = None
    boundary_mode: str = "exact"
    f_pieces: List[Piece] = field(default_factory=list)
    f_atoms: List[PointMass] = field(default_factory=list)

    @property
    def has_f(self) -> bool:
        return bool(self.f_pieces or self.f_atoms)

    def f_function(self) -> Callable[[float], np.ndarray]:
        """The transform input f; atom values take precedence over densities, zero elsewhere."""
        pieces = [(left, right, [np.asarray(c).reshape(-1) for c in coeffs]) for left, right, coeffs in self.f_pieces]
        atoms = {x: np.asarray(v).reshape(-1) for x, v in self.f_atoms}
        n = self.n

        def f(x: float) -> np.ndarray:
            if x in atoms:
                return atoms[x].astype(complex)
            for left, right, coeffs in pieces:
                if left <= x <= right:
                    value = np.zeros(n, dtype=complex)
                    for c in reversed(coeffs):
                        value = value * x + c
                    return value
            return np.zeros(n, dtype=complex)

        return f


## [Parsing]

class _Line:
    __slots__ = ("number", "text", "tokens")

    def __init__(self, number: int, text: str):
        self.number = number
        self.text = text
        body = text.split("#", 1)[0]
        self.tokens: List[Tuple[str, int]] = []
        column = 0
        for part in body.split():
            column = body.index(part, column)
            self.tokens.append((part, column + 1))
            column += len(part)

    def error(self, message: str, index: int = 0) -> ParseError:
        column = self.tokens[index][1] if index < len(self.tokens) else 1
        return ParseError(message, self.number, column)


def _real(line: _Line, index: int, allow_inf: bool = False) -> float:
    token = line.tokens[index][0]
    try:
        value = float(token)
    except ValueError:
        raise line.error(f"expected a real number, got {token!r}", index)
    if math.isnan(value) or (math.isinf(value) and not allow_inf):
        raise line.error(f"expected a finite real number, got {token!r}", index)
    return value


def _complex(line: _Line, index: int) -> complex:
    token = line.tokens[index][0]
    try:
        value = complex(token)
    except ValueError:
        raise line.error(f"expected a complex number like 1.5-2j, got {token!r}", index)
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise line.error(f"expected a finite complex number, got {token!r}", index)
    return value


def _row(line: _Line, width: int) -> np.ndarray:
    if len(line.tokens) != width:
        raise line.error(f"expected {width} entries, got {len(line.tokens)}", min(len(line.tokens), width))
    return np.array([_complex(line, i) for i in range(width)], dtype=complex)


class _Parser:
    def __init__(self, text: str):
        self.lines = [_Line(i + 1, t) for i, t in enumerate(text.splitlines())]
        self.lines = [line for line in self.lines if line.tokens]
        self.position = 0
        self.last_number = len(text.splitlines()) or 1

    def _peek(self) -> Optional[_Line]:
        return self.lines[self.position] if self.position < len(self.lines) else None

    def _next(self, what: str) -> _Line:
        line = self._peek()
        if line is None or _is_header(line):
            number = line.number if line is not None else self.last_number
            raise ParseError(f"expected {what}", number, 1)
        self.position += 1
        return line

    def _rows(self, count: int, width: int, what: str) -> np.ndarray:
        return np.vstack([_row(self._next(what), width) for _ in range(count)])

    def parse(self) -> ProblemSpec:
        if not self.lines:
            raise ParseError("empty problem file", 1, 1)
        header = self._peek()
        if _section(header) != ("problem", []):
            raise header.error("file must start with a [problem] section")
        self.position += 1
        interval, x0, n = self._problem(header)
        spec = ProblemSpec(interval=interval, x0=x0, n=n, J=np.zeros((0, 0)))
        seen_j = False

        while self._peek() is not None:
            line = self._peek()
            if not _is_header(line):
                raise line.error("expected a [section] header")
            self.position += 1
            name, args = _section(line)
            if name == "J":
                if seen_j:
                    raise line.error("duplicate [J] section")
                spec.J = self._rows(n, n, "a row of J")
                seen_j = True
            elif name in ("q.density", "w.density", "f.density"):
                piece = self._density(line, args, n if name != "f.density" else 1, n)
                getattr(spec, name[0] + "_pieces").append(piece)
            elif name in ("q.atom", "w.atom"):
                location = self._location(line, args)
                getattr(spec, name[0] + "_atoms").append((location, self._rows(n, n, "a row of the atom")))
            elif name == "f.atom":
                location = self._location(line, args)
                spec.f_atoms.append((location, self._rows(1, n, "the value of f")[0]))
            elif name == "boundary":
                if spec.boundary is not None:
                    raise line.error("duplicate [boundary] section")
                if args and args[0] not in MODES:
                    raise line.error(f"boundary mode must be one of {MODES}, got {args[0]!r}")
                spec.boundary_mode = args[0] if args else "exact"
                rows = []
                while self._peek() is not None and not _is_header(self._peek()):
                    rows.append(_row(self._next("a boundary row"), 2 * n))
                spec.boundary = np.vstack(rows) if rows else np.zeros((0, 2 * n), dtype=complex)
            else:
                raise line.error(f"unknown section [{name}]")

        if not seen_j:
            raise ParseError("missing [J] section", self.last_number, 1)
        return spec

    def _problem(self, header: _Line) -> Tuple[Tuple[float, float], float, int]:
        values = {}
        while self._peek() is not None and not _is_header(self._peek()):
            line = self._next("a key = value line")
            if len(line.tokens) < 3 or line.tokens[1][0] != "=":
                raise line.error("expected 'key = value'")
            key = line.tokens[0][0]
            if key in values:
                raise line.error(f"duplicate key {key!r}")
            if key == "interval":
                if len(line.tokens) != 4:
                    raise line.error("interval needs two endpoints", min(len(line.tokens) - 1, 3))
                values[key] = (_real(line, 2, allow_inf=True), _real(line, 3, allow_inf=True))
            elif key == "x0":
                values[key] = _real(line, 2)
            elif key == "n":
                token = line.tokens[2][0]
                if not token.isdigit() or int(token) < 1:
                    raise line.error(f"n must be a positive integer, got {token!r}", 2)
                values[key] = int(token)
            else:
                raise line.error(f"unknown key {key!r}")
        for key in ("interval", "x0", "n"):
            if key not in values:
                raise ParseError(f"[problem] is missing {key!r}", header.number, 1)
        return values["interval"], values["x0"], values["n"]

    def _location(self, line: _Line, args: List[str]) -> float:
        if len(args) != 1:
            raise line.error("atom section needs exactly one location")
        return _header_real(line, args, 0)

    def _density(self, line: _Line, args: List[str], rows: int, width: int) -> Piece:
        if len(args) != 2:
            raise line.error("density section needs LEFT and RIGHT")
        left, right = _header_real(line, args, 0, allow_inf=True), _header_real(line, args, 1, allow_inf=True)
        if not left < right:
            raise line.error(f"density section [{left}, {right}] is empty", 1)
        coeffs: List[np.ndarray] = []
        while self._peek() is not None and not _is_header(self._peek()):
            power_line = self._next("a 'power K' line")
            if len(power_line.tokens) != 2 or power_line.tokens[0][0] != "power":
                raise power_line.error("expected 'power K'")
            token = power_line.tokens[1][0]
            if not token.isdigit() or int(token) != len(coeffs):
                raise power_line.error(f"expected power {len(coeffs)}, got {token!r}", 1)
            coeffs.append(self._rows(rows, width, "a coefficient row"))
        if not coeffs:
            raise line.error("density section has no coefficients")
        return left, right, coeffs


def _header_real(line: _Line, args: List[str], index: int, allow_inf: bool = False) -> float:
    column = line.tokens[min(index + 1, len(line.tokens) - 1)][1]
    token = args[index]
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"expected a real number, got {token!r}", line.number, column)
    if math.isnan(value) or (math.isinf(value) and not allow_inf):
        raise ParseError(f"expected a finite real number, got {token!r}", line.number, column)
    return value


def _is_header(line: _Line) -> bool:
    return line.tokens[0][0].startswith("[")


def _section(line: _Line) -> Tuple[str, List[str]]:
    body = line.text.split("#", 1)[0].strip()
    if not body.endswith("]"):
        raise line.error("unterminated section header")
    parts = body[1:-1].split()
    if not parts:
        raise line.error("empty section header")
    return parts[0], parts[1:]


def parse(text: str) -> ProblemSpec:
    return _Parser(text).parse()


def load(path: str) -> ProblemSpec:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as e:
        raise DomainError(f"failed to read problem file {path}: {e}")
    return parse(text)


## [Serialization]

def format_real(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def format_complex(z: complex) -> str:
    z = complex(z)
    return f"{z.real:.17g}{z.imag:+.17g}j"


def _rows_text(matrix: np.ndarray) -> List[str]:
    return [" ".join(format_complex(z) for z in row) for row in np.atleast_2d(matrix)]


def serialize(spec: ProblemSpec) -> str:
    lines = [
        "[problem]",
        f"interval = {format_real(spec.interval[0])} {format_real(spec.interval[1])}",
        f"x0 = {format_real(spec.x0)}",
        f"n = {spec.n}",
        "[J]",
        *_rows_text(spec.J),
    ]
    for name in ("q", "w"):
        for left, right, coeffs in getattr(spec, f"{name}_pieces"):
            lines.append(f"[{name}.density {format_real(left)} {format_real(right)}]")
            for k, c in enumerate(coeffs):
                lines.append(f"power {k}")
                lines.extend(_rows_text(c))
        for x, m in getattr(spec, f"{name}_atoms"):
            lines.append(f"[{name}.atom {format_real(x)}]")
            lines.extend(_rows_text(m))
    if spec.boundary is not None:
        lines.append("[boundary]" if spec.boundary_mode == "exact" else f"[boundary {spec.boundary_mode}]")
        lines.extend(_rows_text(spec.boundary) if spec.boundary.size else [])
    for left, right, coeffs in spec.f_pieces:
        lines.append(f"[f.density {format_real(left)} {format_real(right)}]")
        for k, c in enumerate(coeffs):
            lines.append(f"power {k}")
            lines.extend(_rows_text(np.asarray(c).reshape(1, -1)))
    for x, v in spec.f_atoms:
        lines.append(f"[f.atom {format_real(x)}]")
        lines.extend(_rows_text(np.asarray(v).reshape(1, -1)))
    return "\n".join(lines) + "\n"


## [Construction]

def _measure(n: int, interval: RealInterval, pieces: Sequence[Piece], atoms: Sequence[PointMass], **kwargs) -> MatrixMeasure:
    return MatrixMeasure(
        (n, n),
        interval,
        [PiecewisePiece.polynomial(left, right, coeffs) for left, right, coeffs in pieces],
        [Atom(x, m) for x, m in sorted(atoms, key=lambda item: item[0])],
        **kwargs,
    )


def build_problem(spec: ProblemSpec, config: Optional[SolverConfig] = None) -> SpectralProblem:
    interval = RealInterval(*spec.interval)
    q = _measure(spec.n, interval, spec.q_pieces, spec.q_atoms, hermitian=True)
    w = _measure(spec.n, interval, spec.w_pieces, spec.w_atoms, hermitian=True, nonnegative=True)
    return SpectralProblem(interval, spec.J, q, w, spec.x0, config)


def boundary_conditions(spec: ProblemSpec, p: SpectralProblem, k: KernelData, config: Optional[SolverConfig] = None) -> BoundaryConditions:
    """The file's [boundary] block, validated as stated or reduced to canonical form."""
    if spec.boundary is None:
        raise UsageError("problem file has no [boundary] section")
    if spec.boundary_mode == "reduce":
        return reduce_conditions(p, k, spec.boundary, config)
    return validate_boundary_conditions(p, k, spec.boundary, config)
