"""bvspectra command line: parse a problem file, run one pipeline stage, write CSV."""

import argparse
import csv
import io
import logging
import math
import os
import sys
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from .config import (
    EXIT_OK,
    EXIT_VALIDATION,
    DomainError,
    SolverConfig,
    SpectralError,
    UsageError,
    ValidationError,
    WithEigenTolerance,
    WithQuadTolerance,
    WithResidueTolerance,
)
from .greens import MFunction, green_kernel, spectral_measure
from .ivp import SpectralProblem, lambda_set
from .model import LambdaSet, RunConfig
from .problem_file import ProblemSpec, boundary_conditions, build_problem, format_complex, format_real, load
from .spectral import fourier, inverse, parseval_check
from .structure import compute_kernel
from .weyl2 import LIMIT_POINT, classify_endpoint, m_function_2x2

logger = logging.getLogger(__name__)

# keys a --config YAML file may set; flags given on the command line win
RUN_KEYS = ("tol_quad", "tol_eig", "tol_residue", "out", "window", "lam_re", "grid", "alpha", "lam", "lam_im", "x0", "verbose")

Table = Tuple[List[str], List[List[str]]]


## [Formatting]

def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (complex, np.complexfloating)):
        return format_complex(value)
    return format_real(float(value))


def _entry_names(prefix: str, rows: int, cols: int = 0) -> List[str]:
    if cols == 0:
        return [f"{prefix}{i + 1}" for i in range(rows)]
    return [f"{prefix}{i + 1}{j + 1}" for i in range(rows) for j in range(cols)]


def _entries(array) -> List[complex]:
    return [complex(z) for z in np.asarray(array).reshape(-1)]


def _render(tables: Sequence[Table]) -> str:
    """CSV text, one header per table, tables separated by a blank line."""
    buffer = io.StringIO()
    for index, (header, rows) in enumerate(tables):
        if index:
            buffer.write("\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


def _emit(run: RunConfig, tables: Sequence[Table]) -> None:
    text = _render(tables)
    if run.out is None:
        sys.stdout.write(text)
        return
    try:
        with open(run.out, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    except OSError as e:
        raise DomainError(f"failed to write {run.out}: {e}")
    logger.info(f"wrote {run.out}")


def format_lambda_set(forbidden: LambdaSet) -> str:
    """Λ as a brace list, conjugate pairs folded into ±."""
    distinct: List[complex] = []
    for value in forbidden.values:
        if not any(abs(value - seen) <= 1e-12 * max(1.0, abs(seen)) for seen in distinct):
            distinct.append(value)
    distinct.sort(key=lambda z: (z.real, abs(z.imag), z.imag))

    parts: List[str] = []
    used = [False] * len(distinct)
    for i, z in enumerate(distinct):
        if used[i]:
            continue
        used[i] = True
        if abs(z.imag) <= forbidden.real_tol * max(1.0, abs(z)):
            parts.append(f"{z.real:g}")
            continue
        partner = next(
            (j for j in range(i + 1, len(distinct)) if not used[j] and abs(distinct[j] - z.conjugate()) <= 1e-12 * max(1.0, abs(z))),
            None,
        )
        re = z.real if abs(z.real) > 1e-12 * max(1.0, abs(z)) else 0.0
        if partner is None:
            parts.append(f"{re:g}{z.imag:+g}i" if re else f"{z.imag:g}i")
            continue
        used[partner] = True
        parts.append(f"{re:g}±{abs(z.imag):g}i" if re else f"±{abs(z.imag):g}i")
    return "{" + ", ".join(parts) + "}"


## [Grids]

def _span(p: SpectralProblem) -> Tuple[float, float]:
    """The finite stretch of the interval worth sampling; infinite ends stop one unit past the last feature."""
    a, b = p.interval.a, p.interval.b
    features = [p.x0] + [x for x in p.breaks() if math.isfinite(x)]
    lo = a if math.isfinite(a) else min(features) - 1.0
    hi = b if math.isfinite(b) else max(features) + 1.0
    return lo, hi


def _sample_grid(p: SpectralProblem, count: int, with_atoms: bool = False) -> np.ndarray:
    lo, hi = _span(p)
    points = set(np.linspace(lo, hi, count).tolist()) if count > 1 else {0.5 * (lo + hi)}
    if with_atoms:
        points |= {x for x in p.atom_locations() if lo <= x <= hi}
    return np.array(sorted(points))


def _interior(p: SpectralProblem, points: Iterable[float]) -> List[float]:
    """Grid points where a balanced value exists (finite endpoints count via their one-sided limits)."""
    return [float(x) for x in points if p.interval.contains(x) or x in (p.interval.a, p.interval.b)]


## [Setup]

def _complex_arg(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a complex number like 0.5+1j, got {text!r}")


def _load_yaml(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle) or {}
    except (OSError, yaml.YAMLError) as e:
        raise DomainError(f"failed to read run config {path}: {e}")
    if not isinstance(data, dict):
        raise DomainError(f"run config {path} must be a mapping")
    unknown = sorted(set(data) - set(RUN_KEYS))
    if unknown:
        raise DomainError(f"unknown run config keys: {', '.join(unknown)}")
    return data


def _pair(value, name: str) -> Optional[Tuple[float, float]]:
    if value is None:
        return None
    try:
        lo, hi = value
        return float(lo), float(hi)
    except (TypeError, ValueError):
        raise DomainError(f"{name} needs two numbers, got {value!r}")


def run_config(args: argparse.Namespace) -> RunConfig:
    """Merge --config YAML values with the flags; a flag that was given overrides the file."""
    values = _load_yaml(args.config) if args.config else {}
    for key in RUN_KEYS:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            values[key] = flag
    try:
        if "lam" in values:
            values["lam"] = complex(str(values["lam"]).replace(" ", ""))
        for key in ("tol_quad", "tol_eig", "tol_residue", "alpha", "lam_im", "x0"):
            if values.get(key) is not None:
                values[key] = float(values[key])
        if "grid" in values:
            values["grid"] = int(values["grid"])
    except (TypeError, ValueError) as e:
        raise DomainError(f"invalid run option: {e}")
    values["window"] = _pair(values.get("window"), "window")
    values["lam_re"] = _pair(values.get("lam_re"), "lam_re")
    values["verbose"] = bool(values.get("verbose", False))
    return RunConfig(problem_path=args.problem, subcommand=args.command, **values)


def solver_config(run: RunConfig) -> SolverConfig:
    config = SolverConfig.from_env()
    options = []
    if run.tol_quad is not None:
        options.append(WithQuadTolerance(run.tol_quad))
    if run.tol_eig is not None:
        options.append(WithEigenTolerance(run.tol_eig))
    if run.tol_residue is not None:
        options.append(WithResidueTolerance(run.tol_residue))
    return config.with_options(*options)


def _configure_logging(run: RunConfig) -> None:
    level = "DEBUG" if run.verbose else os.getenv("BVSPECTRA_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(message)s", stream=sys.stderr, force=True)


class _Session:
    """The parsed file, the problem built from it and the numeric config of one run."""

    def __init__(self, run: RunConfig):
        self.run = run
        self.config = solver_config(run)
        self.spec: ProblemSpec = load(run.problem_path)
        self.problem = build_problem(self.spec, self.config)
        if run.x0 is not None:
            self.problem = self.problem.with_anchor(run.x0)
        self._conditions = None

    def conditions(self):
        if self._conditions is None:
            kernel = compute_kernel(self.problem, self.config)
            self._conditions = (kernel, boundary_conditions(self.spec, self.problem, kernel, self.config))
        return self._conditions

    def window(self) -> Tuple[float, float]:
        if self.run.window is None:
            raise UsageError(f"{self.run.subcommand} needs --window LO HI")
        return self.run.window


## [Subcommands]

def cmd_validate(session: _Session) -> int:
    """Coefficient report, Λ and endpoint regularity; exit 0 iff the problem conforms."""
    p = session.problem
    for line in p.report.lines():
        print(line)
    forbidden = lambda_set(p)
    regular = {end: p.endpoint_regular(end) for end in ("a", "b")}
    if all(regular.values()):
        endpoints = "endpoints regular"
    else:
        endpoints = "; ".join(f"endpoint {end} {'regular' if ok else 'singular'}" for end, ok in regular.items())
    crossing = "Λ∩ℝ empty" if forbidden.real_free else "Λ∩ℝ nonempty"
    print(f"Λ = {format_lambda_set(forbidden)}; {crossing}; {endpoints}")

    conforming = forbidden.real_free
    if session.spec.boundary is not None:
        if all(regular.values()):
            try:
                _, bc = session.conditions()
                print(f"boundary conditions accepted ({bc.classification}, n+ = {bc.n_plus})")
            except ValidationError as e:
                print(f"boundary conditions rejected: {e}")
                conforming = False
        else:
            print("boundary conditions not checked: singular endpoint")
    return EXIT_OK if conforming else EXIT_VALIDATION


def cmd_solve_ivp(session: _Session) -> int:
    p = session.problem
    U = p.fundamental_matrix(session.run.lam, session.config)
    atoms = set(p.atom_locations())
    rows = []
    for x in _interior(p, _sample_grid(p, session.run.grid, with_atoms=True)):
        if x == p.interval.a:
            sides = ("right",)
        elif x == p.interval.b:
            sides = ("left",)
        else:
            sides = ("left", "balanced", "right") if x in atoms else ("balanced",)
        for side in sides:
            rows.append([x, side, *_entries(U(x, side))])
    _emit(session.run, [(["x", "side", *_entry_names("U", p.n, p.n)], rows)])
    return EXIT_OK


def cmd_lambda_set(session: _Session) -> int:
    forbidden = lambda_set(session.problem)
    rows = [[point.location, point.sign, point.value] for point in forbidden.points]
    for location, count in sorted(forbidden.infinite.items()):
        rows.extend([location, 0, "inf"] for _ in range(count))
    _emit(session.run, [(["location", "sign", "lambda"], rows)])
    return EXIT_OK


def cmd_eigs(session: _Session) -> int:
    p = session.problem
    kernel, bc = session.conditions()
    measure = spectral_measure(MFunction(p, kernel, bc, "plus", session.config), session.window())
    rows = [
        [index, lam, multiplicity, *_entries(weight)]
        for index, (lam, multiplicity, weight) in enumerate(zip(measure.eigenvalues, measure.multiplicities, measure.weights))
    ]
    _emit(session.run, [(["index", "lambda", "multiplicity", *_entry_names("nu", p.n, p.n)], rows)])
    return EXIT_OK


def _lambda_samples(run: RunConfig) -> List[complex]:
    if run.lam_re is None:
        return [run.lam]
    if run.lam_im == 0:
        raise DomainError("--lam-im must be nonzero")
    lo, hi = run.lam_re
    return [complex(t, run.lam_im) for t in np.linspace(lo, hi, run.grid)]


def cmd_mfun(session: _Session) -> int:
    p = session.problem
    kernel, bc = session.conditions()
    mf = MFunction(p, kernel, bc, "plus", session.config)
    rows = [[lam, *_entries(mf(lam))] for lam in _lambda_samples(session.run)]
    _emit(session.run, [(["lambda", *_entry_names("M", p.n, p.n)], rows)])
    return EXIT_OK


def cmd_green(session: _Session) -> int:
    p = session.problem
    kernel, bc = session.conditions()
    G = green_kernel(p, kernel, bc, session.run.lam, session.config)
    grid = [x for x in _interior(p, _sample_grid(p, session.run.grid)) if p.interval.contains(x)]
    rows = [[x, y, *_entries(G(x, y))] for x in grid for y in grid]
    _emit(session.run, [(["x", "y", *_entry_names("G", p.n, p.n)], rows)])
    return EXIT_OK


def cmd_transform(session: _Session) -> int:
    """Coefficients f̂ₙ, the reconstruction 𝓖𝓕f on the grid and the Parseval line."""
    p, config = session.problem, session.config
    if not session.spec.has_f:
        raise UsageError("transform needs an [f.density] or [f.atom] section in the problem file")
    f = session.spec.f_function()
    kernel, bc = session.conditions()
    measure = spectral_measure(MFunction(p, kernel, bc, "plus", config), session.window())
    result = fourier(p, measure, f, config)
    grid = [x for x in _interior(p, _sample_grid(p, session.run.grid)) if p.interval.contains(x)]
    rebuilt = inverse(p, measure, result.coefficients, grid, config)
    parseval = parseval_check(p, measure, f, f, config=config)

    coefficients = (
        ["index", "lambda", *_entry_names("fhat", p.n)],
        [[i, lam, *_entries(c)] for i, (lam, c) in enumerate(zip(measure.eigenvalues, result.coefficients))],
    )
    samples = (["x", *_entry_names("g", p.n)], [[x, *_entries(v)] for x, v in zip(rebuilt.grid, rebuilt.values)])
    summary = (
        ["parseval_residual", "tail_energy", "window_complete"],
        [[parseval.residual, parseval.tail_energy, parseval.window_complete]],
    )
    _emit(session.run, [coefficients, samples, summary])
    return EXIT_OK


def cmd_weyl(session: _Session) -> int:
    """Limit-point / limit-circle verdicts with disk radii, and m(λ) when b is limit-point."""
    p, run, config = session.problem, session.run, session.config
    verdicts = []
    for end in ("a", "b"):
        result = classify_endpoint(p, end, run.lam, config)
        logger.info(f"endpoint {end}: {result.verdict}")
        if not result.truncations:
            verdicts.append([end, result.verdict, "", "", "", ""])
        for cut, (small, large), radius in zip(result.truncations, result.norms, result.radii):
            verdicts.append([end, result.verdict, cut, small, large, radius])
    tables = [(["endpoint", "verdict", "truncation", "norm_min", "norm_max", "radius"], verdicts)]

    right_lp = verdicts[-1][1] == LIMIT_POINT
    if right_lp and p.endpoint_regular("a") and math.isfinite(p.interval.a):
        rows = []
        for lam in _lambda_samples(run):
            report = m_function_2x2(p, run.alpha, lam, config, strict=False)
            rows.append([lam, report.contraction, report.minimizer, report.difference])
        tables.append((["lambda", "m_contraction", "m_minimizer", "difference"], rows))
    else:
        logger.info("m(λ) skipped: needs a regular left endpoint and a limit-point right endpoint")
    _emit(run, tables)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "solve-ivp": cmd_solve_ivp,
    "lambda-set": cmd_lambda_set,
    "eigs": cmd_eigs,
    "mfun": cmd_mfun,
    "green": cmd_green,
    "transform": cmd_transform,
    "weyl": cmd_weyl,
}


## [Entry Point]

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("problem", help="problem file")
    common.add_argument("--tol-quad", dest="tol_quad", type=float, help="relative quadrature tolerance")
    common.add_argument("--tol-eig", dest="tol_eig", type=float, help="eigenvalue tolerance")
    common.add_argument("--tol-residue", dest="tol_residue", type=float, help="residue contour tolerance")
    common.add_argument("--out", help="write CSV here instead of stdout")
    common.add_argument("--config", help="YAML file with run options")
    common.add_argument("--x0", type=float, help="re-anchor the fundamental matrix at this continuity point")
    common.add_argument("--verbose", "-v", action="store_true", default=None, help="debug logging")

    parser = argparse.ArgumentParser(prog="bvspectra", description="Spectral theory of Ju' + qu = wf with measure coefficients.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    subparsers.add_parser("validate", parents=[common], help="check the coefficient hypotheses, Λ and the endpoints")
    subparsers.add_parser("lambda-set", parents=[common], help="list the forbidden set Λ per atom")

    ivp = subparsers.add_parser("solve-ivp", parents=[common], help="sample the fundamental matrix U(·, λ)")
    ivp.add_argument("--lam", type=_complex_arg, help="spectral parameter")
    ivp.add_argument("--grid", type=int, help="number of sample points")

    for name, text in (("eigs", "eigenvalues and Δν in a window"), ("transform", "spectral coefficients of the file's f")):
        sub = subparsers.add_parser(name, parents=[common], help=text)
        sub.add_argument("--window", nargs=2, type=float, metavar=("LO", "HI"), help="real λ window")
        sub.add_argument("--grid", type=int, help="reconstruction sample points")

    mfun = subparsers.add_parser("mfun", parents=[common], help="M(λ) along a horizontal line")
    mfun.add_argument("--lam-re", dest="lam_re", nargs=2, type=float, metavar=("LO", "HI"), help="real part range")
    mfun.add_argument("--lam-im", dest="lam_im", type=float, help="imaginary part")
    mfun.add_argument("--lam", type=_complex_arg, help="single λ when --lam-re is absent")
    mfun.add_argument("--grid", type=int, help="number of λ samples")

    green = subparsers.add_parser("green", parents=[common], help="Green kernel samples on a grid")
    green.add_argument("--lam", type=_complex_arg, help="spectral parameter")
    green.add_argument("--grid", type=int, help="points per axis")

    weyl = subparsers.add_parser("weyl", parents=[common], help="limit-point / limit-circle and m(λ) for 2x2 real systems")
    weyl.add_argument("--alpha", type=float, help="separated condition angle at a, in [0, π)")
    weyl.add_argument("--lam", type=_complex_arg, help="non-real λ")
    weyl.add_argument("--lam-re", dest="lam_re", nargs=2, type=float, metavar=("LO", "HI"), help="sample m along Re λ")
    weyl.add_argument("--lam-im", dest="lam_im", type=float, help="imaginary part for the samples")
    weyl.add_argument("--grid", type=int, help="number of m samples")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = run_config(args)
        _configure_logging(run)
        return COMMANDS[run.subcommand](_Session(run))
    except SpectralError as e:
        report = getattr(e, "report", None)
        if report is not None:
            for line in report.lines():
                print(line, file=sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
