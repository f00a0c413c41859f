import math

import numpy as np
import pytest

from solver.config import EXIT_PARSE, DomainError, ParseError, UsageError
from solver.problem_file import boundary_conditions, build_problem, format_complex, format_real, load, parse, serialize
from solver.structure import compute_kernel

from tests.fixtures.common_fixtures import PROBLEMS_DIR

GOLDEN = sorted(path.name for path in PROBLEMS_DIR.glob("*.txt"))

HEADER = "[problem]\ninterval = 0 1\nx0 = 0.5\nn = 2\n"


def _error(text):
    with pytest.raises(ParseError) as info:
        parse(text)
    return info.value


class TestParseErrors:

    def test_empty_file(self):
        error = _error("")
        assert (error.line, error.column) == (1, 1)
        assert error.exit_code == EXIT_PARSE

    def test_comments_only(self):
        assert _error("# nothing here\n\n").line == 1

    def test_must_start_with_problem(self):
        error = _error("[J]\n1j\n")
        assert error.line == 1
        assert "[problem]" in str(error)

    def test_bad_number_position(self):
        error = _error("[problem]\ninterval = 0 abc\nx0 = 0\nn = 1\n")
        assert (error.line, error.column) == (2, 14)

    def test_infinite_anchor(self):
        error = _error("[problem]\ninterval = 0 inf\nx0 = inf\nn = 1\n")
        assert error.line == 3

    @pytest.mark.parametrize("token", ["0", "-1", "two"])
    def test_bad_dimension(self, token):
        assert _error(f"[problem]\ninterval = 0 1\nx0 = 0.5\nn = {token}\n").line == 4

    def test_missing_key(self):
        error = _error("[problem]\ninterval = 0 1\nn = 1\n[J]\n1j\n")
        assert "x0" in str(error)

    def test_missing_j(self):
        assert "missing [J]" in str(_error(HEADER))

    def test_short_row(self):
        error = _error(HEADER + "[J]\n0 -1\n1\n")
        assert error.line == 7
        assert "expected 2 entries" in str(error)

    def test_unknown_section(self):
        error = _error(HEADER + "[J]\n0 -1\n1 0\n[v.density 0 1]\n")
        assert error.line == 8
        assert "unknown section" in str(error)

    def test_powers_in_order(self):
        text = HEADER + "[J]\n0 -1\n1 0\n[w.density 0 1]\npower 1\n1 0\n0 0\n"
        error = _error(text)
        assert (error.line, error.column) == (9, 7)

    def test_empty_density_range(self):
        assert "empty" in str(_error(HEADER + "[J]\n0 -1\n1 0\n[q.density 1 1]\npower 0\n0 0\n0 0\n"))

    def test_boundary_mode(self):
        error = _error(HEADER + "[J]\n0 -1\n1 0\n[boundary sideways]\n1 0 0 0\n0 0 1 0\n")
        assert "boundary mode" in str(error)

    def test_duplicate_boundary(self):
        text = HEADER + "[J]\n0 -1\n1 0\n[boundary]\n1 0 0 0\n[boundary]\n0 0 1 0\n"
        assert "duplicate" in str(_error(text))

    def test_message_carries_position(self):
        assert str(_error("")).startswith("1:1: ")


class TestParse:

    def test_comments_and_blank_lines(self):
        spec = parse(HEADER + "\n# J below\n[J]  # canonical\n0 -1\n1 0\n")
        assert spec.n == 2
        assert np.array_equal(spec.J, [[0, -1], [1, 0]])
        assert spec.boundary is None

    def test_example_one(self):
        spec = load(PROBLEMS_DIR / "example_one.txt")
        assert spec.interval == (-math.inf, math.inf)
        assert spec.J[0, 0] == 1j
        assert spec.w_atoms[0][0] == 0.0
        assert np.allclose(spec.boundary, [[1j, 1]])
        assert spec.f_function()(0.0)[0] == 1.0
        assert spec.f_function()(0.5)[0] == 0.0

    def test_polynomial_f(self):
        spec = load(PROBLEMS_DIR / "dirichlet_sl.txt")
        assert np.allclose(spec.f_function()(1.0), [math.pi - 1.0, 0.0])

    def test_reduce_mode(self):
        spec = load(PROBLEMS_DIR / "krein_string.txt")
        assert spec.boundary_mode == "reduce"
        assert spec.boundary.shape == (2, 4)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DomainError):
            load(tmp_path / "absent.txt")


class TestSerialize:

    def test_number_formats(self):
        assert format_real(math.inf) == "inf"
        assert format_real(-math.inf) == "-inf"
        assert format_real(0.1) == "0.10000000000000001"
        assert format_complex(1 - 2j) == "1-2j"
        assert format_complex(0.5) == "0.5+0j"

    @pytest.mark.parametrize("name", GOLDEN)
    def test_stable_text(self, name):
        text = serialize(load(PROBLEMS_DIR / name))
        assert serialize(parse(text)) == text

    def test_f_survives(self):
        spec = load(PROBLEMS_DIR / "dirichlet_sl.txt")
        again = parse(serialize(spec))
        assert np.allclose(again.f_function()(2.0), spec.f_function()(2.0))


class TestBuild:

    @pytest.mark.parametrize("name", GOLDEN)
    def test_golden_files_build(self, name):
        p = build_problem(load(PROBLEMS_DIR / name))
        assert p.report.ok

    def test_boundary_as_stated(self):
        spec = load(PROBLEMS_DIR / "dirichlet_sl.txt")
        p = build_problem(spec)
        bc = boundary_conditions(spec, p, compute_kernel(p))
        assert bc.classification == "separated"

    def test_boundary_reduced(self):
        spec = load(PROBLEMS_DIR / "krein_string.txt")
        p = build_problem(spec)
        bc = boundary_conditions(spec, p, compute_kernel(p))
        assert bc.matrix.shape == (1, 4)

    def test_no_boundary_section(self):
        spec = load(PROBLEMS_DIR / "free_halfline.txt")
        p = build_problem(spec)
        with pytest.raises(UsageError):
            boundary_conditions(spec, p, None)
