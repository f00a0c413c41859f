import csv
import io

import pytest

from solver.cli import format_lambda_set, main
from solver.config import EXIT_OK, EXIT_PARSE, EXIT_VALIDATION
from solver.model import LambdaPoint, LambdaSet

from tests.fixtures.common_fixtures import PROBLEMS_DIR

pytestmark = pytest.mark.integration

IDENTITY_J = """[problem]
interval = 0 1
x0 = 0.5
n = 2

[J]
1 0
0 1

[w.density 0 1]
power 0
1 0
0 1
"""

BAD_BOUNDARY = """[problem]
interval = 0 1
x0 = 0.5
n = 1

[J]
0+1j

[w.density 0 1]
power 0
1

[boundary]
2 1
"""


def problem(name):
    return str(PROBLEMS_DIR / name)


def tables(text):
    """CSV output split on blank lines into lists of rows."""
    return [list(csv.reader(io.StringIO(block))) for block in text.strip("\n").split("\n\n")]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestValidate:

    def test_example_one(self, capsys):
        code, out, _ = run(capsys, "validate", problem("example_one.txt"))
        assert code == EXIT_OK
        assert "Λ = {±2i}; Λ∩ℝ empty; endpoints regular" in out
        assert "boundary conditions accepted (coupled, n+ = 1)" in out

    def test_singular_endpoint(self, capsys):
        code, out, _ = run(capsys, "validate", problem("free_halfline.txt"))
        assert code == EXIT_OK
        assert "Λ = {}" in out
        assert "endpoint a regular; endpoint b singular" in out

    def test_identity_j(self, capsys, problem_file):
        code, _, err = run(capsys, "validate", str(problem_file(IDENTITY_J)))
        assert code == EXIT_VALIDATION
        assert "J not skew-Hermitian" in err

    def test_rejected_boundary(self, capsys, problem_file):
        code, out, _ = run(capsys, "validate", str(problem_file(BAD_BOUNDARY)))
        assert code == EXIT_VALIDATION
        assert "boundary conditions rejected" in out

    def test_empty_file(self, capsys, problem_file):
        code, _, err = run(capsys, "validate", str(problem_file("")))
        assert code == EXIT_PARSE
        assert "1:1" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "validate", str(tmp_path / "nope.txt"))
        assert code == EXIT_VALIDATION


class TestFormatLambdaSet:

    def test_pairs_and_reals(self):
        forbidden = LambdaSet(points=[LambdaPoint(1 + 2j, 0.0, 1), LambdaPoint(1 - 2j, 0.0, -1), LambdaPoint(3.0 + 0j, 0.5, 1)])
        assert format_lambda_set(forbidden) == "{1±2i, 3}"

    def test_duplicates_collapse(self):
        forbidden = LambdaSet(points=[LambdaPoint(2j, 0.0, 1), LambdaPoint(-2j, 0.0, -1), LambdaPoint(2j, 0.3, 1)])
        assert format_lambda_set(forbidden) == "{±2i}"


class TestEigs:

    def test_example_one(self, capsys):
        code, out, _ = run(capsys, "eigs", problem("example_one.txt"), "--window", "-5", "5")
        assert code == EXIT_OK
        (rows,) = tables(out)
        assert rows[0] == ["index", "lambda", "multiplicity", "nu11"]
        assert len(rows) == 2
        assert float(rows[1][1]) == pytest.approx(2.0, abs=1e-9)
        assert complex(rows[1][3]) == pytest.approx(2.0, abs=1e-7)

    def test_empty_window_is_header_only(self, capsys):
        code, out, _ = run(capsys, "eigs", problem("dirichlet_sl.txt"), "--window", "2.5", "3.5")
        assert code == EXIT_OK
        assert out == "index,lambda,multiplicity,nu11,nu12,nu21,nu22\n"

    def test_krein_string(self, capsys):
        code, out, _ = run(capsys, "eigs", problem("krein_string.txt"), "--window", "0.5", "10")
        assert code == EXIT_OK
        (rows,) = tables(out)
        assert [float(r[1]) for r in rows[1:]] == pytest.approx([4.5], abs=1e-8)

    def test_window_required(self, capsys):
        code, _, err = run(capsys, "eigs", problem("dirichlet_sl.txt"))
        assert code == EXIT_VALIDATION
        assert "--window" in err

    def test_output_is_deterministic(self, capsys, tmp_path):
        paths = [tmp_path / "first.csv", tmp_path / "second.csv"]
        for path in paths:
            assert run(capsys, "eigs", problem("dirichlet_sl.txt"), "--window", "0.5", "10", "--out", str(path))[0] == EXIT_OK
        assert paths[0].read_bytes() == paths[1].read_bytes()
        assert paths[0].read_text().count("\n") == 4


class TestOtherCommands:

    def test_lambda_set(self, capsys):
        code, out, _ = run(capsys, "lambda-set", problem("example_one.txt"))
        assert code == EXIT_OK
        (rows,) = tables(out)
        values = sorted(complex(r[2]).imag for r in rows[1:])
        assert values == pytest.approx([-2.0, 2.0])
        assert {r[1] for r in rows[1:]} == {"1", "-1"}

    def test_solve_ivp_sides_at_the_mass(self, capsys):
        code, out, _ = run(capsys, "solve-ivp", problem("example_one.txt"), "--lam", "1j", "--grid", "5")
        assert code == EXIT_OK
        (rows,) = tables(out)
        at_mass = [r for r in rows[1:] if float(r[0]) == 0.0]
        assert [r[1] for r in at_mass] == ["left", "balanced", "right"]
        # (2 - iλ)/(2 + iλ) at λ = i
        assert complex(at_mass[2][2]) == pytest.approx(3.0, abs=1e-12)

    def test_mfun_single_lambda(self, capsys):
        code, out, _ = run(capsys, "mfun", problem("example_one.txt"), "--lam", "0.5j")
        assert code == EXIT_OK
        (rows,) = tables(out)
        lam = 0.5j
        assert complex(rows[1][1]) == pytest.approx((4 + 2 * lam) / (4 * (2 - lam)), abs=1e-10)

    def test_mfun_line(self, capsys):
        code, out, _ = run(capsys, "mfun", problem("example_two.txt"), "--lam-re", "-1", "1", "--lam-im", "0.5", "--grid", "3")
        assert code == EXIT_OK
        (rows,) = tables(out)
        assert rows[0] == ["lambda", "M11", "M12", "M21", "M22"]
        assert [complex(r[0]) for r in rows[1:]] == [-1 + 0.5j, 0.5j, 1 + 0.5j]

    def test_green(self, capsys):
        code, out, _ = run(capsys, "green", problem("dirichlet_sl.txt"), "--lam", "-1", "--grid", "4")
        assert code == EXIT_OK
        (rows,) = tables(out)
        # the endpoints drop out, leaving a 2x2 grid of interior points
        assert len(rows) == 1 + 4

    def test_transform(self, capsys):
        code, out, _ = run(capsys, "transform", problem("example_one.txt"), "--window", "-5", "5", "--grid", "3")
        assert code == EXIT_OK
        coefficients, samples, summary = tables(out)
        assert coefficients[0] == ["index", "lambda", "fhat1"]
        assert complex(coefficients[1][2]) == pytest.approx((1 + 1j) / 2, abs=1e-8)
        assert samples[0] == ["x", "g1"]
        assert summary[1][2] == "true"

    def test_transform_needs_f(self, capsys):
        code, _, err = run(capsys, "transform", problem("krein_string.txt"), "--window", "0", "10")
        assert code == EXIT_VALIDATION
        assert "[f.density]" in err

    def test_weyl_free_halfline(self, capsys):
        code, out, _ = run(capsys, "weyl", problem("free_halfline.txt"), "--lam", "2j")
        assert code == EXIT_OK
        verdicts, m_table = tables(out)
        assert verdicts[1][:2] == ["a", "limit-circle"]
        assert verdicts[-1][:2] == ["b", "limit-point"]
        assert complex(m_table[1][1]) == pytest.approx(-1 + 1j, abs=1e-6)

    def test_weyl_needs_two_by_two(self, capsys):
        code, _, _ = run(capsys, "weyl", problem("example_one.txt"))
        assert code == EXIT_VALIDATION


class TestRunConfigFile:

    def test_yaml_window(self, capsys, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("window: [-5, 5]\n")
        code, out, _ = run(capsys, "eigs", problem("example_one.txt"), "--config", str(path))
        assert code == EXIT_OK
        assert len(tables(out)[0]) == 2

    def test_flag_overrides_yaml(self, capsys, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("window: [-5, 5]\n")
        code, out, _ = run(capsys, "eigs", problem("example_one.txt"), "--config", str(path), "--window", "3", "4")
        assert code == EXIT_OK
        assert len(tables(out)[0]) == 1

    def test_unknown_key(self, capsys, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("windw: [0, 1]\n")
        code, _, err = run(capsys, "eigs", problem("example_one.txt"), "--config", str(path))
        assert code == EXIT_VALIDATION
        assert "windw" in err

    def test_bad_tolerance(self, capsys):
        code, _, _ = run(capsys, "eigs", problem("example_one.txt"), "--window", "0", "1", "--tol-eig", "-1")
        assert code == EXIT_VALIDATION
