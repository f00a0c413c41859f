import os

import pytest

import solver.config as config_module
from solver.cache import EvaluatorCache
from solver.config import (
    EXIT_NUMERIC,
    EXIT_PARSE,
    EXIT_VALIDATION,
    BoundaryConditionError,
    DomainError,
    LambdaForbiddenError,
    ParseError,
    SolverConfig,
    UnsupportedError,
    UsageError,
    WithEigenTolerance,
    WithOdeMethod,
    WithOdeTolerance,
    WithQuadTolerance,
    WithResidueTolerance,
    WithScanPoints,
    WithTruncations,
)
from solver.model import RunConfig


class TestSolverConfig:

    def test_defaults(self):
        config = SolverConfig.default()
        assert config.ode_method == "RK45"
        assert config.quad_epsrel == 1e-10
        assert config.scan_points == 1000

    def test_options_compose(self):
        config = SolverConfig.default().with_options(
            WithQuadTolerance(1e-8),
            WithOdeTolerance(1e-9),
            WithEigenTolerance(1e-11, threshold=1e-7),
            WithScanPoints(50),
            WithResidueTolerance(1e-6, points=32),
            WithTruncations(5),
            WithOdeMethod("DOP853"),
        )
        assert config.quad_epsrel == 1e-8
        assert config.quad_epsabs == 1e-12
        assert config.ode_atol == pytest.approx(1e-11)
        assert (config.eig_tol, config.eig_threshold) == (1e-11, 1e-7)
        assert (config.scan_points, config.residue_points, config.truncations) == (50, 32, 5)
        assert config.ode_method == "DOP853"

    def test_original_untouched(self):
        base = SolverConfig.default()
        base.with_options(WithScanPoints(10))
        assert base.scan_points == 1000

    @pytest.mark.parametrize(
        "build",
        [
            lambda: WithQuadTolerance(0.0),
            lambda: WithOdeTolerance(-1e-8),
            lambda: WithEigenTolerance(1e-9, threshold=0.0),
            lambda: WithScanPoints(2),
            lambda: WithTruncations(3),
            lambda: WithOdeMethod("Euler"),
        ],
    )
    def test_invalid_options(self, build):
        with pytest.raises(DomainError):
            build()


class TestEnvironment:

    @pytest.fixture(autouse=True)
    def _isolated(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)

    def test_overrides(self, monkeypatch):
        monkeypatch.setenv("BVSPECTRA_TOL_QUAD", "1e-7")
        monkeypatch.setenv("BVSPECTRA_TOL_EIG", "1e-12")
        monkeypatch.setenv("BVSPECTRA_ODE_METHOD", "RK23")
        config = SolverConfig.from_env()
        assert (config.quad_epsrel, config.eig_tol, config.ode_method) == (1e-7, 1e-12, "RK23")

    def test_dotenv_file(self, tmp_path):
        (tmp_path / ".env").write_text("BVSPECTRA_TOL_EIG=1e-8\n")
        try:
            assert SolverConfig.from_env().eig_tol == 1e-8
        finally:
            os.environ.pop("BVSPECTRA_TOL_EIG", None)

    @pytest.mark.parametrize("name,value", [("BVSPECTRA_TOL_QUAD", "tight"), ("BVSPECTRA_TOL_EIG", "-1"), ("BVSPECTRA_ODE_METHOD", "Euler")])
    def test_invalid_values(self, monkeypatch, name, value):
        monkeypatch.setenv(name, value)
        with pytest.raises(DomainError):
            SolverConfig.from_env()

    def test_dotenv_loader_is_called(self, monkeypatch):
        seen = []
        monkeypatch.setattr(config_module, "load_dotenv", lambda path: seen.append(path) or False)
        SolverConfig.from_env()
        assert len(seen) == 1

    def test_unset_gives_defaults(self):
        assert SolverConfig.from_env() == SolverConfig.default()


class TestErrors:

    @pytest.mark.parametrize(
        "error,code",
        [
            (ParseError("bad", 2, 3), EXIT_PARSE),
            (DomainError("x"), EXIT_VALIDATION),
            (UsageError("x"), EXIT_VALIDATION),
            (BoundaryConditionError("x", kinds=("rank",)), EXIT_VALIDATION),
            (LambdaForbiddenError("x", location=0.0), EXIT_NUMERIC),
            (UnsupportedError("x"), EXIT_NUMERIC),
        ],
    )
    def test_exit_codes(self, error, code):
        assert error.exit_code == code

    def test_parse_error_position(self):
        error = ParseError("unexpected token", 4, 9)
        assert str(error) == "4:9: unexpected token"


class TestRunConfig:

    def test_defaults(self):
        run = RunConfig(problem_path="p.txt", subcommand="eigs")
        assert run.grid == 50
        assert run.lam == 1j

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"tol_quad": 0.0},
            {"window": (3.0, 1.0)},
            {"lam_re": (2.0, -2.0)},
            {"grid": 0},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(DomainError):
            RunConfig(problem_path="p.txt", subcommand="eigs", **kwargs)


class TestEvaluatorCache:

    def test_builds_once(self):
        cache = EvaluatorCache()
        calls = []
        build = lambda: calls.append(1) or object()
        first = cache.get("k", build)
        assert cache.get("k", build) is first
        assert len(calls) == 1

    def test_evicts_oldest(self):
        cache = EvaluatorCache(max_entries=2)
        for key in "abc":
            cache.get(key, lambda: key)
        assert len(cache) == 2
        assert cache.get("a", lambda: "rebuilt") == "rebuilt"

    def test_close(self):
        cache = EvaluatorCache()
        cache.get(1, lambda: 1)
        cache.close()
        assert len(cache) == 0
