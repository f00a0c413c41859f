import sys
import pytest
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

@pytest.fixture
def problem_file(tmp_path):
    """Writes problem text to a temporary file and returns its path."""
    def _write(text: str, name: str = "problem.txt") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write

@pytest.fixture(autouse=True)
def setup_test_environment(monkeypatch):
    for name in ("BVSPECTRA_TOL_QUAD", "BVSPECTRA_TOL_EIG", "BVSPECTRA_ODE_METHOD", "BVSPECTRA_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)

pytest_plugins = ["tests.fixtures.common_fixtures"]
