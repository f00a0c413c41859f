# Copyright (C) 2025 bvspectra contributors
# See LICENSE for copying information.

import logging
import math
from types import SimpleNamespace

import numpy as np
import pytest

from . import quadrature as quadrature_module
from .quadrature import integrate, QuadratureError


def test_polynomial_exact():
    value = integrate(lambda x: np.array([[x**2, 1.0]]), 0.0, 3.0)
    assert value.shape == (1, 2)
    assert value[0, 0] == pytest.approx(9.0, abs=1e-12)
    assert value[0, 1] == pytest.approx(3.0, abs=1e-12)


def test_complex_integrand():
    value = integrate(lambda x: np.exp(1j * x), 0.0, math.pi)
    assert value == pytest.approx(2j, abs=1e-11)


def test_reversed_limits_change_sign():
    forward = integrate(lambda x: np.array(x), 0.0, 2.0)
    backward = integrate(lambda x: np.array(x), 2.0, 0.0)
    assert backward == pytest.approx(-forward, abs=1e-14)


def test_empty_interval_is_zero():
    value = integrate(lambda x: np.eye(2), 1.0, 1.0)
    assert np.array_equal(value, np.zeros((2, 2)))


def test_infinite_interval():
    value = integrate(lambda x: np.exp(-x * x), -math.inf, math.inf)
    assert value == pytest.approx(math.sqrt(math.pi), abs=1e-10)


def test_breakpoints_respected():
    value = integrate(lambda x: np.array(abs(x - 0.3)), 0.0, 1.0, points=[0.3])
    assert value == pytest.approx(0.5 * (0.09 + 0.49), abs=1e-12)


def test_non_integrable_raises():
    with pytest.raises(QuadratureError) as exc_info:
        integrate(lambda x: np.array(1.0 / x), 0.0, 1.0, limit=50)

    assert "did not converge" in str(exc_info.value)


def test_early_stop_logs_to_module_logger(monkeypatch, caplog):
    def stopped(f, a, b, **kwargs):
        return np.array([2.0, 0.0]), 0.0, SimpleNamespace(status=1, message="limit reached", neval=21)

    monkeypatch.setattr(quadrature_module, "quad_vec", stopped)
    with caplog.at_level(logging.DEBUG, logger=quadrature_module.__name__):
        value = integrate(lambda x: np.array(1.0), 0.0, 2.0)

    assert value == pytest.approx(2.0)
    records = [r for r in caplog.records if "stopped early" in r.getMessage()]
    assert records
    assert all(r.name == quadrature_module.__name__ for r in records)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
