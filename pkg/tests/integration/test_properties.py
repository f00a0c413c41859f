"""Identities that hold for every problem, checked over seeded random regular problems."""

import numpy as np
import pytest

from solver.greens import MFunction, resolvent_evaluator, spectral_measure
from solver.ivp import solve_ivp_balanced, wronskian
from solver.spectral import parseval_check
from solver.structure import compute_kernel, lagrange_residual, validate_boundary_conditions

from tests.utils.test_helpers import close, periodic_rows, random_problem, sample_lambdas

pytestmark = [pytest.mark.integration, pytest.mark.slow]

SEEDS = range(100)


def _setup(seed, w_kind="density"):
    p = random_problem(seed, w_kind)
    k = compute_kernel(p)
    theta = float(np.random.default_rng(seed).uniform(0, 2 * np.pi))
    bc = validate_boundary_conditions(p, k, periodic_rows(p.n, theta))
    return p, k, bc


def _vector(seed, n):
    rng = np.random.default_rng(20_000 + seed)
    return rng.normal(size=n) + 1j * rng.normal(size=n)


@pytest.mark.parametrize("seed", SEEDS)
def test_herglotz_and_conjugation(seed):
    p, k, bc = _setup(seed)
    m = MFunction(p, k, bc)
    for lam in sample_lambdas(seed):
        assert m.herglotz_floor(lam) > -1e-8
        assert m.conjugate_defect(lam) < 1e-8 * max(1.0, float(np.max(np.abs(m(lam)))))


@pytest.mark.parametrize("seed", SEEDS)
def test_wronskian_is_constant(seed):
    p = random_problem(seed)
    grid = list(np.linspace(0.0, 1.0, 6))
    for lam in sample_lambdas(seed, 2):
        u = solve_ivp_balanced(p.r_measure(lam.conjugate()), None, p.x0, np.eye(p.n), "b", grid)
        v = solve_ivp_balanced(p.r_measure(lam), None, p.x0, np.eye(p.n), "b", grid)
        assert wronskian(u, v, p.J).deviation < 1e-8


@pytest.mark.parametrize("seed", SEEDS)
def test_lagrange_identity(seed):
    p = random_problem(seed)
    lam, mu = sample_lambdas(seed, 2)
    pairs = []
    for z, c in ((lam, _vector(seed, p.n)), (mu, _vector(seed + 1, p.n))):
        U = p.fundamental_matrix(z)
        pairs.append(((lambda x, side="balanced", U=U, c=c: U(x, side) @ c), (lambda x, side="balanced", U=U, c=c, z=z: z * (U(x, side) @ c))))
    residual = lagrange_residual(p, pairs[0], pairs[1])
    assert abs(residual) < 1e-7 * max(1.0, float(np.max(np.abs(pairs[0][0](1.0, "left")))) ** 2)


@pytest.mark.parametrize("seed", SEEDS)
def test_resolvent_identity(seed):
    p, k, bc = _setup(seed, "atoms")
    lam, mu = sample_lambdas(seed, 2)
    c = _vector(seed, p.n)
    f = lambda x: c
    e_lam = resolvent_evaluator(p, k, bc, lam, f)
    e_mu = resolvent_evaluator(p, k, bc, mu, f)
    nested = resolvent_evaluator(p, k, bc, lam, lambda x: e_mu(x))
    for x in [p.x0, *p.atom_locations()]:
        assert close(e_lam(x) - e_mu(x), (lam - mu) * nested(x), 1e-7)


@pytest.mark.parametrize("seed", SEEDS)
def test_parseval_on_atoms(seed):
    p, k, bc = _setup(seed, "atoms")
    sm = spectral_measure(MFunction(p, k, bc), (-50.0, 50.0))
    f = lambda x, c=_vector(seed, p.n): c
    g = lambda x, c=_vector(seed + 7, p.n): c
    report = parseval_check(p, sm, f, g)
    assert report.residual < 1e-6 * max(1.0, abs(report.lhs))
