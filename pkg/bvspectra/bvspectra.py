from typing import Optional, Tuple

from solver import (
    BoundaryConditions,
    KernelData,
    SolverConfig,
    SpectralProblem,
    boundary_conditions,
    build_problem,
    compute_kernel,
    load,
)


def open_problem(path: str, config: Optional[SolverConfig] = None) -> Tuple[SpectralProblem, KernelData, BoundaryConditions]:
    """Load a problem file and return the problem, its kernel data and accepted boundary conditions."""
    config = config or SolverConfig.from_env()
    spec = load(path)
    problem = build_problem(spec, config)
    kernel = compute_kernel(problem, config)
    return problem, kernel, boundary_conditions(spec, problem, kernel, config)
