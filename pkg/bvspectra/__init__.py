import sys
import os

# Add private directory to path
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
PRIVATE_PATH = os.path.join(PROJECT_ROOT, "private")
if PRIVATE_PATH not in sys.path:
    sys.path.append(PRIVATE_PATH)

from solver import (
    SolverConfig,
    SpectralError,
    SpectralProblem,
    MFunction,
    load,
    build_problem,
    boundary_conditions,
    compute_kernel,
    spectral_measure,
)
from solver.cli import main
from .bvspectra import open_problem


# Make SpectralError appear under bvspectra in tracebacks
SpectralError.__module__ = "bvspectra"

# Define what gets imported with "from bvspectra import *"
__all__ = ["SolverConfig", "SpectralError", "SpectralProblem", "MFunction",
           "load", "build_problem", "boundary_conditions", "compute_kernel",
           "spectral_measure", "open_problem", "main"]
