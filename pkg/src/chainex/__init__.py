"""chainex: multi-party asset exchange by combinatorial chaining."""
from .chain import MODES, POLICIES, Smoothing, SolveConfig, solve
from .errors import ChainexError
from .instance import Bounds, GeneratorParams, Instance, generate_random, parse_instance, validate
from .netform import build_network, compute_size
from .oracle import enumerate_tiny, solve_exact, verify_solution
from .solution import Solution, serialize_solution

__version__ = "0.1.0"

__all__ = [
    "MODES", "POLICIES", "Smoothing", "SolveConfig", "solve", "ChainexError", "Bounds",
    "GeneratorParams", "Instance", "generate_random", "parse_instance", "validate",
    "build_network", "compute_size", "enumerate_tiny", "solve_exact", "verify_solution",
    "Solution", "serialize_solution",
]
