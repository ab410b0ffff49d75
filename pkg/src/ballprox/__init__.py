"""Ball-proximal point optimization on Hadamard manifolds."""

__version__ = "0.1.0"

from .manifold import ManifoldHandle, Point, Tangent  # noqa: F401
from .objective import (  # noqa: F401
    ProblemInstance,
    QuadraticSpec,
    initial_point,
    make_frechet_mean,
    make_quadratic,
    quadratic_problem,
)
from .ball_subproblem import (  # noqa: F401
    BroxResult,
    InnerSolverConfig,
    estimate_multiplier,
    exact_quadratic_ball_oracle,
    kkt_residual,
    solve_ball_pg,
)
from .outer_solver import (  # noqa: F401
    RadiusStrategy,
    SolverConfig,
    Trace,
    TraceRow,
    inner_tolerance,
    next_radius,
    run_gradient,
    run_proximal,
    run_rbppm,
)
from .diagnostics import CheckResult, TheoryReport, chain_multiplier_check, evaluate  # noqa: F401
