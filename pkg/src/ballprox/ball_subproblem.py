"""Solvers for the ball-constrained step ``min { f(q) : d(center, q) <= t }``.

Two routes are provided: a projected-gradient method with Armijo line search
that works on any supported geometry, and an exact oracle for Euclidean
quadratics that solves the boundary multiplier equation by safeguarded 1-D
root finding.  Both report the constraint multiplier and a KKT residual so
that results can be cross-checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from .manifold import ManifoldHandle, Point, Tangent
from .objective import ProblemInstance, QuadraticSpec

_MIN_STEP = 1e-20


def boundary_tol(t: float) -> float:
    """Activity tolerance for declaring the ball constraint binding."""
    return max(1e-8, 1e-6 * t)


@dataclass
class InnerSolverConfig:
    """Line-search and termination knobs for the projected-gradient solver."""

    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    max_inner: int = 200_000
    tol: float = 1e-8
    warm_start: Optional[Point] = None
    record_path: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.armijo_c < 1.0:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.max_inner < 1:
            raise ValueError("max_inner must be >= 1")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")


@dataclass
class BroxResult:
    """Solution of one ball-constrained step.

    ``active`` marks a binding constraint (distance >= t - boundary_tol);
    when it is False the multiplier is zero by complementary slackness.
    ``converged`` is False when the iteration budget ran out, in which case
    ``pg_residual`` reports the final stationarity residual.
    """

    point: Point
    multiplier_theta: float
    kkt_residual: float
    active: bool
    inner_iterations: int
    f_value: float
    converged: bool = True
    pg_residual: float = 0.0
    path: Optional[List[Point]] = None
    path_f: Optional[List[float]] = None


def estimate_multiplier(
    m: ManifoldHandle,
    problem: ProblemInstance,
    center: Point,
    x: Point,
    t: float,
) -> float:
    """Recover the constraint multiplier from the gradient at ``x``.

    Interior points get 0.  On the boundary the gradient of a smooth
    objective is proportional to the inward normal ``log_x(center)``; the
    least-squares projection onto that direction, clamped at zero, is the
    multiplier estimate.
    """
    d = m.distance(center, x)
    if d < t - boundary_tol(t) or d == 0.0:
        return 0.0
    g = problem.gradient_oracle(x)
    inward = m.log_map(x, center)
    return max(0.0, m.inner(g, inward) / (d * d))


def kkt_residual(
    m: ManifoldHandle,
    problem: ProblemInstance,
    center: Point,
    x: Point,
    t: float,
    theta: float,
) -> float:
    """Aggregate violation of the first-order conditions at (x, theta).

    Sums the stationarity residual ``|grad f(x) - theta log_x(center)|``,
    the feasibility excess, and the complementary-slackness defect; zero
    exactly when the full first-order system holds.
    """
    if theta < 0.0:
        raise ValueError("multiplier must be nonnegative")
    g = problem.gradient_oracle(x)
    inward = m.log_map(x, center)
    stationarity = m.norm(Tangent(x, g.vec - theta * inward.vec))
    d = m.distance(center, x)
    return stationarity + max(0.0, d - t) + theta * abs(d - t)


def solve_ball_pg(
    m: ManifoldHandle,
    problem: ProblemInstance,
    center: Point,
    t: float,
    cfg: InnerSolverConfig,
) -> BroxResult:
    """Projected-gradient solver with Armijo backtracking.

    Iterates ``x <- project_to_ball(center, t, exp_map(x, -a grad f(x)))``
    and stops when the unit-step projected-gradient residual drops below
    ``cfg.tol``.  Each iteration backtracks from a unit trial step, so the
    function-evaluation cost per iteration reflects the local curvature.
    Function values along the iterates never increase.
    """
    if t <= 0.0:
        raise ValueError("ball radius must be positive")
    if cfg.warm_start is not None:
        x = m.project_to_ball(center, t, cfg.warm_start)
    else:
        x = center
    f_x = problem.value_oracle(x)

    path = [x] if cfg.record_path else None
    path_f = [f_x] if cfg.record_path else None

    converged = False
    residual = math.inf
    iterations = 0
    for iterations in range(1, cfg.max_inner + 1):
        g = problem.gradient_oracle(x)
        full_step = m.project_to_ball(center, t, m.exp_map(x, Tangent(x, -g.vec)))
        residual = m.norm(m.log_map(x, full_step))
        if residual <= cfg.tol:
            converged = True
            break

        alpha = 1.0
        accepted = False
        while alpha >= _MIN_STEP:
            y = m.project_to_ball(center, t, m.exp_map(x, Tangent(x, -alpha * g.vec)))
            f_y = problem.value_oracle(y)
            descent = m.inner(g, m.log_map(x, y))
            if descent <= 0.0 and f_y <= f_x + cfg.armijo_c * descent:
                accepted = True
                break
            alpha *= cfg.backtrack_factor
        if not accepted:
            break
        x = y
        f_x = f_y
        if cfg.record_path:
            path.append(x)
            path_f.append(f_x)
    else:
        iterations = cfg.max_inner

    theta = estimate_multiplier(m, problem, center, x, t)
    d = m.distance(center, x)
    return BroxResult(
        point=x,
        multiplier_theta=theta,
        kkt_residual=kkt_residual(m, problem, center, x, t, theta),
        active=d >= t - boundary_tol(t),
        inner_iterations=iterations,
        f_value=f_x,
        converged=converged,
        pg_residual=residual,
        path=path,
        path_f=path_f,
    )


def exact_quadratic_ball_oracle(
    spec: QuadraticSpec, center: Point, t: float
) -> BroxResult:
    """Exact minimizer of ``x' A x / 2`` over the Euclidean ball B(center, t).

    If the origin is feasible it is returned with a zero multiplier.
    Otherwise the solution ``x(theta) = theta (A + theta I)^{-1} center``
    lies on the boundary, and the multiplier solves the scalar equation
    ``|x(theta) - center| = t``, handled by bracketed root finding in the
    eigenbasis followed by a Newton polish.
    """
    if t <= 0.0:
        raise ValueError("ball radius must be positive")
    eigs = np.asarray(spec.eigenvalues, dtype=float)
    if np.min(eigs) <= 0.0:
        raise ValueError("oracle requires a positive definite quadratic")
    c = np.asarray(center.coords, dtype=float)
    if c.shape != (spec.n,):
        raise ValueError("center has the wrong dimension for this quadratic")

    cnorm = float(np.linalg.norm(c))
    if cnorm <= t:
        x = Point(np.zeros(spec.n))
        return BroxResult(
            point=x,
            multiplier_theta=0.0,
            kkt_residual=0.0,
            active=cnorm >= t - boundary_tol(t),
            inner_iterations=0,
            f_value=0.0,
        )

    ct = spec.basis.T @ c

    # |x(theta) - center|^2 - t^2 in the eigenbasis; strictly decreasing,
    # positive at 0 (value cnorm^2 - t^2) and negative for large theta.
    def gap(theta: float) -> float:
        r = eigs * ct / (eigs + theta)
        return float(r @ r) - t * t

    def gap_prime(theta: float) -> float:
        r2 = (eigs * ct) ** 2 / (eigs + theta) ** 3
        return -2.0 * float(np.sum(r2))

    amax = float(np.max(eigs))
    hi = amax * cnorm / t + amax
    theta, info = brentq(gap, 0.0, hi, xtol=1e-13, rtol=1e-15, full_output=True)
    for _ in range(2):
        dg = gap_prime(theta)
        if dg == 0.0:
            break
        step = gap(theta) / dg
        candidate = theta - step
        if candidate <= 0.0:
            break
        theta = candidate

    x_coords = spec.basis @ (theta * ct / (eigs + theta))
    x = Point(x_coords)
    stationarity = spec.matrix @ x_coords + theta * (x_coords - c)
    d = float(np.linalg.norm(x_coords - c))
    residual = float(np.linalg.norm(stationarity)) + max(0.0, d - t) + theta * abs(d - t)
    return BroxResult(
        point=x,
        multiplier_theta=float(theta),
        kkt_residual=residual,
        active=True,
        inner_iterations=int(info.iterations),
        f_value=0.5 * float(x_coords @ (spec.matrix @ x_coords)),
    )
