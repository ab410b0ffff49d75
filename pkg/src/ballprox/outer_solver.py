"""Outer loops: ball-proximal point method plus proximal and gradient baselines.

Every run produces a :class:`Trace` with one record per iterate; the final
record carries the terminal point with step fields unset.  Traces serialize
to CSV (fixed column order) and to JSON with full run metadata.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from . import __version__
from .ball_subproblem import (
    BroxResult,
    InnerSolverConfig,
    exact_quadratic_ball_oracle,
    solve_ball_pg,
)
from .manifold import ManifoldHandle, Point, Tangent
from .objective import ProblemInstance, initial_point

FIXED = "fixed"
ADAPTIVE_GRAD = "adaptive-grad"
POLYAK = "polyak"
SCHEDULE = "schedule"

# Outer step shorter than this counts as a fixed point of the iteration map.
STAGNATION_TOL = 1e-14

TRACE_CSV_COLUMNS = [
    "k", "t_k", "f", "grad_norm", "theta", "s_norm",
    "step_len", "inner_iters", "f_evals",
]
TRACE_CSV_SCHEMA = "ballprox-trace-csv-v1"


@dataclass(frozen=True)
class RadiusStrategy:
    """Rule producing the ball radius for each outer iteration.

    Kinds: ``fixed`` (constant ``value``), ``adaptive-grad`` (``value`` times
    the gradient norm, clipped to [t_min, t_max]), ``polyak`` (``value`` times
    the objective gap over the gradient norm, clipped), and ``schedule`` (an
    explicit radius sequence, for experiments with decaying radii).
    """

    kind: str
    value: float = 0.0
    t_min: float = 1e-2
    t_max: float = 1e6
    f_lower: Optional[float] = None
    radius_fn: Optional[Callable[[int], float]] = None

    def __post_init__(self) -> None:
        if self.kind not in (FIXED, ADAPTIVE_GRAD, POLYAK, SCHEDULE):
            raise ValueError(f"unknown radius strategy kind: {self.kind!r}")
        if not 0.0 < self.t_min <= self.t_max:
            raise ValueError("need 0 < t_min <= t_max")
        if self.kind == FIXED and self.value <= 0.0:
            raise ValueError("fixed radius must be positive")
        if self.kind in (ADAPTIVE_GRAD, POLYAK) and self.value <= 0.0:
            raise ValueError("radius scaling parameter must be positive")
        if self.kind == SCHEDULE and self.radius_fn is None:
            raise ValueError("schedule strategy needs a radius function")

    @classmethod
    def fixed(cls, t: float) -> "RadiusStrategy":
        return cls(FIXED, value=t)

    @classmethod
    def adaptive_grad(
        cls, alpha: float, t_min: float = 1e-2, t_max: float = 1e6
    ) -> "RadiusStrategy":
        return cls(ADAPTIVE_GRAD, value=alpha, t_min=t_min, t_max=t_max)

    @classmethod
    def polyak(
        cls,
        beta: float,
        t_min: float = 1e-2,
        t_max: float = 1e6,
        f_lower: Optional[float] = None,
    ) -> "RadiusStrategy":
        return cls(POLYAK, value=beta, t_min=t_min, t_max=t_max, f_lower=f_lower)

    @classmethod
    def from_schedule(cls, fn: Callable[[int], float]) -> "RadiusStrategy":
        return cls(SCHEDULE, radius_fn=fn)

    def descriptor(self) -> dict:
        d = {"kind": self.kind, "t_min": self.t_min, "t_max": self.t_max}
        if self.kind == FIXED:
            d["t"] = self.value
        elif self.kind == ADAPTIVE_GRAD:
            d["alpha"] = self.value
        elif self.kind == POLYAK:
            d["beta"] = self.value
            if self.f_lower is not None:
                d["f_lower"] = self.f_lower
        else:
            d["schedule"] = getattr(self.radius_fn, "__name__", "custom")
        return d


def next_radius(
    strategy: RadiusStrategy,
    grad_norm: float,
    f_val: float,
    f_lower: Optional[float] = None,
) -> float:
    """Radius for the next ball step under the given strategy."""
    if grad_norm < 0.0:
        raise ValueError("gradient norm must be nonnegative")
    if strategy.kind == FIXED:
        return strategy.value
    clip = lambda t: min(strategy.t_max, max(strategy.t_min, t))
    if strategy.kind == ADAPTIVE_GRAD:
        return clip(strategy.value * grad_norm)
    if strategy.kind == POLYAK:
        lower = f_lower if f_lower is not None else strategy.f_lower
        if lower is None:
            raise ValueError("polyak radius needs a lower estimate of the optimum")
        if lower > f_val:
            raise ValueError("polyak lower estimate exceeds the current value")
        if grad_norm < 1e-300:
            return strategy.t_min
        return clip(strategy.value * (f_val - lower) / grad_norm)
    raise ValueError("schedule strategies supply radii by iteration index")


def inner_tolerance(
    outer_residual: float, t_k: float, eps_opt: float, is_ball: bool
) -> float:
    """Stopping tolerance for one subproblem solve.

    Starts at sqrt(eps_opt), shrinks with the outer residual, never drops
    below eps_opt; ball subproblems are additionally capped at 0.1 t so the
    inner accuracy stays compatible with the ball radius.
    """
    if outer_residual <= 0.0 or t_k <= 0.0 or eps_opt <= 0.0:
        raise ValueError("inner_tolerance arguments must be positive")
    tol = min(math.sqrt(eps_opt), outer_residual / 10.0)
    tol = max(tol, eps_opt)
    if is_ball:
        tol = min(tol, 0.1 * t_k)
    return tol


@dataclass
class SolverConfig:
    eps_opt: float = 1e-6
    max_outer: int = 50_000
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    record_theory_fields: bool = True
    use_exact_oracle: bool = False
    record_inner_points: bool = False

    def __post_init__(self) -> None:
        if self.eps_opt <= 0.0:
            raise ValueError("eps_opt must be positive")
        if self.max_outer < 0:
            raise ValueError("max_outer must be nonnegative")


@dataclass
class TraceRow:
    """State at iterate k plus the step leaving it.

    The terminal row has no outgoing step: its step fields are NaN and
    ``inner_iters`` is 0.
    """

    k: int
    point: Point
    t: float
    f: float
    grad_norm: float
    theta: float
    s_norm: float
    step_len: float
    inner_iters: int
    f_evals: int
    active: bool = False
    inner_tol: float = math.nan


@dataclass
class Trace:
    rows: List[TraceRow]
    status: str  # "converged" | "max_outer" | "stagnated"
    problem_label: str
    algorithm: str  # "broximal" | "proximal" | "gradient"
    strategy: dict
    mode: str  # "exact" | "inexact"
    eps_opt: float
    seed: Optional[int]
    f_evals_total: int
    inner_points: Optional[List[tuple]] = None  # (Point, f) pairs
    meta: dict = field(default_factory=dict)

    @property
    def outer_iters(self) -> int:
        return len(self.rows) - 1

    @property
    def inner_iters_total(self) -> int:
        return sum(r.inner_iters for r in self.rows)

    @property
    def final_f(self) -> float:
        return self.rows[-1].f

    @property
    def final_grad_norm(self) -> float:
        return self.rows[-1].grad_norm

    def trace_id(self) -> str:
        return f"{self.problem_label}--{self.algorithm}--seed{self.seed}"

    def validate(self) -> None:
        if not self.rows:
            raise ValueError("trace has no rows")
        tol = 1e-12 * (1.0 + abs(self.rows[0].f))
        for a, b in zip(self.rows, self.rows[1:]):
            if b.f > a.f + tol:
                raise ValueError(
                    f"objective increased at iteration {b.k}: {a.f} -> {b.f}"
                )

    # -- serialization -----------------------------------------------------

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(f"# {TRACE_CSV_SCHEMA}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TRACE_CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([
                r.k, repr(r.t), repr(r.f), repr(r.grad_norm), repr(r.theta),
                repr(r.s_norm), repr(r.step_len), r.inner_iters, r.f_evals,
            ])
        return out.getvalue()

    def as_dict(self) -> dict:
        def num(x):
            return None if (isinstance(x, float) and math.isnan(x)) else x

        d = {
            "schema": "ballprox-trace-v1",
            "version": __version__,
            "problem_label": self.problem_label,
            "algorithm": self.algorithm,
            "strategy": self.strategy,
            "mode": self.mode,
            "status": self.status,
            "eps_opt": self.eps_opt,
            "seed": self.seed,
            "f_evals_total": self.f_evals_total,
            "meta": self.meta,
            "rows": [
                {
                    "k": r.k,
                    "point": r.point.coords.tolist(),
                    "t": num(r.t),
                    "f": r.f,
                    "grad_norm": r.grad_norm,
                    "theta": num(r.theta),
                    "s_norm": num(r.s_norm),
                    "step_len": num(r.step_len),
                    "inner_iters": r.inner_iters,
                    "f_evals": r.f_evals,
                    "active": r.active,
                    "inner_tol": num(r.inner_tol),
                }
                for r in self.rows
            ],
        }
        if self.inner_points is not None:
            d["inner_points"] = [
                {"point": p.coords.tolist(), "f": f} for p, f in self.inner_points
            ]
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "Trace":
        def num(x):
            return math.nan if x is None else float(x)

        rows = [
            TraceRow(
                k=r["k"],
                point=Point(np.asarray(r["point"], dtype=float)),
                t=num(r["t"]),
                f=float(r["f"]),
                grad_norm=float(r["grad_norm"]),
                theta=num(r["theta"]),
                s_norm=num(r["s_norm"]),
                step_len=num(r["step_len"]),
                inner_iters=int(r["inner_iters"]),
                f_evals=int(r["f_evals"]),
                active=bool(r.get("active", False)),
                inner_tol=num(r.get("inner_tol")),
            )
            for r in d["rows"]
        ]
        inner = None
        if "inner_points" in d:
            inner = [
                (Point(np.asarray(e["point"], dtype=float)), float(e["f"]))
                for e in d["inner_points"]
            ]
        return cls(
            rows=rows,
            status=d["status"],
            problem_label=d["problem_label"],
            algorithm=d["algorithm"],
            strategy=d["strategy"],
            mode=d["mode"],
            eps_opt=float(d["eps_opt"]),
            seed=d["seed"],
            f_evals_total=int(d["f_evals_total"]),
            inner_points=inner,
            meta=d.get("meta", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "Trace":
        return cls.from_dict(json.loads(text))


def _counted(problem: ProblemInstance):
    """Clone the problem with a value oracle that counts its calls."""
    calls = [0]
    base = problem.value_oracle

    def value(p: Point) -> float:
        calls[0] += 1
        return base(p)

    return replace(problem, value_oracle=value), (lambda: calls[0])


def _terminal_row(k, p, f, gn, count):
    return TraceRow(
        k=k, point=p, t=math.nan, f=f, grad_norm=gn, theta=math.nan,
        s_norm=math.nan, step_len=math.nan, inner_iters=0, f_evals=count,
    )


def _base_meta(problem: ProblemInstance, cfg: SolverConfig) -> dict:
    return {
        "problem": problem.descriptor,
        "manifold": {"kind": problem.manifold.kind, "dim": problem.manifold.dim},
        "eps_opt": cfg.eps_opt,
        "max_outer": cfg.max_outer,
        "armijo_c": cfg.inner.armijo_c,
        "backtrack_factor": cfg.inner.backtrack_factor,
        "pre_qr_distribution": "standard-normal",
        "inner_tolerance_rule": "max(eps_opt, min(sqrt(eps_opt), residual/10)), ball cap 0.1 t",
    }


def run_rbppm(
    problem: ProblemInstance,
    strategy: RadiusStrategy,
    cfg: Optional[SolverConfig] = None,
    seed: int = 0,
    p0: Optional[Point] = None,
) -> Trace:
    """Ball-proximal point outer loop.

    Repeats: stop if the gradient norm is at most ``eps_opt``; otherwise pick
    a radius, minimize the objective over the ball around the current iterate
    (exact oracle or projected gradient), and advance.  A step shorter than
    the stagnation threshold while the gradient is still large terminates the
    run with status ``"stagnated"``.
    """
    cfg = cfg or SolverConfig()
    m = problem.manifold
    if cfg.use_exact_oracle and problem.quadratic is None:
        raise ValueError("exact oracle mode requires a quadratic problem")
    counted, count = _counted(problem)
    p = p0 if p0 is not None else initial_point(problem, seed)

    rows: List[TraceRow] = []
    inner_pts: List[tuple] = []
    warm: Optional[Point] = None
    status = "max_outer"
    stagnated = False
    k = 0
    while True:
        f_k = counted.value_oracle(p)
        g = counted.gradient_oracle(p)
        gn = m.norm(g)
        if gn <= cfg.eps_opt:
            status = "converged"
            break
        if stagnated:
            status = "stagnated"
            break
        if k >= cfg.max_outer:
            status = "max_outer"
            break

        if strategy.kind == SCHEDULE:
            t_k = float(strategy.radius_fn(k))
            if t_k <= 0.0:
                raise ValueError("radius schedule produced a nonpositive radius")
        else:
            f_lower = problem.f_star if problem.f_star is not None else strategy.f_lower
            t_k = next_radius(strategy, gn, f_k, f_lower)

        outer_residual = math.inf if k == 0 else gn
        tol_k = inner_tolerance(outer_residual, t_k, cfg.eps_opt, is_ball=True)

        if cfg.use_exact_oracle:
            res = exact_quadratic_ball_oracle(problem.quadratic, p, t_k)
        else:
            icfg = replace(
                cfg.inner,
                tol=tol_k,
                warm_start=warm,
                record_path=cfg.record_inner_points,
            )
            res = solve_ball_pg(m, counted, p, t_k, icfg)

        p_next = res.point
        step_len = m.distance(p, p_next)
        theta = res.multiplier_theta
        rows.append(TraceRow(
            k=k, point=p, t=t_k, f=f_k, grad_norm=gn, theta=theta,
            s_norm=theta * step_len, step_len=step_len,
            inner_iters=res.inner_iterations, f_evals=count(),
            active=res.active, inner_tol=tol_k,
        ))
        if cfg.record_inner_points and res.path is not None:
            inner_pts.extend(zip(res.path, res.path_f))
        if step_len <= STAGNATION_TOL:
            stagnated = True
        warm = p_next
        p = p_next
        k += 1

    rows.append(_terminal_row(len(rows), p, f_k, gn, count()))
    trace = Trace(
        rows=rows,
        status=status,
        problem_label=problem.label,
        algorithm="broximal",
        strategy=strategy.descriptor(),
        mode="exact" if cfg.use_exact_oracle else "inexact",
        eps_opt=cfg.eps_opt,
        seed=seed,
        f_evals_total=count(),
        inner_points=inner_pts if cfg.record_inner_points else None,
        meta=_base_meta(problem, cfg),
    )
    trace.validate()
    return trace


def _minimize_penalized(
    m: ManifoldHandle,
    problem: ProblemInstance,
    center: Point,
    lam: float,
    tol: float,
    cfg: InnerSolverConfig,
) -> tuple:
    """Gradient descent with Armijo on ``f(q) + lam/2 d^2(q, center)``.

    Starts at the center; stops when the penalized gradient norm falls
    below ``tol``.  Returns (point, iterations).
    """
    x = center
    pen_base = problem.value_oracle(x)
    d_sq = 0.0
    f_pen = pen_base + 0.5 * lam * d_sq
    have_L = problem.lipschitz_L is not None and problem.lipschitz_L > 0.0
    alpha_fixed = 1.0 / (problem.lipschitz_L + lam) if have_L else None
    alpha_last = 1.0

    iterations = 0
    for iterations in range(1, cfg.max_inner + 1):
        g_f = problem.gradient_oracle(x)
        pull = m.log_map(x, center)
        g_vec = g_f.vec - lam * pull.vec
        g = Tangent(x, g_vec)
        gn = m.norm(g)
        if gn <= tol:
            break
        alpha = alpha_fixed if have_L else 2.0 * alpha_last
        accepted = False
        while alpha >= 1e-20:
            y = m.exp_map(x, Tangent(x, -alpha * g_vec))
            dy = m.distance(y, center)
            f_y = problem.value_oracle(y) + 0.5 * lam * dy * dy
            if f_y <= f_pen - cfg.armijo_c * alpha * gn * gn:
                accepted = True
                break
            alpha *= cfg.backtrack_factor
        if not accepted:
            break
        x = y
        f_pen = f_y
        alpha_last = alpha
    return x, iterations


def run_proximal(
    problem: ProblemInstance,
    lam: float,
    cfg: Optional[SolverConfig] = None,
    seed: int = 0,
    p0: Optional[Point] = None,
) -> Trace:
    """Proximal point baseline: each outer step minimizes
    ``f(q) + lam/2 d^2(q, p_k)`` by gradient descent with Armijo."""
    if lam <= 0.0:
        raise ValueError("proximal parameter must be positive")
    cfg = cfg or SolverConfig()
    m = problem.manifold
    counted, count = _counted(problem)
    p = p0 if p0 is not None else initial_point(problem, seed)

    rows: List[TraceRow] = []
    status = "max_outer"
    stagnated = False
    k = 0
    while True:
        f_k = counted.value_oracle(p)
        g = counted.gradient_oracle(p)
        gn = m.norm(g)
        if gn <= cfg.eps_opt:
            status = "converged"
            break
        if stagnated:
            status = "stagnated"
            break
        if k >= cfg.max_outer:
            status = "max_outer"
            break
        outer_residual = math.inf if k == 0 else gn
        tol_k = inner_tolerance(outer_residual, 1.0, cfg.eps_opt, is_ball=False)
        p_next, inner_iters = _minimize_penalized(m, counted, p, lam, tol_k, cfg.inner)
        step_len = m.distance(p, p_next)
        rows.append(TraceRow(
            k=k, point=p, t=math.nan, f=f_k, grad_norm=gn, theta=lam,
            s_norm=lam * step_len, step_len=step_len,
            inner_iters=inner_iters, f_evals=count(), inner_tol=tol_k,
        ))
        if step_len <= STAGNATION_TOL:
            stagnated = True
        p = p_next
        k += 1

    rows.append(_terminal_row(len(rows), p, f_k, gn, count()))
    trace = Trace(
        rows=rows,
        status=status,
        problem_label=problem.label,
        algorithm="proximal",
        strategy={"kind": "proximal", "lambda": lam},
        mode="inexact",
        eps_opt=cfg.eps_opt,
        seed=seed,
        f_evals_total=count(),
        meta=_base_meta(problem, cfg),
    )
    trace.validate()
    return trace


def run_gradient(
    problem: ProblemInstance,
    cfg: Optional[SolverConfig] = None,
    seed: int = 0,
    p0: Optional[Point] = None,
) -> Trace:
    """Gradient descent baseline with Armijo backtracking from unit steps."""
    cfg = cfg or SolverConfig()
    m = problem.manifold
    counted, count = _counted(problem)
    p = p0 if p0 is not None else initial_point(problem, seed)

    rows: List[TraceRow] = []
    status = "max_outer"
    stagnated = False
    k = 0
    while True:
        f_k = counted.value_oracle(p)
        g = counted.gradient_oracle(p)
        gn = m.norm(g)
        if gn <= cfg.eps_opt:
            status = "converged"
            break
        if stagnated:
            status = "stagnated"
            break
        if k >= cfg.max_outer:
            status = "max_outer"
            break
        alpha = 1.0
        accepted = False
        while alpha >= 1e-20:
            y = m.exp_map(p, Tangent(p, -alpha * g.vec))
            f_y = counted.value_oracle(y)
            if f_y <= f_k - cfg.inner.armijo_c * alpha * gn * gn:
                accepted = True
                break
            alpha *= cfg.inner.backtrack_factor
        if not accepted:
            stagnated = True
            y = p
        step_len = m.distance(p, y)
        rows.append(TraceRow(
            k=k, point=p, t=math.nan, f=f_k, grad_norm=gn, theta=math.nan,
            s_norm=math.nan, step_len=step_len, inner_iters=0, f_evals=count(),
        ))
        if step_len <= STAGNATION_TOL:
            stagnated = True
        p = y
        k += 1

    rows.append(_terminal_row(len(rows), p, f_k, gn, count()))
    trace = Trace(
        rows=rows,
        status=status,
        problem_label=problem.label,
        algorithm="gradient",
        strategy={"kind": "gradient"},
        mode="inexact",
        eps_opt=cfg.eps_opt,
        seed=seed,
        f_evals_total=count(),
        meta=_base_meta(problem, cfg),
    )
    trace.validate()
    return trace
