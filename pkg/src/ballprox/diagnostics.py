"""Post-hoc verification of per-iteration and aggregate solver guarantees.

``evaluate`` consumes a trace plus problem metadata and grades every known
inequality for the ball-proximal method: monotonicity of values, multipliers
and subgradient norms, the squared-distance drop, the step-length identity,
the subgradient budget, geometric decay, the 1/K value bound, the finite
termination cap, and eventual value convergence.  Checks whose prerequisites
are missing (no known optimum, wrong algorithm, varying radii) are reported
as not-applicable rather than skipped.

Exact-mode slack budgets are fixed constants at double-precision scale; in
inexact mode the slacks are scaled from the recorded inner tolerances, since
subproblem solutions are only accurate to those tolerances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional

from .objective import ProblemInstance
from .outer_solver import Trace

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not-applicable"

CHECK_NAMES = [
    "value_monotonicity",
    "distance_drop",
    "step_length_identity",
    "multiplier_monotonicity",
    "s_norm_monotonicity",
    "subgradient_budget",
    "geometric_decay",
    "o1k_bound",
    "finite_termination",
    "dichotomy_value",
]


@dataclass
class CheckResult:
    name: str
    status: str
    worst_violation: float = -math.inf
    iteration_of_worst: int = 0
    detail: str = ""


@dataclass
class TheoryReport:
    checks: List[CheckResult]
    trace_id: str
    mode: str

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def all_pass(self) -> bool:
        return all(c.status != FAIL for c in self.checks)

    def failed_names(self) -> List[str]:
        return [c.name for c in self.checks if c.status == FAIL]

    def as_dict(self) -> dict:
        def num(x):
            return x if isinstance(x, (int, str)) or math.isfinite(x) else None

        return {
            "schema": "ballprox-report-v1",
            "trace_id": self.trace_id,
            "mode": self.mode,
            "checks": [
                {
                    "name": c.name,
                    "status": c.status,
                    "worst_violation": num(c.worst_violation),
                    "iteration_of_worst": c.iteration_of_worst,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1)

    def render_table(self) -> str:
        lines = [f"theory checks for {self.trace_id} [{self.mode}]"]
        for c in self.checks:
            worst = (
                f"{c.worst_violation: .3e}" if math.isfinite(c.worst_violation) else "    --"
            )
            lines.append(
                f"  {c.name:<26} {c.status:<15} worst {worst}  at k={c.iteration_of_worst}"
            )
        return "\n".join(lines)


@dataclass
class _Ctx:
    """Everything the individual checks need, precomputed once."""

    trace: Trace
    problem: ProblemInstance
    mode: str
    is_brox: bool = False
    fixed_t: Optional[float] = None
    f_star: Optional[float] = None
    d_star: Optional[List[float]] = None  # d(p_k, p*) per row
    d0: Optional[float] = None
    boundary_prefix: int = 0  # number of leading all-boundary steps
    tol_max: float = 0.0
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def rows(self):
        return self.trace.rows

    @property
    def steps(self):
        return self.trace.rows[:-1]

    def row_tol(self, k: int) -> float:
        t = self.steps[k].inner_tol
        return t if math.isfinite(t) else self.tol_max

    def add(self, name, violations, detail=""):
        """Grade a list of (violation, iteration) pairs; empty list passes."""
        if not violations:
            self.checks.append(CheckResult(name, PASS, -math.inf, 0, detail))
            return
        worst, k = max(violations, key=lambda vk: vk[0])
        status = FAIL if worst > 0.0 else PASS
        self.checks.append(CheckResult(name, status, worst, k, detail))

    def skip(self, name, why):
        self.checks.append(CheckResult(name, NOT_APPLICABLE, detail=why))


def chain_multiplier_check(trace: Trace) -> List[float]:
    """Per-step slacks ``theta_k t_k - theta_{k+1} t_{k+1}`` over consecutive
    boundary-step pairs; nonnegative when the scaled multipliers decrease."""
    steps = trace.rows[:-1]
    slacks = []
    for a, b in zip(steps, steps[1:]):
        if a.active and b.active:
            slacks.append(a.theta * a.t - b.theta * b.t)
    return slacks


def _check_value_monotonicity(ctx: _Ctx) -> None:
    rows = ctx.rows
    tol = 1e-12 * (1.0 + abs(rows[0].f))
    viol = [(rows[k + 1].f - rows[k].f - tol, k) for k in range(len(rows) - 1)]
    ctx.add("value_monotonicity", viol)


def _check_distance_drop(ctx: _Ctx) -> None:
    if not ctx.is_brox:
        return ctx.skip("distance_drop", "ball-method check")
    if ctx.d_star is None:
        return ctx.skip("distance_drop", "minimizer unknown")
    viol = []
    for k, s in enumerate(ctx.steps):
        if not s.active:
            continue
        slack = 1e-9 if ctx.mode == "exact" else 10.0 * ctx.row_tol(k) * (
            1.0 + 2.0 * ctx.d_star[k]
        )
        lhs = ctx.d_star[k + 1] ** 2
        rhs = ctx.d_star[k] ** 2 - s.t ** 2
        viol.append((lhs - rhs - slack, k))
    ctx.add("distance_drop", viol)


def _check_step_length(ctx: _Ctx) -> None:
    if not ctx.is_brox:
        return ctx.skip("step_length_identity", "ball-method check")
    viol = []
    for k, s in enumerate(ctx.steps):
        if not s.active:
            continue
        slack = 1e-8 if ctx.mode == "exact" else 10.0 * ctx.row_tol(k)
        viol.append((abs(s.step_len - s.t) - slack, k))
    ctx.add("step_length_identity", viol)


def _pair_slack(ctx: _Ctx, k: int, scale: float) -> float:
    if ctx.mode == "exact":
        return 1e-8
    return 10.0 * max(ctx.row_tol(k), ctx.row_tol(k + 1)) * (1.0 + scale)


def _check_multiplier_monotonicity(ctx: _Ctx) -> None:
    if not ctx.is_brox:
        return ctx.skip("multiplier_monotonicity", "ball-method check")
    steps = ctx.steps
    viol = []
    for k in range(len(steps) - 1):
        a, b = steps[k], steps[k + 1]
        slack = _pair_slack(ctx, k, max(a.theta * a.t, b.theta * b.t))
        viol.append((b.theta * b.t - a.theta * a.t - slack, k))
    ctx.add("multiplier_monotonicity", viol)


def _check_s_norm_monotonicity(ctx: _Ctx) -> None:
    if not ctx.is_brox:
        return ctx.skip("s_norm_monotonicity", "ball-method check")
    steps = ctx.steps
    viol = []
    for k in range(len(steps) - 1):
        a, b = steps[k], steps[k + 1]
        slack = _pair_slack(ctx, k, max(a.s_norm, b.s_norm))
        viol.append((b.s_norm - a.s_norm - slack, k))
    ctx.add("s_norm_monotonicity", viol)


def _check_subgradient_budget(ctx: _Ctx) -> None:
    if not ctx.is_brox:
        return ctx.skip("subgradient_budget", "ball-method check")
    if ctx.f_star is None:
        return ctx.skip("subgradient_budget", "optimal value unknown")
    gap0 = ctx.rows[0].f - ctx.f_star
    viol = []
    running = 0.0
    for k, s in enumerate(ctx.steps):
        slack = (
            1e-8
            if ctx.mode == "exact"
            else 10.0 * ctx.row_tol(k) * (1.0 + gap0)
        )
        running += s.t * s.s_norm
        viol.append((running - gap0 - slack, k))
        if ctx.fixed_t is not None:
            bound = gap0 / (ctx.fixed_t * (k + 1))
            viol.append((s.s_norm - bound - slack, k))
    ctx.add("subgradient_budget", viol)


def _check_geometric_decay(ctx: _Ctx) -> None:
    if not ctx.is_brox:
        return ctx.skip("geometric_decay", "ball-method check")
    if ctx.f_star is None or ctx.d0 is None:
        return ctx.skip("geometric_decay", "optimum metadata unknown")
    gap0 = ctx.rows[0].f - ctx.f_star
    product = 1.0
    viol = []
    for k in range(ctx.boundary_prefix):
        s = ctx.steps[k]
        product *= ctx.d0 / (ctx.d0 + s.t)
        slack = (
            1e-9
            if ctx.mode == "exact"
            else 10.0 * ctx.row_tol(k) * (1.0 + gap0)
        )
        gap = ctx.rows[k + 1].f - ctx.f_star
        viol.append((gap - product * gap0 - slack, k + 1))
    ctx.add("geometric_decay", viol)


def _check_o1k_bound(ctx: _Ctx) -> None:
    if not ctx.is_brox:
        return ctx.skip("o1k_bound", "ball-method check")
    if ctx.f_star is None or ctx.d0 is None:
        return ctx.skip("o1k_bound", "optimum metadata unknown")
    if ctx.fixed_t is None:
        return ctx.skip("o1k_bound", "constant-radius check")
    t = ctx.fixed_t
    d0 = ctx.d0
    if d0 == 0.0:
        return ctx.add("o1k_bound", [])
    const = min(d0 / t, d0 ** 3 / ((2.0 * d0 + t) * t * t))
    gap0 = ctx.rows[0].f - ctx.f_star
    viol = []
    for k in range(ctx.boundary_prefix):
        slack = (
            1e-9
            if ctx.mode == "exact"
            else 10.0 * ctx.row_tol(k) * (1.0 + gap0)
        )
        gap = ctx.rows[k + 1].f - ctx.f_star
        viol.append((gap - const * gap0 / (k + 1) - slack, k + 1))
    ctx.add("o1k_bound", viol)


def _check_finite_termination(ctx: _Ctx) -> None:
    if not ctx.is_brox:
        return ctx.skip("finite_termination", "ball-method check")
    if ctx.mode != "exact":
        return ctx.skip("finite_termination", "exact-oracle check")
    if ctx.fixed_t is None:
        return ctx.skip("finite_termination", "constant-radius check")
    if ctx.d0 is None:
        return ctx.skip("finite_termination", "minimizer unknown")
    cap = math.ceil(ctx.d0 ** 2 / ctx.fixed_t ** 2)
    steps = ctx.trace.outer_iters
    if ctx.trace.status != "converged":
        ctx.add(
            "finite_termination",
            [(float(steps), steps)],
            detail="run did not converge",
        )
        return
    ctx.add("finite_termination", [(float(steps - cap), steps)],
            detail=f"observed {steps} <= cap {cap}")


def _check_dichotomy_value(ctx: _Ctx) -> None:
    if not ctx.is_brox:
        return ctx.skip("dichotomy_value", "ball-method check")
    if ctx.f_star is None:
        return ctx.skip("dichotomy_value", "optimal value unknown")
    best = min(r.f - ctx.f_star for r in ctx.rows)
    k_best = min(range(len(ctx.rows)), key=lambda i: ctx.rows[i].f)
    ctx.add("dichotomy_value", [(best - 1e-4, k_best)],
            detail="objective gap reaches 1e-4")


def evaluate(trace: Trace, problem: ProblemInstance, mode: str) -> TheoryReport:
    """Grade every known convergence inequality against a finished trace."""
    if mode not in ("exact", "inexact"):
        raise ValueError("mode must be 'exact' or 'inexact'")
    if not trace.rows:
        raise ValueError("malformed trace: no rows")
    for i, r in enumerate(trace.rows):
        if r.k != i:
            raise ValueError("malformed trace: nonconsecutive iteration indices")

    ctx = _Ctx(trace=trace, problem=problem, mode=mode)
    ctx.is_brox = trace.algorithm == "broximal"
    if ctx.is_brox and trace.strategy.get("kind") == "fixed":
        ctx.fixed_t = float(trace.strategy["t"])
    ctx.f_star = problem.f_star
    if problem.p_star is not None:
        m = problem.manifold
        ctx.d_star = [m.distance(r.point, problem.p_star) for r in trace.rows]
        ctx.d0 = ctx.d_star[0]
    prefix = 0
    for s in ctx.steps:
        if not s.active:
            break
        prefix += 1
    ctx.boundary_prefix = prefix
    ctx.tol_max = math.sqrt(trace.eps_opt)

    _check_value_monotonicity(ctx)
    _check_distance_drop(ctx)
    _check_step_length(ctx)
    _check_multiplier_monotonicity(ctx)
    _check_s_norm_monotonicity(ctx)
    _check_subgradient_budget(ctx)
    _check_geometric_decay(ctx)
    _check_o1k_bound(ctx)
    _check_finite_termination(ctx)
    _check_dichotomy_value(ctx)

    return TheoryReport(checks=ctx.checks, trace_id=trace.trace_id(), mode=mode)
