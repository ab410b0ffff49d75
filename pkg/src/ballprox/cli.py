"""Batch benchmark runner and report emitters.

A plan is a JSON document listing problem dimensions, solver/parameter
combinations, and seeds.  ``run_plan`` executes every cell on the seeded
quadratic family, persists one trace (CSV + JSON) and one theory report per
cell, and collects summary rows.  ``emit_table`` renders the rows grouped by
dimension with the smallest function-evaluation count and time per group
marked.  ``emit_trajectory`` dumps a 2-D run, outer and inner iterates, for
external plotting.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from . import __version__, diagnostics
from .objective import make_quadratic
from .outer_solver import (
    RadiusStrategy,
    SolverConfig,
    Trace,
    run_gradient,
    run_proximal,
    run_rbppm,
)

ALGORITHMS = ("broximal-f", "broximal-a", "broximal-p", "proximal", "gradient")

ROWS_CSV_SCHEMA = "ballprox-bench-rows-csv-v1"
ROWS_CSV_COLUMNS = [
    "n", "algorithm", "parameter", "seed", "status", "outer_iters",
    "inner_iters_total", "f_evals", "wall_time_seconds", "final_f",
    "final_grad_norm", "theory_status",
]
TRAJ_CSV_SCHEMA = "ballprox-trajectory-csv-v1"

# Parameter grid mirroring the benchmark protocol: fixed radii, gradient-
# scaled radii, objective-gap-scaled radii, proximal penalties, plus plain
# gradient descent.
DEFAULT_SOLVER_GRID = (
    [("broximal-f", t) for t in (0.05, 0.10, 0.50)]
    + [("broximal-a", a) for a in (1e-4, 1e-3, 1e-2)]
    + [("broximal-p", b) for b in (1e-3, 1e-2, 1e-1)]
    + [("proximal", lam) for lam in (1e-3, 1e-1, 2.0)]
    + [("gradient", None)]
)


@dataclass
class BenchPlan:
    dims: List[int]
    solvers: List[tuple]  # (algorithm id, parameter or None)
    seeds: List[int]
    eps_opt: float = 1e-6
    output_dir: str = "bench_out"
    oracle_mode: str = "inexact"
    eig_lo: float = 1.0
    eig_hi: float = 1000.0
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.dims or not self.solvers or not self.seeds:
            raise ValueError("plan needs nonempty dims, solvers, and seeds")
        if any(d < 1 for d in self.dims):
            raise ValueError("dimensions must be positive")
        for alg, _param in self.solvers:
            if alg not in ALGORITHMS:
                raise ValueError(f"unknown algorithm id: {alg!r}")
        if self.oracle_mode not in ("exact", "inexact"):
            raise ValueError("oracle_mode must be 'exact' or 'inexact'")
        if self.eps_opt <= 0.0:
            raise ValueError("eps_opt must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def as_dict(self) -> dict:
        return {
            "schema": "ballprox-plan-v1",
            "dims": list(self.dims),
            "solvers": [{"algorithm": a, "parameter": p} for a, p in self.solvers],
            "seeds": list(self.seeds),
            "eps_opt": self.eps_opt,
            "output_dir": self.output_dir,
            "oracle_mode": self.oracle_mode,
            "eig_lo": self.eig_lo,
            "eig_hi": self.eig_hi,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchPlan":
        return cls(
            dims=[int(x) for x in d["dims"]],
            solvers=[(s["algorithm"], s.get("parameter")) for s in d["solvers"]],
            seeds=[int(x) for x in d["seeds"]],
            eps_opt=float(d.get("eps_opt", 1e-6)),
            output_dir=str(d.get("output_dir", "bench_out")),
            oracle_mode=str(d.get("oracle_mode", "inexact")),
            eig_lo=float(d.get("eig_lo", 1.0)),
            eig_hi=float(d.get("eig_hi", 1000.0)),
            workers=int(d.get("workers", 1)),
        )

    @classmethod
    def from_json_file(cls, path) -> "BenchPlan":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_plan(output_dir: str = "bench_out") -> BenchPlan:
    """The full benchmark grid: dimensions 100..1000, 13 solver combos."""
    return BenchPlan(
        dims=list(range(100, 1001, 100)),
        solvers=list(DEFAULT_SOLVER_GRID),
        seeds=[1],
        output_dir=output_dir,
    )


def plan_cells(plan: BenchPlan) -> List[dict]:
    """Expand a plan into per-run cell descriptors, in deterministic order."""
    cells = []
    for dim in plan.dims:
        for alg, param in plan.solvers:
            for seed in plan.seeds:
                cells.append({
                    "dim": dim,
                    "algorithm": alg,
                    "parameter": param,
                    "seed": seed,
                    "eps_opt": plan.eps_opt,
                    "eig_lo": plan.eig_lo,
                    "eig_hi": plan.eig_hi,
                    "oracle_mode": plan.oracle_mode,
                    "output_dir": plan.output_dir,
                })
    return cells


@dataclass
class BenchRow:
    n: int
    algorithm: str
    parameter: Optional[float]
    seed: int
    status: str
    outer_iters: int
    inner_iters_total: int
    f_evals: int
    wall_time_seconds: float
    final_f: float
    final_grad_norm: float
    theory_status: str

    def as_csv_row(self) -> list:
        return [
            self.n, self.algorithm,
            "" if self.parameter is None else repr(self.parameter),
            self.seed, self.status, self.outer_iters, self.inner_iters_total,
            self.f_evals, repr(self.wall_time_seconds), repr(self.final_f),
            repr(self.final_grad_norm), self.theory_status,
        ]


def _param_tag(param: Optional[float]) -> str:
    if param is None:
        return "na"
    return f"{param:g}".replace(".", "p").replace("-", "m")


def cell_id(cell: dict) -> str:
    return (
        f"n{cell['dim']}_{cell['algorithm']}_{_param_tag(cell['parameter'])}"
        f"_s{cell['seed']}"
    )


def run_cell(cell: dict) -> BenchRow:
    """Execute one (dimension, solver, seed) cell and persist its artifacts."""
    dim, alg, param, seed = (
        cell["dim"], cell["algorithm"], cell["parameter"], cell["seed"],
    )
    eps = cell["eps_opt"]
    problem = make_quadratic(dim, cell["eig_lo"], cell["eig_hi"], seed)
    exact = cell["oracle_mode"] == "exact" and alg.startswith("broximal")
    cfg = SolverConfig(eps_opt=eps, use_exact_oracle=exact)
    t_min = eps ** (1.0 / 3.0)

    start = time.perf_counter()
    try:
        if alg == "broximal-f":
            trace = run_rbppm(problem, RadiusStrategy.fixed(param), cfg, seed=seed)
        elif alg == "broximal-a":
            trace = run_rbppm(
                problem, RadiusStrategy.adaptive_grad(param, t_min=t_min), cfg, seed=seed
            )
        elif alg == "broximal-p":
            trace = run_rbppm(
                problem, RadiusStrategy.polyak(param, t_min=t_min), cfg, seed=seed
            )
        elif alg == "proximal":
            trace = run_proximal(problem, param, cfg, seed=seed)
        elif alg == "gradient":
            trace = run_gradient(problem, cfg, seed=seed)
        else:
            raise ValueError(f"unknown algorithm id: {alg!r}")
    except Exception as exc:  # one bad cell must not sink the plan
        return BenchRow(
            n=dim, algorithm=alg, parameter=param, seed=seed,
            status=f"error: {exc}", outer_iters=0, inner_iters_total=0,
            f_evals=0, wall_time_seconds=time.perf_counter() - start,
            final_f=math.nan, final_grad_norm=math.nan, theory_status="n/a",
        )
    elapsed = time.perf_counter() - start

    report = diagnostics.evaluate(trace, problem, trace.mode)
    theory = "pass" if report.all_pass() else "fail:" + "+".join(report.failed_names())

    out = Path(cell["output_dir"])
    cid = cell_id(cell)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    (out / "traces" / f"{cid}.csv").write_text(trace.to_csv(), encoding="utf-8")
    (out / "traces" / f"{cid}.json").write_text(trace.to_json(), encoding="utf-8")
    (out / "reports" / f"{cid}.json").write_text(report.to_json(), encoding="utf-8")

    return BenchRow(
        n=dim, algorithm=alg, parameter=param, seed=seed,
        status=trace.status, outer_iters=trace.outer_iters,
        inner_iters_total=trace.inner_iters_total, f_evals=trace.f_evals_total,
        wall_time_seconds=elapsed, final_f=trace.final_f,
        final_grad_norm=trace.final_grad_norm, theory_status=theory,
    )


def rows_to_csv(rows: List[BenchRow]) -> str:
    out = io.StringIO()
    out.write(f"# {ROWS_CSV_SCHEMA}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ROWS_CSV_COLUMNS)
    for r in rows:
        writer.writerow(r.as_csv_row())
    return out.getvalue()


def rows_from_csv(text: str) -> List[BenchRow]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    rows = []
    for rec in reader:
        rows.append(BenchRow(
            n=int(rec["n"]),
            algorithm=rec["algorithm"],
            parameter=float(rec["parameter"]) if rec["parameter"] else None,
            seed=int(rec["seed"]),
            status=rec["status"],
            outer_iters=int(rec["outer_iters"]),
            inner_iters_total=int(rec["inner_iters_total"]),
            f_evals=int(rec["f_evals"]),
            wall_time_seconds=float(rec["wall_time_seconds"]),
            final_f=float(rec["final_f"]),
            final_grad_norm=float(rec["final_grad_norm"]),
            theory_status=rec["theory_status"],
        ))
    return rows


def run_plan(plan: BenchPlan, verbose: bool = False) -> List[BenchRow]:
    """Run every cell of the plan; artifacts land under ``plan.output_dir``.

    The output directory is probed for writability before any run starts.
    Failures of individual cells are recorded in their rows and do not stop
    the plan.  Cells may execute in parallel; rows come back in plan order.
    """
    out = Path(plan.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_probe"
    probe.write_text("ok", encoding="utf-8")
    probe.unlink()

    cells = plan_cells(plan)
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = []
        for cell in cells:
            row = run_cell(cell)
            rows.append(row)
            if verbose:
                print(
                    f"  {cell_id(cell):<32} {row.status:<10} outer={row.outer_iters}"
                    f" #f={row.f_evals} t={row.wall_time_seconds:.2f}s",
                    flush=True,
                )

    (out / "results.csv").write_text(rows_to_csv(rows), encoding="utf-8")
    meta = plan.as_dict()
    meta["version"] = __version__
    (out / "plan_resolved.json").write_text(json.dumps(meta, indent=1), encoding="utf-8")
    return rows


def emit_table(rows: List[BenchRow]) -> str:
    """Fixed-width summary grouped by dimension.

    The smallest function-evaluation count and the smallest wall time inside
    each group are marked with ``*``; ties are all marked.
    """
    if not rows:
        raise ValueError("no rows to tabulate")
    header = (
        f"{'n':>5}  {'algorithm':<11} {'param':>8}  {'outer(inner)':>16}"
        f"  {'#f':>10}  {'time[s]':>9}  theory"
    )
    lines = [header, "-" * len(header)]
    for n in sorted({r.n for r in rows}):
        group = [r for r in rows if r.n == n]
        ok = [r for r in group if not r.status.startswith("error")]
        best_f = min((r.f_evals for r in ok), default=None)
        best_t = min((r.wall_time_seconds for r in ok), default=None)
        for r in group:
            param = "--" if r.parameter is None else f"{r.parameter:g}"
            oi = f"{r.outer_iters}({r.inner_iters_total})"
            fmark = "*" if best_f is not None and r.f_evals == best_f else " "
            tmark = "*" if best_t is not None and r.wall_time_seconds == best_t else " "
            lines.append(
                f"{r.n:>5}  {r.algorithm:<11} {param:>8}  {oi:>16}"
                f"  {r.f_evals:>9}{fmark}  {r.wall_time_seconds:>8.2f}{tmark}"
                f"  {r.theory_status}"
            )
        lines.append("-" * len(header))
    return "\n".join(lines)


def emit_trajectory(trace: Trace, inner_points: Optional[list] = None) -> str:
    """CSV of a 2-D Euclidean run: outer iterates plus inner-solver iterates.

    ``inner_points`` entries are (point, value) pairs; when omitted the
    trace's own recorded inner points are used.
    """
    manifold = trace.meta.get("manifold", {})
    if manifold.get("kind") != "euclidean" or manifold.get("dim") != 2:
        raise ValueError("trajectory output requires a 2-D Euclidean trace")
    if inner_points is None:
        inner_points = trace.inner_points or []
    out = io.StringIO()
    out.write(f"# {TRAJ_CSV_SCHEMA}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["phase", "k", "x1", "x2", "f"])
    for r in trace.rows:
        writer.writerow(["outer", r.k, repr(r.point.coords[0]),
                         repr(r.point.coords[1]), repr(r.f)])
    for i, (p, f) in enumerate(inner_points):
        writer.writerow(["inner", i, repr(p.coords[0]), repr(p.coords[1]), repr(f)])
    return out.getvalue()


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ballprox",
        description="Benchmark runner for ball-proximal optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="write the default benchmark plan")
    p_plan.add_argument("--out", default="plan.json")
    p_plan.add_argument("--dims", type=int, nargs="*", default=None)
    p_plan.add_argument("--seeds", type=int, nargs="*", default=None)
    p_plan.add_argument("--eps-opt", type=float, default=1e-6)
    p_plan.add_argument("--oracle-mode", choices=["exact", "inexact"],
                        default="inexact")
    p_plan.add_argument("--output-dir", default="bench_out")

    p_run = sub.add_parser("run", help="execute a benchmark plan")
    p_run.add_argument("--plan", required=True)
    p_run.add_argument("--workers", type=int, default=None)

    p_table = sub.add_parser("table", help="render the summary table")
    p_table.add_argument("--in", dest="indir", required=True)

    p_traj = sub.add_parser("traj", help="dump a 2-D trajectory CSV")
    p_traj.add_argument("--trace", required=True)
    p_traj.add_argument("--out", default=None)

    args = parser.parse_args(argv)

    if args.command == "plan":
        plan = default_plan(output_dir=args.output_dir)
        if args.dims:
            plan.dims = args.dims
        if args.seeds:
            plan.seeds = args.seeds
        plan.eps_opt = args.eps_opt
        plan.oracle_mode = args.oracle_mode
        Path(args.out).write_text(
            json.dumps(plan.as_dict(), indent=1), encoding="utf-8"
        )
        print(f"wrote plan with {len(plan_cells(plan))} cells to {args.out}")
        return 0

    if args.command == "run":
        plan = BenchPlan.from_json_file(args.plan)
        if args.workers is not None:
            plan.workers = args.workers
        rows = run_plan(plan, verbose=True)
        print(emit_table(rows))
        print(f"artifacts in {plan.output_dir}")
        return 0

    if args.command == "table":
        path = Path(args.indir) / "results.csv"
        rows = rows_from_csv(path.read_text(encoding="utf-8"))
        print(emit_table(rows))
        return 0

    if args.command == "traj":
        trace = Trace.from_json(Path(args.trace).read_text(encoding="utf-8"))
        text = emit_trajectory(trace)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
            print(f"wrote {args.out}")
        else:
            sys.stdout.write(text)
        return 0

    return 1


if __name__ == "__main__":
    raise SystemExit(main())
