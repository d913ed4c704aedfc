"""Command-line harness: ``mprk run | convergence | stability | bench | verify``.

Exit codes: 0 success, 1 usage error, 2 solver failure, 3 verification
failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field

from . import _kernels
from .exceptions import MPRKError, NonFiniteState, UsageError
from .linalg import Precision
from .operators import Equation, make_problem
from .stability import grid_to_csv, region_scan, truncate_eps
from .stepper import IntegrationConfig, PrecisionPolicy, integrate, temporal_errors
from .tableaux import ButcherTableau, parse_method
from .timing import LABELS, Timer
from .verify import corrupted_builtins, run_checks

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3


@dataclass
class RunRecord:
    method: str
    equation: str
    n: int
    tau: float
    tol: float
    implicit_precision: str
    final_error_max: float | None
    final_error_l2: float | None
    mean_iterations: float
    wall_seconds: float
    timings: dict = field(default_factory=dict)  # label -> {"count", "seconds"}
    failed: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v: float) -> str:
    """Shortest round-trip decimal."""
    return repr(float(v))


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _window(text: str) -> tuple[float, float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("window must be a,b,c,d")
    return tuple(parts)


def _float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _add_problem_flags(p: argparse.ArgumentParser):
    p.add_argument("--eq", choices=[e.value for e in Equation], default="heat")
    p.add_argument("--method", default="4s3pB", help="4s3pA|4s3pB|4s3pC|midpointP")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--tau", type=float, default=0.025)
    p.add_argument("--tend", type=float, default=0.1)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--prec", choices=["f32", "f64"], default="f64", help="implicit-stage precision")
    p.add_argument("--threads", type=int, default=0, help="kernel threads (0 = all)")
    p.add_argument("--force", action="store_true", help="allow 4s3pA on the heat equation")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mprk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="integrate once and emit a JSON run record")
    _add_problem_flags(run)

    conv = sub.add_parser("convergence", help="temporal error sweep as CSV")
    _add_problem_flags(conv)
    conv.add_argument("--taus", type=_float_list, default=None,
                      help="comma-separated step sizes (default: --tau and three halvings)")

    stab = sub.add_parser("stability", help="stability region grid as CSV")
    stab.add_argument("--method", default="4s3pA")
    stab.add_argument("--tableau", help="JSON tableau file (overrides --method)")
    stab.add_argument("--window", type=_window, default=(-10.0, 4.0, -7.0, 7.0))
    stab.add_argument("--res", type=int, default=201)
    stab.add_argument("--truncate", choices=["f16", "f32"])
    stab.add_argument("--out")

    bench = sub.add_parser("bench", help="per-label timings as CSV")
    _add_problem_flags(bench)
    bench.add_argument("--repeat", type=int, default=1)

    ver = sub.add_parser("verify", help="run the built-in oracle checks")
    ver.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return parser


def _config(args) -> IntegrationConfig:
    try:
        tableau = parse_method(args.method)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    eq = Equation(args.eq)
    if eq is Equation.Heat and tableau.name == "4s3pA" and not args.force:
        raise UsageError("4s3pA is unstable for the heat equation at these parameters "
                         "(its stability region is bounded); pass --force to run anyway")
    if args.n < 3:
        raise UsageError("--n must be >= 3")
    _kernels.set_threads(args.threads)
    prec = Precision.F32 if args.prec == "f32" else Precision.F64
    try:
        return IntegrationConfig(tableau, args.tau, make_problem(eq, args.n), tol=args.tol,
                                 t_end=args.tend, policy=PrecisionPolicy(prec))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _timings(timer: Timer) -> dict:
    return {k: {"count": c, "seconds": s} for k, (c, s) in sorted(timer.as_dict().items())}


def _nan_to_none(v):
    return None if v is None or not math.isfinite(v) else float(v)


def cmd_run(args) -> int:
    cfg = _config(args)
    _kernels.warmup()
    try:
        res = integrate(cfg)
    except NonFiniteState as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    rec = RunRecord(
        method=cfg.method.name,
        equation=cfg.problem.equation.value,
        n=cfg.problem.n,
        tau=cfg.tau,
        tol=cfg.tol,
        implicit_precision=args.prec,
        final_error_max=_nan_to_none(res.error_max),
        final_error_l2=_nan_to_none(res.error_l2),
        mean_iterations=res.mean_iterations,
        wall_seconds=max(res.wall_seconds, 1e-9),
        timings=_timings(res.trace.timer),
        failed=res.failed,
    )
    _emit(rec.to_json() + "\n", args.out)
    if rec.failed:
        print("solver failure: at least one stage solve hit the iteration cap", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def convergence_csv(rows) -> str:
    lines = ["tau,error_max,error_l2,order_running"]
    prev = None
    for tau, emax, el2 in rows:
        order = ""
        if prev is not None and emax > 0 and prev[1] > 0:
            order = _fmt(math.log(prev[1] / emax) / math.log(prev[0] / tau))
        lines.append(f"{_fmt(tau)},{_fmt(emax)},{_fmt(el2)},{order}")
        prev = (tau, emax)
    return "\n".join(lines) + "\n"


def cmd_convergence(args) -> int:
    taus = args.taus if args.taus is not None else [args.tau / 2 ** k for k in range(4)]
    if not taus:
        raise UsageError("empty tau list")
    args.tau = max(taus)
    cfg = _config(args)
    try:
        rows = temporal_errors(cfg, taus)
    except NonFiniteState as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(convergence_csv(rows), args.out)
    return EXIT_OK


def _load_tableau(args) -> ButcherTableau:
    if args.tableau:
        try:
            with open(args.tableau) as fh:
                return ButcherTableau.from_json(fh.read())
        except (OSError, ValueError, TypeError) as exc:
            raise UsageError(f"cannot read tableau {args.tableau}: {exc}") from None
    try:
        return parse_method(args.method)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_stability(args) -> int:
    t = _load_tableau(args)
    if args.truncate:
        t = truncate_eps(t, args.truncate)
    a, b, c, d = args.window
    try:
        grid = region_scan(t, (a, b), (c, d), args.res, args.res)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(grid_to_csv(grid), args.out)
    print(f"{t.name}: {grid.count_stable()} of {grid.nx * grid.ny} cells stable", file=sys.stderr)
    return EXIT_OK


def bench_csv(timer: Timer, iterations: int) -> str:
    lines = ["label,count,total_seconds,seconds_per_call"]
    data = timer.as_dict()
    for label in LABELS:
        if label in data:
            count, secs = data[label]
            lines.append(f"{label},{count},{_fmt(secs)},{_fmt(secs / count if count else 0.0)}")
    if iterations:
        # solver time normalized by the total number of Krylov iterations
        secs = timer.seconds("solver")
        lines.append(f"solver-per-iteration,{iterations},{_fmt(secs)},{_fmt(secs / iterations)}")
    return "\n".join(lines) + "\n"


def cmd_bench(args) -> int:
    if args.repeat < 1:
        raise UsageError("--repeat must be >= 1")
    cfg = _config(args)
    _kernels.warmup()
    timer = Timer()
    iterations = 0
    failed = False
    for _ in range(args.repeat):
        try:
            res = integrate(cfg)
        except NonFiniteState as exc:
            print(f"solver failure: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        timer.merge(res.trace.timer)
        iterations += sum(res.trace.iterations)
        failed = failed or res.failed
    _emit(bench_csv(timer, iterations), args.out)
    if timer.count("tensor-l") and timer.count("tensor-m"):
        ratio = (timer.seconds("tensor-l") / timer.count("tensor-l")) / (
            timer.seconds("tensor-m") / timer.count("tensor-m"))
        print(f"tensor-l / tensor-m seconds per call: {ratio:.3f}", file=sys.stderr)
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_verify(args) -> int:
    results = run_checks(corrupted_builtins() if args.inject_fault else None)
    width = max(len(name) for name, _, _ in results)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_VERIFY


COMMANDS = {
    "run": cmd_run,
    "convergence": cmd_convergence,
    "stability": cmd_stability,
    "bench": cmd_bench,
    "verify": cmd_verify,
}


def _glue_negative_values(argv: list[str]) -> list[str]:
    """``--window -4,0,-2,2`` -> ``--window=-4,0,-2,2`` (argparse would read a flag)."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in ("--window", "--taus"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_negative_values(list(sys.argv[1:] if argv is None else argv)))
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mprk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MPRKError as exc:
        print(f"mprk: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
