"""Command-line front end: ``geaoi {analytic,solve-periodic-fcfs,simulate,sweep}``.

Exit codes: 0 success, 1 usage or domain error, 2 unstable configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from typing import Sequence

import numpy as np

from .analytic import Bernoulli, GenerateAtWill, Periodic, Policy, average_aoi
from .channel import ChannelParams, make_symmetric, memory
from .errors import AoIError, InstabilityError, UnsupportedRegimeError
from .periodic_fcfs import aoi_periodic_fcfs
from .simulator import DEFAULT_ITERATIONS, DEFAULT_SLOTS, SimConfig, run_experiment, simulate_trajectory, write_trace

EXIT_USAGE = 1
EXIT_UNSTABLE = 2

SIM_COLUMNS = (
    "p", "r", "pe_good", "pe_bad", "eta", "arrival", "arrival_param",
    "policy", "sim_mean", "sim_stderr", "iters", "slots", "seed",
)
SWEEP_COLUMNS = (
    "eta", "p", "r", "pe_good", "pe_bad", "arrival", "arrival_param", "policy",
    "analytic", "sim_mean", "sim_stderr", "iters", "slots", "seed", "status",
)
ARRIVALS = ("bernoulli", "periodic", "gaw")
POLICIES = ("fcfs", "plgfs")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_fraction(text: str) -> float:
    """Parse ``0.25`` or ``1/3`` exactly, then round once to float."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number or fraction: {text!r}") from exc


def fmt(x: float) -> str:
    """Shortest decimal that round-trips to the same float."""
    return repr(float(x))


def _add_channel(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("channel")
    g.add_argument("--eta", type=parse_fraction, help="memory of a symmetric channel, p = r = (1-eta)/2")
    g.add_argument("--p", type=parse_fraction, help="G->B transition probability")
    g.add_argument("--r", type=parse_fraction, help="B->G transition probability")
    g.add_argument("--pe-good", type=parse_fraction, default=0.0)
    g.add_argument("--pe-bad", type=parse_fraction, default=1.0)


def _add_scenario(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--arrival", choices=ARRIVALS, required=True)
    g.add_argument("--lambda", dest="lam", type=parse_fraction, help="Bernoulli arrival probability")
    g.add_argument("--K", type=int, help="periodic arrival interval")
    g.add_argument("--policy", choices=POLICIES, required=True)


def _add_budget(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("simulation budget")
    g.add_argument("--slots", type=int, default=DEFAULT_SLOTS)
    g.add_argument("--iters", type=int, default=DEFAULT_ITERATIONS)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--warmup", type=int, default=0)
    g.add_argument("--workers", type=int, default=1)


def _channel(args) -> ChannelParams:
    if args.eta is not None:
        if args.p is not None or args.r is not None:
            raise UsageError("give either --eta or --p/--r, not both")
        return make_symmetric(args.eta, args.pe_good, args.pe_bad)
    if args.p is None or args.r is None:
        raise UsageError("channel needs --eta or both --p and --r")
    return ChannelParams(args.p, args.r, args.pe_good, args.pe_bad)


def _arrival(kind: str, lam: float | None, K: int | None):
    if kind == "bernoulli":
        if lam is None:
            raise UsageError("--arrival bernoulli needs --lambda")
        return Bernoulli(lam)
    if kind == "periodic":
        if K is None:
            raise UsageError("--arrival periodic needs --K")
        return Periodic(K)
    return GenerateAtWill()


def _arrival_param(arrival) -> str:
    if isinstance(arrival, Bernoulli):
        return fmt(arrival.lam)
    if isinstance(arrival, Periodic):
        return str(arrival.K)
    return ""


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _table(rows: list[dict], columns: Sequence[str], form: str, single: bool = False) -> str:
    if form == "json":
        return json.dumps(rows[0] if single else rows, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_analytic(args) -> int:
    params = _channel(args)
    arrival = _arrival(args.arrival, args.lam, args.K)
    value = average_aoi(params, arrival, Policy(args.policy))
    print(f"{value:.15g}")
    return 0


def cmd_solve_periodic(args) -> int:
    params = _channel(args)
    if args.K is None:
        raise UsageError("--K is required")
    sol = aoi_periodic_fcfs(params, args.K)
    fields = {
        "p": params.p,
        "r": params.r,
        "K": sol.K,
        "beta": sol.beta,
        "p0_good": sol.p0_good,
        "p0_bad": sol.p0_bad,
        "p1_good": sol.p1_good,
        "expected_latency": sol.expected_latency,
        "aoi": sol.aoi,
    }
    if args.format == "json":
        print(json.dumps(fields, indent=2))
    else:
        for k, v in fields.items():
            print(f"{k} = {v:.15g}" if isinstance(v, float) else f"{k} = {v}")
    return 0


def cmd_simulate(args) -> int:
    params = _channel(args)
    arrival = _arrival(args.arrival, args.lam, args.K)
    policy = Policy(args.policy)
    config = SimConfig(
        params, arrival, policy,
        slots_per_run=args.slots, iterations=args.iters, base_seed=args.seed,
        warmup_slots=args.warmup, workers=args.workers,
    )
    res = run_experiment(config)
    row = {
        "p": fmt(params.p), "r": fmt(params.r),
        "pe_good": fmt(params.pe_good), "pe_bad": fmt(params.pe_bad),
        "eta": fmt(memory(params)), "arrival": args.arrival,
        "arrival_param": _arrival_param(arrival), "policy": policy.value,
        "sim_mean": fmt(res.mean_aoi), "sim_stderr": fmt(res.stderr_aoi),
        "iters": args.iters, "slots": args.slots, "seed": args.seed,
    }
    _emit(_table([row], SIM_COLUMNS, args.format, single=True), args.out)
    if args.trace:
        trace = simulate_trajectory(params, arrival, policy, args.slots, args.seed)
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            write_trace(trace, fh)
    return 0


def eta_grid(lo: float, hi: float, step: float) -> list[float]:
    if step <= 0 or lo > hi or lo < 0 or hi >= 1:
        return []
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(n)]


def _split(text: str, allowed: Sequence[str], what: str) -> list[str]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in items if s not in allowed]
    if bad or not items:
        raise UsageError(f"bad {what} list {text!r}; choose from {','.join(allowed)}")
    return items


def sweep_rows(
    etas: Sequence[float],
    arrivals: Sequence[str],
    policies: Sequence[str],
    lam: float,
    K: int,
    pe_good: float,
    pe_bad: float,
    slots: int,
    iters: int,
    seed: int,
    warmup: int = 0,
    workers: int = 1,
) -> list[dict]:
    """One row per (arrival, policy, eta); every row reuses ``seed``."""
    rows = []
    for kind in arrivals:
        arrival = _arrival(kind, lam, K)
        for pol in policies:
            policy = Policy(pol)
            for eta in etas:
                params = make_symmetric(eta, pe_good, pe_bad)
                status, analytic = "ok", ""
                try:
                    analytic = fmt(average_aoi(params, arrival, policy))
                except InstabilityError:
                    status = "unstable"
                except UnsupportedRegimeError:
                    status = "unsupported"
                res = run_experiment(
                    SimConfig(params, arrival, policy, slots_per_run=slots, iterations=iters,
                              base_seed=seed, warmup_slots=warmup, workers=workers)
                )
                rows.append({
                    "eta": fmt(eta), "p": fmt(params.p), "r": fmt(params.r),
                    "pe_good": fmt(pe_good), "pe_bad": fmt(pe_bad),
                    "arrival": kind, "arrival_param": _arrival_param(arrival), "policy": pol,
                    "analytic": analytic, "sim_mean": fmt(res.mean_aoi), "sim_stderr": fmt(res.stderr_aoi),
                    "iters": iters, "slots": slots, "seed": seed, "status": status,
                })
    return rows


def cmd_sweep(args) -> int:
    etas = eta_grid(args.eta_min, args.eta_max, args.eta_step)
    if not etas:
        raise UsageError("empty eta grid: need 0 <= eta-min <= eta-max < 1 and eta-step > 0")
    arrivals = _split(args.arrivals, ARRIVALS, "arrival")
    policies = _split(args.policies, POLICIES, "policy")
    rows = sweep_rows(
        etas, arrivals, policies, args.lam, args.K, args.pe_good, args.pe_bad,
        args.slots, args.iters, args.seed, args.warmup, args.workers,
    )
    _emit(_table(rows, SWEEP_COLUMNS, args.format), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="geaoi", description="Average AoI over Gilbert-Elliott erasure channels.")
    parser.add_argument("--config", help="key = value file mirroring long flags; command-line flags win")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analytic", help="evaluate a closed form or the periodic FCFS solver")
    _add_channel(p)
    _add_scenario(p)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("solve-periodic-fcfs", help="run the periodic FCFS solver and print its state")
    _add_channel(p)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_solve_periodic)

    p = sub.add_parser("simulate", help="Monte Carlo estimate of the average AoI")
    _add_channel(p)
    _add_scenario(p)
    _add_budget(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.add_argument("--trace", help="also dump the slot-by-slot trace of iteration 0 to this file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="sweep channel memory on symmetric channels")
    p.add_argument("--eta-min", type=parse_fraction, default=0.0)
    p.add_argument("--eta-max", type=parse_fraction, default=0.9)
    p.add_argument("--eta-step", type=parse_fraction, default=0.1)
    p.add_argument("--lambda", dest="lam", type=parse_fraction, default=1 / 3)
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--arrivals", default=",".join(ARRIVALS))
    p.add_argument("--policies", default=",".join(POLICIES))
    p.add_argument("--pe-good", type=parse_fraction, default=0.0)
    p.add_argument("--pe-bad", type=parse_fraction, default=1.0)
    _add_budget(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def read_config(path: str) -> list[str]:
    """Turn ``key = value`` lines into ``--key value`` arguments."""
    argv: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            argv += ["--" + key.replace("_", "-"), value]
    return argv


def _with_config(argv: list[str]) -> list[str]:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return argv
    # config flags go right after the subcommand so later explicit flags override them
    cmd_pos = next((i for i, a in enumerate(rest) if not a.startswith("-")), len(rest))
    return rest[: cmd_pos + 1] + read_config(known.config) + rest[cmd_pos + 1 :]


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_with_config(argv))
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"geaoi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InstabilityError as exc:
        print(f"geaoi: unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (AoIError, OSError) as exc:
        print(f"geaoi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
