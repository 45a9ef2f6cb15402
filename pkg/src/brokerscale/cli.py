"""Command-line front end: ``brokerscale <command> [options]``.

Every option can also come from a flat ``key=value`` file passed with
``--config``; flags given on the command line win. Keys are the option
names with dashes or underscores (``gamma_star=0.3``, ``p-m=1/12``).

Exit codes: 0 success, 1 validation or usage failure, 2 bound violation,
3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from fractions import Fraction
from pathlib import Path

from brokerscale import __version__, kernels
from brokerscale.demand_model import (
    CurveSpec,
    read_curve,
    synthesize_curve,
    validate,
    write_curve,
)
from brokerscale.errors import (
    ConfigError,
    DomainError,
    InstanceTooLarge,
    TraceFormatError,
)
from brokerscale.experiments import (
    DAY_SLOTS,
    SPIKY_PROFILE,
    SWEEP_RUN_COLUMNS,
    aggregate,
    derive_seed,
    flat_reports,
    sweep,
    verify_batch,
)
from brokerscale.fleet import BillingConfig
from brokerscale.metrics import (
    check_duality,
    emit_report,
    read_ledger,
    write_ledger,
    write_summary,
)
from brokerscale.oracle import (
    DEFAULT_BUDGET,
    check_competitiveness,
    opt_bruteforce,
    opt_dp,
    schedule_to_ledger,
    write_ratio_reports,
)
from brokerscale.scaler import ScalerConfig, run_partial_online, run_static
from brokerscale.trace import generate_spiky_trace, load_trace_csv

EXIT_OK, EXIT_INVALID, EXIT_BOUND, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage mistakes are validation failures (exit 1); 2 is kept for bound violations
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def number(text: str) -> float:
    """Float that also accepts fractions such as ``1/12``."""
    text = str(text).strip()
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        try:
            return float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _list_of(conv, what):
    def parse(text: str):
        items = [s for s in str(text).replace(" ", "").split(",") if s]
        if not items:
            raise argparse.ArgumentTypeError(f"empty {what} list")
        try:
            return [conv(s) for s in items]
        except (ValueError, argparse.ArgumentTypeError):
            raise argparse.ArgumentTypeError(f"bad {what} list: {text!r}") from None
    parse.__name__ = f"{what}_list"
    return parse


int_list = _list_of(int, "integer")
number_list = _list_of(number, "number")


def window_list(text: str):
    return None if str(text).strip().lower() == "all" else int_list(text)


def flag(text: str) -> bool:
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def read_config(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


# --- shared option groups -----------------------------------------------------

def _add_billing(p, gamma_star=True):
    p.add_argument("--tau", type=int, help="billing cycle length in slots")
    p.add_argument("--cost", type=number, default=1.0, help="VM price per billing cycle")
    if gamma_star:
        p.add_argument("--gamma-star", type=number, help="nominal price per VM per slot")


def _add_profile(p):
    p.add_argument("--T", type=int, default=DAY_SLOTS, help="slots in a synthetic trace")
    p.add_argument("--base", type=number, default=SPIKY_PROFILE["base"])
    p.add_argument("--spike-prob", type=number, default=SPIKY_PROFILE["spike_prob"])
    p.add_argument("--spike-height", type=number, default=SPIKY_PROFILE["spike_height"])
    p.add_argument("--spike-len", type=number, default=SPIKY_PROFILE["spike_len"],
                   help="mean spike duration in slots")
    p.add_argument("--noise", type=number, default=SPIKY_PROFILE["noise"])


def _profile(args) -> dict:
    return {"base": args.base, "spike_prob": args.spike_prob,
            "spike_height": args.spike_height, "spike_len": args.spike_len,
            "noise": args.noise}


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): "
                         + ", ".join("--" + n.replace("_", "-") for n in missing))


def _load_trace(args):
    if args.trace is not None:
        return load_trace_csv(args.trace)
    return generate_spiky_trace(derive_seed(args.seed, "trace"), args.T, **_profile(args))


def _curve_and_billing(args):
    _require(args, "curve", "tau")
    curve = read_curve(args.curve)
    billing = BillingConfig(tau=args.tau, gamma_star=curve.gamma_star, cost=args.cost)
    return curve, billing


def _fmt(x: float) -> str:
    return f"{x:.6g}" if math.isfinite(x) else str(x)


# --- commands -------------------------------------------------------------------

def cmd_synth(args) -> int:
    _require(args, "p_m", "p_M", "gamma_star", "tau")
    spec = CurveSpec(p_m=args.p_m, p_M=args.p_M, gamma_star=args.gamma_star, tau=args.tau,
                     cost=args.cost, gamma_max=args.gamma_max, grid_steps=args.grid_steps,
                     seed=args.seed)
    billing = BillingConfig(tau=args.tau, gamma_star=args.gamma_star, cost=args.cost)
    curve = synthesize_curve(spec)
    report = validate(curve, billing)
    if not report.ok:
        print(report, file=sys.stderr)
        return EXIT_INVALID
    write_curve(curve, args.out)
    print(f"wrote {args.out}: {len(curve.gammas)} knots, gamma_op={_fmt(curve.gamma_op)}")
    print(f"measured p_m={report.measured_p_m!r} p_M={report.measured_p_M!r}")
    return EXIT_OK


def cmd_validate(args) -> int:
    _require(args, "curve")
    curve = read_curve(args.curve)
    billing = None
    if args.tau is not None:
        billing = BillingConfig(tau=args.tau, gamma_star=curve.gamma_star, cost=args.cost)
    report = validate(curve, billing)
    print(report)
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_simulate(args) -> int:
    curve, billing = _curve_and_billing(args)
    report = validate(curve, billing)
    if not report.ok:
        print(report, file=sys.stderr)
        return EXIT_INVALID
    trace = _load_trace(args)
    ledgers = []
    if args.static:
        ledgers.append(run_static(curve, billing, trace))
    for w in args.w:
        ledgers.append(run_partial_online(curve, billing, ScalerConfig(w, billing.tau), trace))
    emit_report(ledgers, args.out, overwrite=args.overwrite)
    status = EXIT_OK
    for led in ledgers:
        dual = check_duality(led)
        status = status if dual else EXIT_INVALID
        print(f"{led.run_id}: P={_fmt(led.P)} L={_fmt(led.L)} vms={led.vms_bought} "
              f"duality={'PASS' if dual else 'FAIL'}")
    print(f"wrote {len(ledgers)} ledgers and summary.csv to {args.out}")
    return status


def cmd_oracle(args) -> int:
    curve, billing = _curve_and_billing(args)
    _require(args, "trace")
    trace = load_trace_csv(args.trace)
    opt = opt_dp(curve, billing, trace, d_max=args.d_max, budget=args.budget)
    print(f"L_opt={opt.L_opt!r} N_opt={opt.N} v={' '.join(map(str, opt.v.tolist()))}")
    status = EXIT_OK
    if args.bruteforce:
        bf = opt_bruteforce(curve, billing, trace, d_max=args.d_max, budget=args.budget)
        same = bf.L_opt == opt.L_opt
        print(f"bruteforce L_opt={bf.L_opt!r} {'MATCH' if same else 'MISMATCH'}")
        status = EXIT_OK if same else EXIT_INVALID
    if args.out:
        write_ledger(schedule_to_ledger(curve, billing, trace, opt), args.out)
        print(f"wrote {args.out}")
    return status


def _summarise_reports(reports) -> None:
    by_w: dict[int, list] = {}
    for rep in reports:
        by_w.setdefault(rep.w, []).append(rep)
    print("w  runs  max_ratio  c_alpha_min  bound_fail    vms_fail")
    for w in sorted(by_w):
        reps = by_w[w]
        finite = [r.ratio for r in reps if math.isfinite(r.ratio)]
        print(f"{w:<2} {len(reps):>5}  {_fmt(max(finite, default=0.0)):>9}  "
              f"{_fmt(min(r.c_alpha for r in reps)):>11}  "
              f"{sum(not r.passed for r in reps):>10}  {sum(not r.vms_within_opt for r in reps):>11}")


def cmd_verify(args) -> int:
    if args.curve is not None or args.trace is not None:
        curve, billing = _curve_and_billing(args)
        _require(args, "trace")
        trace = load_trace_csv(args.trace)
        opt = opt_dp(curve, billing, trace, budget=args.budget)
        ws = range(billing.tau) if args.w is None else args.w
        reports = [check_competitiveness(curve, billing, trace, w, opt=opt) for w in ws]
        mismatches = 0
    else:
        results = verify_batch(seed=args.seed, n_instances=args.instances, ws=args.w,
                               t_max=args.t_max, demand_max=args.demand_max,
                               cross_check=args.cross_check, budget=args.budget,
                               jobs=args.jobs)
        reports = flat_reports(results)
        mismatches = sum(r.bf_loss is not None and r.bf_loss != r.dp_loss for r in results)
        print(f"instances={len(results)} seed={args.seed} oracle cross-check "
              + ("off" if not args.cross_check else f"mismatches={mismatches}"))
    for rep in reports if len(reports) <= 12 else []:
        print(f"instance {rep.instance_id} w={rep.w}: L_A={rep.L_A!r} L_OPT={rep.L_OPT!r} "
              f"ratio={_fmt(rep.ratio)} c={_fmt(rep.c_alpha)} "
              f"{'PASS' if rep.passed else 'FAIL'} N_w={rep.N_w} N_OPT={rep.N_OPT}")
    _summarise_reports(reports)
    if args.out:
        write_ratio_reports(reports, args.out)
        print(f"wrote {args.out}")
    if any(not r.passed for r in reports):
        return EXIT_BOUND
    return EXIT_INVALID if mismatches else EXIT_OK


def cmd_sweep(args) -> int:
    runs = sweep(args.w, args.p_m, seed=args.seed, n_seeds=args.seeds, p_M=args.p_M,
                 gamma_star=args.gamma_star, tau=args.tau, cost=args.cost, T=args.T,
                 profile=_profile(args), grid_steps=args.grid_steps, jobs=args.jobs)
    rows = aggregate(runs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_summary([{k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()
                    if k not in ("mean_markup", "n")} for row in rows], out)
    if args.runs_out:
        with open(args.runs_out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SWEEP_RUN_COLUMNS)
            for r in runs:
                writer.writerow([repr(getattr(r, c)) if isinstance(getattr(r, c), float)
                                 else getattr(r, c) for c in SWEEP_RUN_COLUMNS])
    print("w   p_m       mean_P      mean_L      mean_vms  mean_markup")
    for row in rows:
        print(f"{row['w']:<3} {_fmt(row['p_m']):<9} {row['P']:<11.2f} {row['L']:<11.2f} "
              f"{row['vms_bought']:<9.1f} {row['mean_markup']:.6f}")
    print(f"wrote {out} ({args.seeds} seeds per configuration)")
    return EXIT_OK


def cmd_report(args) -> int:
    paths = []
    for item in args.inputs:
        p = Path(item)
        if p.is_dir():
            paths += sorted(q for q in p.glob("*.csv") if q.name != "summary.csv")
        else:
            paths.append(p)
    if not paths:
        raise UsageError("no ledger files given")
    ledgers = [read_ledger(p) for p in paths]
    emit_report(ledgers, args.out, overwrite=args.overwrite)
    status = EXIT_OK
    for led in ledgers:
        dual = check_duality(led)
        status = status if dual else EXIT_INVALID
        print(f"{led.run_id}: P={_fmt(led.P)} L={_fmt(led.L)} vms={led.vms_bought} "
              f"duality={'PASS' if dual else 'FAIL'}")
    return status


# --- parser ---------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="brokerscale", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--backend", choices=["cython", "python"],
                        help="kernel implementation (default: compiled when available)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="key=value file; command-line flags override it")
        p.set_defaults(func=func)
        subs[name] = p
        return p

    p = add("synth", cmd_synth, "synthesize a price-demand curve and write it as CSV")
    p.add_argument("--p-m", type=number, help="lower marginal-revenue bound (1/12 accepted)")
    p.add_argument("--p-M", type=number, help="upper marginal-revenue bound")
    _add_billing(p)
    p.add_argument("--gamma-max", type=number, help="upper end of the price grid (default p_M)")
    p.add_argument("--grid-steps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", default="curve.csv")

    p = add("validate", cmd_validate, "check a curve file against the demand-function properties")
    p.add_argument("curve", nargs="?")
    _add_billing(p, gamma_star=False)

    p = add("simulate", cmd_simulate, "run static and windowed scalers over a trace")
    p.add_argument("--curve")
    p.add_argument("--trace", help="t,demand CSV; omit for a synthetic spiky trace")
    _add_billing(p, gamma_star=False)
    p.add_argument("--w", type=int_list, default=[0], help="comma-separated windows, e.g. 0,4")
    p.add_argument("--static", type=flag, nargs="?", const=True, default=True,
                   help="include the static-price baseline (default true)")
    p.add_argument("--seed", type=int, default=0)
    _add_profile(p)
    p.add_argument("--out", default="runs")
    p.add_argument("--overwrite", action="store_true")

    p = add("oracle", cmd_oracle, "exact offline optimum of a small instance")
    p.add_argument("--curve")
    p.add_argument("--trace")
    _add_billing(p, gamma_star=False)
    p.add_argument("--d-max", type=int)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--bruteforce", action="store_true", help="cross-check by enumeration")
    p.add_argument("--out", help="write the optimal schedule as a ledger CSV")

    p = add("verify", cmd_verify, "empirical competitive-ratio check against the oracle")
    p.add_argument("--instances", type=int, default=500)
    p.add_argument("--w", type=window_list, default=[0], help="comma-separated windows or 'all'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-max", type=int, default=10)
    p.add_argument("--demand-max", type=int, default=3)
    p.add_argument("--cross-check", type=flag, nargs="?", const=True, default=True,
                   help="also solve each instance by brute force (default true)")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--curve", help="single-instance mode: curve file")
    p.add_argument("--trace", help="single-instance mode: trace file")
    _add_billing(p, gamma_star=False)
    p.add_argument("--out", help="RatioReport CSV path")

    p = add("sweep", cmd_sweep, "mean profit and markup over windows and p_m values")
    p.add_argument("--w", type=int_list, default=[0, 1, 2, 3, 4])
    p.add_argument("--p-m", type=number_list, default=[1 / 12])
    p.add_argument("--p-M", type=number, default=0.8)
    p.add_argument("--gamma-star", type=number, default=0.3)
    p.add_argument("--tau", type=int, default=12)
    p.add_argument("--cost", type=number, default=1.0)
    p.add_argument("--seeds", type=int, default=20, help="traces per configuration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-steps", type=int, default=200)
    _add_profile(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="sweep_summary.csv")
    p.add_argument("--runs-out", help="optional per-seed CSV with mean markup")

    p = add("report", cmd_report, "re-emit ledgers with a comparison summary")
    p.add_argument("inputs", nargs="*", help="ledger CSV files or directories")
    p.add_argument("--out", default="report")
    p.add_argument("--overwrite", action="store_true")
    return parser, subs


def _apply_config(parser, subs, args, argv):
    cfg = read_config(args.config)
    sp = subs[args.command]
    actions = {a.dest: a for a in sp._actions if a.dest not in ("help", "config", "func")}
    defaults = {}
    for key, text in cfg.items():
        if key not in actions:
            raise UsageError(f"{args.config}: unknown key {key!r} for '{args.command}'")
        act = actions[key]
        try:
            if act.nargs == "*":
                defaults[key] = [s for s in text.split(",") if s]
            elif act.type is not None:
                defaults[key] = act.type(text)
            elif act.const is not None:  # store_true
                defaults[key] = flag(text)
            else:
                defaults[key] = text
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"{args.config}: {key}: {exc}") from None
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser, subs = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    previous = kernels.backend()
    try:
        if args.config:
            args = _apply_config(parser, subs, args, argv)
        if args.backend:
            kernels.use_backend(args.backend)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, DomainError, InstanceTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BOUND
    except (TraceFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    finally:
        kernels.use_backend(previous)


if __name__ == "__main__":
    sys.exit(main())
