"""Command-line front end.

Exit codes: 0 success, 1 configuration violation or unusable input,
2 numerical blowup during a run, 3 ``verify`` found a differing report.
Diagnostics go to stderr, one ``CODE: message`` line each.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .analysis import compare_him_zim, neuron_sweep
from .dos import DosParams, generate_schedule, validate_schedule
from .engine import config_from_dict, config_violations, prepare, resolve_config_path, run_scenario
from .errors import ConfigError, InfeasibleSchedule, NumericalBlowup, Violation
from .report import report_json, reproduce_report, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_MISMATCH = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario JSON (bundled names such as nominal.json work too)")
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--mechanism", choices=("hold", "zero"), help="attack-time input policy")
    common.add_argument("--svg", action="store_true", help="also render SVG figures")
    common.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")

    p = argparse.ArgumentParser(prog="nvsc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("run", parents=[common], help="simulate a scenario and write trace.csv and report.json")
    sub.add_parser("verify", parents=[common], help="recompute report.json from a written trace.csv")
    sw = sub.add_parser("sweep-neurons", parents=[common], help="final errors for several neuron counts")
    sw.add_argument("--counts", default="5,10,15,20,25", help="comma-separated neuron counts")
    sub.add_parser("compare-him-zim", parents=[common], help="paired runs under both attack-time policies")
    sub.add_parser("check-config", parents=[common], help="validate a scenario without running it")
    g = sub.add_parser("gen-dos", help="generate an attack schedule as JSON")
    g.add_argument("--tau-d", type=float, required=True, help="average dwell between attack onsets [s]")
    g.add_argument("--T", type=float, required=True, help="energy denominator (at least 1)")
    g.add_argument("--horizon", type=float, required=True, help="schedule length [s]")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n0", type=int, default=1, help="onset allowance")
    g.add_argument("--tick", type=float, default=0.00025, help="packet period [s]")
    g.add_argument("--targets", default="1", help="comma-separated attacked followers")
    g.add_argument("--min-on", type=float, default=0.05)
    g.add_argument("--max-on", type=float, default=0.4)
    g.add_argument("--energy-offset", type=float, help="energy allowance in seconds (default: max-on)")
    g.add_argument("--out", help="write here instead of stdout")
    g.add_argument("--quiet", action="store_true")
    return p


def _fail(violations: list[Violation]) -> int:
    for v in violations:
        print(v, file=sys.stderr)
    return EXIT_CONFIG


def _load(args, checked: bool = True):
    """Scenario with command-line overrides; raises ConfigError on any violation when ``checked``."""
    path = resolve_config_path(args.config)
    doc = json.loads(path.read_text())
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.mechanism is not None:
        doc["input_mechanism"] = args.mechanism
    cfg = config_from_dict(doc)
    if checked:
        problems = config_violations(cfg)
        if problems:
            raise ConfigError(problems)
    return cfg


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _cmd_run(args) -> int:
    cfg = _load(args)
    prep = prepare(cfg)
    schedule = cfg.schedule()
    trace = run_scenario(cfg, prep, schedule)
    logged, report = write_outputs(args.out, cfg, trace, prep, schedule)
    if args.svg:
        from .plotting import plot_run
        plot_run(logged, prep.P, args.out)
    tr = report["tracking"]
    _say(args, f"{cfg.name}: tracking {'ok' if tr['satisfied'] else 'FAILED'}, "
               f"collision-free {report['collision']['ok']}, written to {args.out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    expected = (out / "report.json").read_text()
    again = reproduce_report(out, cfg)
    if again != expected:
        print(f"REPORT_MISMATCH: report recomputed from {out / 'trace.csv'} differs from {out / 'report.json'}",
              file=sys.stderr)
        return EXIT_MISMATCH
    _say(args, "report reproduced exactly")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    counts = [int(c) for c in args.counts.split(",") if c.strip()]
    rows = neuron_sweep(cfg, counts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["neurons", "t", "e1", "e2", "e3"])
        for r in rows:
            w.writerow([r["neurons"], repr(r["t"]), repr(r["e1"]), repr(r["e2"]), repr(r["e3"])])
    if args.svg:
        from .plotting import plot_sweep
        plot_sweep(rows, out / "sweep.svg")
    for r in rows:
        _say(args, f"{r['neurons']:>4d}  |e1| {r['e1']:.3e}  |e2| {r['e2']:.3e}  |e3| {r['e3']:.3e}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _load(args)
    result = compare_him_zim(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.json").write_text(report_json(result))
    _say(args, f"max position error: hold {result['hold_max_position_error']:.4g}, "
               f"zero {result['zero_max_position_error']:.4g}, hold not worse: {result['hold_not_worse']}")
    if "hold_max_attack_drift" in result:
        _say(args, f"max drift during attacks: hold {result['hold_max_attack_drift']:.4g}, "
                   f"zero {result['zero_max_attack_drift']:.4g}")
    return EXIT_OK


def _cmd_check(args) -> int:
    problems = config_violations(_load(args, checked=False))
    if problems:
        return _fail(problems)
    _say(args, "configuration ok")
    return EXIT_OK


def _cmd_gen_dos(args) -> int:
    targets = tuple(int(x) for x in args.targets.split(",") if x.strip())
    try:
        params = DosParams(n0=args.n0, tau_D=args.tau_d, T=args.T, min_on=args.min_on, max_on=args.max_on,
                           targets=targets, seed=args.seed, energy_offset=args.energy_offset)
        sched = generate_schedule(params, args.horizon, args.tick)
    except (ValueError, InfeasibleSchedule) as exc:
        return _fail([Violation("DOS_SCHEDULE", str(exc))])
    bad = validate_schedule(sched, probes=1000, seed=args.seed)
    if bad:
        return _fail([Violation("DOS_SCHEDULE", f"{v.bound} limit broken on [{v.tau}, {v.t})") for v in bad])
    text = json.dumps(sched.to_dict(), sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "verify": _cmd_verify, "sweep-neurons": _cmd_sweep,
            "compare-him-zim": _cmd_compare, "check-config": _cmd_check, "gen-dos": _cmd_gen_dos}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.verb](args)
    except ConfigError as exc:
        return _fail(exc.violations)
    except NumericalBlowup as exc:
        print(f"NUMERICAL_BLOWUP: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except FileNotFoundError as exc:
        return _fail([Violation("FILE_NOT_FOUND", str(exc))])
    except json.JSONDecodeError as exc:
        return _fail([Violation("BAD_JSON", str(exc))])
    except OSError as exc:
        return _fail([Violation("IO_ERROR", str(exc))])


if __name__ == "__main__":
    sys.exit(main())
