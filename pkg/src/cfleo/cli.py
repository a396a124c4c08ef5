"""Command line entry point: ``run``, ``sweep`` and ``verify``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import MODES, ConfigError, SimConfig, load_config

log = logging.getLogger("cfleo")

TOLERANCE = 0.03
GA_RATIO = 0.95
GA_MIN_PASSES = 9


def _saps(text: str) -> list[int]:
    try:
        out = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("SAP counts must be positive integers")
    return out


def _trials(text: str) -> int:
    n = int(text)
    if n < 10_000:
        raise argparse.ArgumentTypeError("--trials must be >= 10000")
    return n


def _config(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    return cfg.with_overrides(mode=getattr(args, "mode", None), seed=getattr(args, "seed", None),
                              output_dir=getattr(args, "out", None))


def cmd_run(args) -> int:
    from .simrunner import export, run
    cfg = _config(args)
    metrics = run(cfg, jobs=args.jobs)
    export(metrics, cfg.output_dir)
    s = metrics.summary()
    print(f"mode={s['mode']} M={s['M']} avg_se={s['avg_se']:.4f} bps/Hz "
          f"avg_service_time={s['avg_service_time']:.2f} s handover_rate={s['handover_rate']:.5f} /s")
    print(f"results written to {cfg.output_dir}")
    return 0


def cmd_sweep(args) -> int:
    from .simrunner import sweep
    cfg = _config(args)
    res = sweep(cfg, args.saps, out_dir=cfg.output_dir, jobs=args.jobs)
    for metric in ("avg_service_time", "avg_se"):
        print(metric)
        for row in res.table(metric):
            print("  M=%-3d " % row["M"] + "  ".join(f"{m}={row[m]:.4f}" for m in MODES if m in row))
    print(f"results written to {cfg.output_dir}")
    return 0


def cmd_verify(args) -> int:
    from . import validation as v
    from .allocation import GaParams
    cfg = _config(args)
    ok = True

    def report(name, passed, detail):
        nonlocal ok
        ok &= passed
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")

    est = v.estimator_errors(args.trials, cfg.seed)
    worst = max(est.values())
    report("estimator moments", worst <= TOLERANCE, f"worst relative error {worst:.4f}")
    terms = v.rate_term_report(args.trials, cfg.seed + 1)
    w = terms.worst()
    report("rate trace terms", terms.passed(TOLERANCE),
           f"{len(terms.terms)} terms, worst {w.name} at {w.rel_error:.4f}")
    ga = GaParams(cfg.ga_population, cfg.ga_generations, cfg.ga_crossover, cfg.ga_mutation,
                  cfg.ga_elitism, cfg.ga_penalty_weight)
    res = v.ga_vs_grid(range(10), ga)
    n_ok = sum(r.ratio >= GA_RATIO for r in res)
    report("GA vs grid", n_ok >= GA_MIN_PASSES,
           f"{n_ok}/10 seeds within {GA_RATIO:.0%} of grid optimum {res[0].grid_objective:.4f}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cfleo", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one configuration and export CSV results")
    r.add_argument("--config", type=Path, help="YAML configuration file (defaults if omitted)")
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run every mode over a list of cluster sizes")
    s.add_argument("--config", type=Path)
    s.add_argument("--saps", type=_saps, default=[4, 8, 16, 24, 32], help="e.g. 4,8,16,24,32")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="Monte-Carlo moment checks and GA-vs-grid oracle")
    v.add_argument("--config", type=Path)
    v.add_argument("--trials", type=_trials, default=100_000)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
