"""
Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 failed
validation.
"""

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from . import beam, experiment, metrics, validation
from .errors import ConfigurationError, DomainError, IngestionError, NumericalError, SolverDivergenceError, StepSizeError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VALIDATION = 4


def _sort_key(r):
    v = r.normalized_thrust
    missing = v is None or not math.isfinite(v)
    return (missing, -(v if not missing else 0.0), r.pattern)


def sort_reports(reports):
    """Order by normalised thrust, largest first; ties by pattern name."""
    return sorted(reports, key=_sort_key)


def render_table(reports):
    head = ("pattern", "thrust N/m", "power W/m", "thrust/power", "norm thrust", "norm power", "norm eff")
    rows = [head]
    for r in reports:
        rows.append(
            (
                r.pattern,
                f"{r.mean_thrust:.4g}",
                f"{r.mean_power:.4g}",
                f"{r.thrust_per_power:.4g}",
                *(f"{v:.3f}" if v is not None and math.isfinite(v) else "nan" for v in (r.normalized_thrust, r.normalized_power, r.normalized_efficiency)),
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(head))]
    lines = ["  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(row, widths))) for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def cmd_run(args):
    overrides = list(args.set or [])
    if args.output_dir:
        overrides.append(f"output_dir={args.output_dir}")
    if args.workers:
        overrides.append(f"workers={args.workers}")
    cfg = experiment.load_config(args.config, overrides)
    steady, _, _ = experiment.run_experiment(cfg)
    print(render_table(sort_reports(steady)))
    print(f"outputs written to {cfg.output_dir}")
    return EXIT_OK


def cmd_compare(args):
    d = Path(args.directory)
    path = d / ("report_full.csv" if args.full else "report.csv")
    if not path.is_file():
        raise ConfigurationError(f"no report at {path}", "directory")
    reports = experiment.read_report(path)
    if not reports:
        raise ConfigurationError(f"{path} has no rows", "directory")
    ordered = sort_reports(reports)
    print(render_table(ordered))
    out = d / "comparison.csv"
    experiment.write_report(out, ordered)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_validate(args):
    names = list(validation.SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        res = validation.run_suite(name)
        ok &= res.passed
        status = "PASS" if res.passed else "FAIL"
        extra = " ".join(f"{k}={v:.4g}" for k, v in res.details.items())
        print(f"{status} {name}: measured={res.measured:.6g} threshold={res.threshold:g} ({res.seconds:.1f}s) {extra}".rstrip())
    return EXIT_OK if ok else EXIT_VALIDATION


_BEAM_KEYS = {"l", "EI_eta", "C", "E", "A1", "tip_displacement", "n_points"}


def cmd_beam_profile(args):
    values = {}
    if args.params:
        try:
            text = Path(args.params).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read params: {exc}", "params") from None
        values.update(experiment.parse_config_text(text, args.params))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not key=value", "--set")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    unknown = set(values) - _BEAM_KEYS
    if unknown:
        raise ConfigurationError("unknown beam parameter", sorted(unknown)[0])
    nums = {}
    for k, v in values.items():
        try:
            nums[k] = float(v)
        except ValueError:
            raise ConfigurationError(f"cannot parse {v!r}", k) from None
    n = int(nums.pop("n_points", args.n))
    tip = nums.pop("tip_displacement", None)
    missing = {"l", "EI_eta", "C"} - set(nums)
    if missing:
        raise ConfigurationError("required", sorted(missing)[0])
    p = beam.HcmBeamParams(**nums)
    if tip is not None:
        p = beam.normalize_tip(p, tip)
    z, phi, u = beam.beam_profile(p, n)
    lines = ["z,phi,u"] + [f"{a:.12e},{b:.12e},{c:.12e}" for a, b, c in zip(z, phi, u)]
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_plot(args):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigurationError("plotting needs matplotlib (pip install 'artifact[plot]')", "plot") from None
    import numpy as np

    d = Path(args.directory)
    series_files = sorted(d.glob("*_series.csv"))
    if not series_files:
        raise ConfigurationError(f"no series CSVs in {d}", "directory")
    fig, ax = plt.subplots(figsize=(8, 4))
    for f in series_files:
        period = float(experiment.read_series_header(f).get("period", "nan"))
        s = experiment.read_series(f, period)
        ax.plot(s.t, s.thrust, lw=0.8, label=f.name[: -len("_series.csv")])
    ax.set_xlabel("t (s)")
    ax.set_ylabel("thrust (N/m)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(d / "thrust.png", dpi=120)
    plt.close(fig)
    made = ["thrust.png"]

    report = d / "report.csv"
    if report.is_file():
        reps = sort_reports(experiment.read_report(report))
        x = np.arange(len(reps))
        fig, ax = plt.subplots(figsize=(7, 4))
        for k, (attr, lab) in enumerate(
            (("normalized_thrust", "thrust"), ("normalized_power", "power"), ("normalized_efficiency", "thrust/power"))
        ):
            ax.bar(x + (k - 1) * 0.27, [getattr(r, attr) for r in reps], 0.27, label=lab)
        ax.set_xticks(x, [r.pattern for r in reps])
        ax.set_ylabel("normalised")
        ax.legend()
        fig.tight_layout()
        fig.savefig(d / "report.png", dpi=120)
        plt.close(fig)
        made.append("report.png")

    for f in series_files:
        name = f.name[: -len("_series.csv")]
        dumps = sorted(d.glob(f"{name}_vorticity_*.txt"))
        if not dumps:
            continue
        w, t = experiment.read_field_dump(dumps[-1])
        fig, ax = plt.subplots(figsize=(5, 5))
        lim = np.percentile(np.abs(w), 99) or 1.0
        ax.imshow(w.T, origin="lower", cmap="RdBu_r", vmin=-lim, vmax=lim)
        ax.set_title(f"{name} vorticity, t = {t:.3f}")
        fig.tight_layout()
        out = f"{name}_vorticity.png"
        fig.savefig(d / out, dpi=120)
        plt.close(fig)
        made.append(out)
    print("wrote " + ", ".join(made))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="hcmswim", description="Pivoting-link swimming simulations.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate every pattern of a config file")
    r.add_argument("config")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry")
    r.add_argument("--output-dir")
    r.add_argument("--workers", type=int, help=f"parallel patterns (this machine has {os.cpu_count()} CPUs)")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="print the normalised report of a run directory")
    c.add_argument("directory")
    c.add_argument("--full", action="store_true", help="use the all-cycles report")
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("validate", help="run a solver self-check")
    v.add_argument("suite", choices=[*validation.SUITES, "all"])
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("beam-profile", help="write z, phi, u of the buckled ribbon as CSV")
    b.add_argument("params", nargs="?", help="key = value file with l, EI_eta, C and optionally E, A1, tip_displacement")
    b.add_argument("--set", action="append", metavar="KEY=VALUE")
    b.add_argument("-n", type=int, default=101, help="number of points")
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_beam_profile)

    pl = sub.add_parser("plot", help="draw PNG figures from a run directory")
    pl.add_argument("directory")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(asctime)s %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, IngestionError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverDivergenceError, StepSizeError, NumericalError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
