"""Batch command-line interface.

Subcommands: ``run`` executes a scenario file, ``validate`` checks one
without running, ``compare`` reports error norms between two stored fields,
``plot`` renders known CSV artifacts to PNG. Exit codes: 0 success, 2
validation or input problems, 3 numerical failure during a run.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, GridError, InvariantError, StabilityError
from .fieldio import read_field
from .scenario import compare_fields, load_config, run_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _cmd_run(args) -> int:
    config = load_config(args.config)
    report = run_scenario(config, output_root=args.output_root)
    print(f"run complete: {report.output_dir}")
    if report.error_norms:
        for key, value in sorted(report.error_norms.items()):
            print(f"  {key} = {value:.6g}")
    print(f"  report: {report.artifacts['report']}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    load_config(args.config)
    print(f"{args.config}: OK")
    return EXIT_OK


def _cmd_compare(args) -> int:
    field_a = read_field(args.field_a)
    field_b = read_field(args.field_b)
    norms = compare_fields(field_a, field_b, interior_margin_um=args.margin)
    for key, value in sorted(norms.items()):
        print(f"{key} = {value:.6g}")
    return EXIT_OK


def _plot_csv(path, outdir: Path | None) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    path = Path(path)
    header = path.read_text(encoding="utf-8").splitlines()[0].strip()
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    columns = header.split(",")

    fig, ax = plt.subplots(figsize=(7, 4.5))
    if header == "t,x,y,z,c":
        points = {}
        for row in data:
            points.setdefault(tuple(row[1:4]), []).append((row[0], row[4]))
        for point, rows in points.items():
            rows = np.asarray(rows)
            ax.plot(rows[:, 0], rows[:, 1], label=f"({point[0]:g}, {point[1]:g}, {point[2]:g}) um")
        ax.set_ylabel("concentration (uM)")
        ax.legend(fontsize=8)
    elif header == "t,count":
        ax.step(data[:, 0], data[:, 1], where="post")
        ax.set_ylabel("events per interval")
    else:
        for col in range(1, len(columns)):
            ax.plot(data[:, 0], data[:, col], label=columns[col])
        if len(columns) > 2:
            ax.legend(fontsize=8)
        ax.set_ylabel(", ".join(columns[1:]) if len(columns) <= 2 else "value")
    ax.set_xlabel("time (s)")
    ax.set_title(path.name)
    target = (outdir or path.parent) / (path.stem + ".png")
    fig.tight_layout()
    fig.savefig(target, dpi=130)
    plt.close(fig)
    return target


def _cmd_plot(args) -> int:
    outdir = Path(args.out) if args.out else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
    for name in args.csv:
        target = _plot_csv(Path(name), outdir)
        print(f"wrote {target}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file end to end")
    p_run.add_argument("config")
    p_run.add_argument("--output-root", default=None, help="override the output root directory")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="validate a scenario file")
    p_val.add_argument("config")
    p_val.set_defaults(func=_cmd_validate)

    p_cmp = sub.add_parser("compare", help="error norms between two stored fields")
    p_cmp.add_argument("field_a")
    p_cmp.add_argument("field_b")
    p_cmp.add_argument("--margin", type=float, default=0.0, help="interior margin in um")
    p_cmp.set_defaults(func=_cmd_compare)

    p_plot = sub.add_parser("plot", help="render CSV artifacts to PNG")
    p_plot.add_argument("csv", nargs="+")
    p_plot.add_argument("--out", default=None, help="directory for the images")
    p_plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GridError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (StabilityError, InvariantError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
