#!/usr/bin/env python3
"""Run the solver cross-validation preset and report the error norms.

Executes the bundled fig4 preset (both solvers, probes on the x axis at
y = 0, z = 20 um) and prints the probe and field error norms between the
closed-form and finite-difference solutions.
"""
import argparse

from evsim.scenario import load_config_text, run_scenario


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs")
    parser.add_argument("--h-um", type=float, default=1.0)
    parser.add_argument("--horizon-s", type=float, default=3.0)
    args = parser.parse_args()

    # two-decimal values stay multiples of the 5 ms channel step
    snapshots = ", ".join(f"{round(args.horizon_s * f, 2):g}" for f in (1 / 3, 2 / 3, 1.0))
    cfg = load_config_text(
        "preset = fig4\n"
        f"channel.horizon_s = {args.horizon_s}\n"
        f"channel.grid.h_um = {args.h_um}\n"
        f"snapshot_times_s = {snapshots}\n"
        "output_dir = cross_validation\n"
    )
    report = run_scenario(cfg, output_root=args.out)
    print(f"artifacts in {report.output_dir}")
    for key, value in sorted(report.error_norms.items()):
        print(f"{key} = {value:.6g}")
    for stage, seconds in sorted(report.timings_s.items()):
        print(f"timing {stage}: {seconds:.2f}s")


if __name__ == "__main__":
    main()
