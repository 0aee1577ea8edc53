#!/usr/bin/env python3
"""Solve the reference single-arm scenario and print the design comparison.

Runs all four strategies (power-maximizing, sample-size-minimizing,
power-constrained with futility stopping, constant-Kelly) for the
50-participant trial testing H0: theta <= 0.1 against theta1 = 0.242 at
alpha = 0.05 with a power floor of 0.8, fully sequential plus blocked
variants, then writes policies, heatmap data, exact operating
characteristics and demo paths under --out.
"""

import argparse
import json
import sys
import tempfile
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from evdesign.cli import RunConfig, cmd_export_paths, cmd_oc, cmd_solve

CONFIG = {
    "schema_version": 1,
    "design": {"n": 50, "theta0": 0.1, "theta1": 0.242, "alpha": 0.05, "beta": 0.2},
    "strategies": ["pmax", "essmin", "constrained", "grow"],
    "schedules": [None, [5] * 10, [25, 25]],
    "seeds": [11, 17],
    "eps_newton": 0.01,
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("out/paper_scenario"))
    args = parser.parse_args()

    config = RunConfig.from_dict(CONFIG)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(CONFIG, indent=1) + "\n")

    t0 = time.time()
    print("solving strategies ...")
    cmd_solve(config, out)
    print(f"  done in {time.time() - t0:.1f}s")

    t0 = time.time()
    print("computing exact operating characteristics ...")
    cmd_oc(config, out)
    print(f"  done in {time.time() - t0:.1f}s")

    print("exporting demo paths ...")
    cmd_export_paths(config, out)

    with open(out / "oc_summary.json") as fh:
        summary = json.load(fh)
    print(f"\n{'design':<22}{'power':>9}{'size':>9}{'ESS(th1)':>10}{'ESS(th0)':>10}")
    for name in sorted(summary):
        row = summary[name]
        print(
            f"{name:<22}{row['final_power']:>9.4f}{row['final_size']:>9.4f}"
            f"{row['ess_theta1']:>10.2f}{row['ess_theta0']:>10.2f}"
        )
    print(f"\noutputs in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
