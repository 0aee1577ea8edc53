"""Batch front door: solve designs, evaluate operating characteristics,
export demo paths and grids.

Exit codes: 0 success, 2 config error, 3 solver error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import io as evio
from .betting import BlockSchedule, DesignSpec
from .grids import BetGrid, EGrid, build_bet_grid, build_e_grid
from .oc import forward_oc, simulate_path
from .solver import (
    Constrained,
    InfeasibleConstraintError,
    NonConvergenceError,
    PolicyTable,
    grow_policy,
    solve_blocked,
    solve_constrained,
    solve_essmin,
    solve_pmax,
)

STRATEGIES = ("pmax", "essmin", "constrained", "grow")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    design: DesignSpec
    strategies: list[str]
    schedules: list[Optional[BlockSchedule]]
    seeds: list[int] = field(default_factory=list)
    size_log: int = 1000
    size_lin: int = 1000
    eps_newton: float = 0.01
    raw: dict = field(default_factory=dict)

    @staticmethod
    def from_file(path: Path) -> "RunConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
        return RunConfig.from_dict(raw)

    @staticmethod
    def from_dict(raw: dict) -> "RunConfig":
        if raw.get("schema_version") != evio.SCHEMA_VERSION:
            raise ConfigError("config must declare schema_version = 1")
        d = raw.get("design")
        if not isinstance(d, dict):
            raise ConfigError("config.design must be an object")
        blocks = d.get("blocks")
        try:
            design = DesignSpec(
                n=d["n"],
                theta0=d["theta0"],
                theta1=d["theta1"],
                alpha=d["alpha"],
                beta=d.get("beta"),
                blocks=BlockSchedule(tuple(blocks)) if blocks else None,
            )
        except KeyError as exc:
            raise ConfigError(f"config.design is missing field {exc}")
        except ValueError as exc:
            raise ConfigError(f"config.design: {exc}")
        strategies = raw.get("strategies", [])
        if not strategies:
            raise ConfigError("config.strategies must name at least one strategy")
        for s in strategies:
            if s not in STRATEGIES:
                raise ConfigError(
                    f"unknown strategy {s!r}; expected one of {STRATEGIES}"
                )
        if "constrained" in strategies and design.beta is None:
            raise ConfigError("the constrained strategy needs design.beta")
        schedules: list[Optional[BlockSchedule]] = []
        for entry in raw.get("schedules", [None]):
            if entry is None:
                schedules.append(None)
                continue
            try:
                sched = BlockSchedule(tuple(entry))
            except ValueError as exc:
                raise ConfigError(f"config.schedules entry {entry}: {exc}")
            if sched.n != design.n:
                raise ConfigError(
                    f"schedule {entry} sums to {sched.n}, expected n={design.n}"
                )
            schedules.append(sched)
        grid = raw.get("grid", {})
        seeds = [int(s) for s in raw.get("seeds", [])]
        return RunConfig(
            design=design,
            strategies=list(strategies),
            schedules=schedules,
            seeds=seeds,
            size_log=int(grid.get("size_log", 1000)),
            size_lin=int(grid.get("size_lin", 1000)),
            eps_newton=float(raw.get("eps_newton", 0.01)),
            raw=raw,
        )


def _sched_tag(schedule: Optional[BlockSchedule]) -> str:
    if schedule is None:
        return "seq"
    return "b" + "-".join(str(s) for s in schedule.sizes)


def _policy_key(strategy: str, schedule: Optional[BlockSchedule]):
    # pmax and grow do not depend on the schedule at all
    if strategy in ("pmax", "grow"):
        return (strategy, None)
    return (strategy, schedule.sizes if schedule else None)


def _policy_name(strategy: str, schedule: Optional[BlockSchedule]) -> str:
    if strategy in ("pmax", "grow"):
        return strategy
    return f"{strategy}_{_sched_tag(schedule)}"


class _Runner:
    """Solves each (strategy, schedule) pair at most once."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.e_grid: EGrid = build_e_grid(
            config.design.alpha, config.size_log, config.size_lin
        )
        self.bet_grid: BetGrid = build_bet_grid()
        self._policies: dict = {}

    def design_with(self, schedule: Optional[BlockSchedule]) -> DesignSpec:
        d = self.config.design
        return DesignSpec(
            n=d.n, theta0=d.theta0, theta1=d.theta1, alpha=d.alpha, beta=d.beta,
            blocks=schedule,
        )

    def policy(self, strategy: str, schedule: Optional[BlockSchedule]) -> PolicyTable:
        key = _policy_key(strategy, schedule)
        if key in self._policies:
            return self._policies[key]
        spec = self.design_with(schedule if strategy not in ("pmax", "grow") else None)
        if strategy == "pmax":
            pol, _ = solve_pmax(spec, self.e_grid, self.bet_grid)
        elif strategy == "grow":
            pol = grow_policy(spec, self.e_grid)
        elif strategy == "essmin":
            pol, _ = solve_essmin(spec, self.e_grid, self.bet_grid)
        elif strategy == "constrained":
            if schedule is None:
                pol, _ = solve_constrained(
                    spec, self.e_grid, self.bet_grid, eps_newton=self.config.eps_newton
                )
            else:
                pol, _ = solve_blocked(
                    spec,
                    self.e_grid,
                    self.bet_grid,
                    Constrained(0.0, schedule=schedule),
                    eps_newton=self.config.eps_newton,
                )
        else:
            raise ConfigError(f"unknown strategy {strategy!r}")
        self._policies[key] = pol
        return pol


def cmd_solve(config: RunConfig, out_dir: Path, jobs: int = 1) -> evio.OutputBundle:
    """Solve requested strategies; write policy tables, heatmaps and overlays."""
    runner = _Runner(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    done = set()
    for strategy in config.strategies:
        for schedule in config.schedules:
            name = _policy_name(strategy, schedule)
            if name in done:
                continue
            done.add(name)
            pol = runner.policy(strategy, schedule)
            written += evio.export_policy(pol, out_dir, f"policy_{name}")
            written.append(
                evio.export_heatmap(pol, out_dir / f"heatmap_{name}.csv")
            )
    written.append(evio.export_bounds(config.design, out_dir / "bounds.csv"))
    bundle = evio.bundle_files(out_dir, config.raw, written)
    bundle.write_manifest()
    return bundle


def cmd_oc(config: RunConfig, out_dir: Path, jobs: int = 1) -> evio.OutputBundle:
    """Exact curves per (strategy, schedule, theta) plus a comparison summary."""
    runner = _Runner(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    tasks = []
    for strategy in config.strategies:
        for schedule in config.schedules:
            pol = runner.policy(strategy, schedule)
            spec = runner.design_with(schedule)
            for theta in (config.design.theta0, config.design.theta1):
                tasks.append((strategy, schedule, theta, pol, spec))

    def run(task):
        strategy, schedule, theta, pol, spec = task
        return (strategy, _sched_tag(schedule), theta), forward_oc(pol, theta, spec=spec)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(run, tasks))
    else:
        results = dict(run(t) for t in tasks)

    summary = {}
    for strategy in config.strategies:
        for schedule in config.schedules:
            tag = _sched_tag(schedule)
            spec = runner.design_with(schedule)
            profiles = {
                theta: results[(strategy, tag, theta)]
                for theta in (spec.theta0, spec.theta1)
            }
            path = out_dir / f"oc_{strategy}_{tag}.csv"
            written.append(evio.export_oc_curves(profiles, spec, path))
            summary[f"{strategy}_{tag}"] = evio.oc_summary(profiles, spec)
    summary_path = out_dir / "oc_summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    written.append(summary_path)
    bundle = evio.bundle_files(out_dir, config.raw, written)
    bundle.write_manifest()
    return bundle


def cmd_export_paths(
    config: RunConfig, out_dir: Path, seeds: Optional[list[int]] = None
) -> evio.OutputBundle:
    """Per-seed demo trajectories for every strategy under theta0 and theta1.

    The outcome stream is a function of (seed, theta) alone, so files for
    different strategies at the same seed share outcomes.
    """
    runner = _Runner(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = list(seeds) if seeds else list(config.seeds)
    written: list[Path] = []
    for seed in seeds:
        for strategy in config.strategies:
            for schedule in config.schedules:
                pol = runner.policy(strategy, schedule)
                spec = runner.design_with(schedule)
                name = _policy_name(strategy, schedule)
                for label, theta in (("theta0", spec.theta0), ("theta1", spec.theta1)):
                    trial = simulate_path(pol, theta, seed, spec=spec)
                    path = out_dir / f"path_{name}_{label}_seed{seed}.csv"
                    written.append(evio.export_path(trial, path))
    bundle = evio.bundle_files(out_dir, config.raw, written)
    bundle.write_manifest()
    return bundle


def cmd_grid_dump(config: RunConfig, out_dir: Path) -> evio.OutputBundle:
    runner = _Runner(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        evio.export_e_grid(runner.e_grid, out_dir / "e_grid.csv"),
        evio.export_bet_grid(runner.bet_grid, out_dir / "bet_grid.csv"),
    ]
    bundle = evio.bundle_files(out_dir, config.raw, written)
    bundle.write_manifest()
    return bundle


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evdesign",
        description="Design-optimal e-value betting strategies and their exact "
        "operating characteristics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "solve strategies and export policy tables"),
        ("oc", "compute exact operating characteristics"),
        ("paths", "export seeded demo trajectories"),
        ("grid-dump", "export the e-grid and bet grid"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--jobs", type=int, default=1)
        if name == "paths":
            p.add_argument(
                "--seed", type=int, action="append", default=None,
                help="override config seeds (repeatable)",
            )
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.from_file(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "solve":
            cmd_solve(config, args.out, jobs=args.jobs)
        elif args.command == "oc":
            cmd_oc(config, args.out, jobs=args.jobs)
        elif args.command == "paths":
            cmd_export_paths(config, args.out, seeds=args.seed)
        elif args.command == "grid-dump":
            cmd_grid_dump(config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleConstraintError, NonConvergenceError, ValueError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
