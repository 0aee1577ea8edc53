"""CSV/JSON serialization for policies, curves, paths and run manifests.

All numbers are written with 17 significant digits so files round-trip to
the exact double and repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .betting import BlockSchedule, DesignSpec, EProcessPath, EState, classify_zone, diagnostic_bounds
from .grids import BetGrid, EGrid, build_e_grid
from .oc import OCProfile
from .solver import (
    STOP_CODE,
    Constrained,
    ESSMin,
    FixedBet,
    PMax,
    PolicyTable,
)

SCHEMA_VERSION = 1


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _reward_to_json(rewards) -> dict:
    if isinstance(rewards, PMax):
        return {"kind": "pmax"}
    if isinstance(rewards, ESSMin):
        return {
            "kind": "essmin",
            "schedule": list(rewards.schedule.sizes) if rewards.schedule else None,
        }
    if isinstance(rewards, Constrained):
        return {
            "kind": "constrained",
            "lam": rewards.lam,
            "schedule": list(rewards.schedule.sizes) if rewards.schedule else None,
        }
    if isinstance(rewards, FixedBet):
        return {"kind": "fixed", "bet": rewards.bet}
    raise TypeError(f"cannot serialize rewards {rewards!r}")


def _reward_from_json(obj: dict):
    kind = obj["kind"]
    sched = obj.get("schedule")
    schedule = BlockSchedule(tuple(sched)) if sched else None
    if kind == "pmax":
        return PMax()
    if kind == "essmin":
        return ESSMin(schedule=schedule)
    if kind == "constrained":
        return Constrained(lam=obj["lam"], schedule=schedule)
    if kind == "fixed":
        return FixedBet(bet=obj["bet"])
    raise ValueError(f"unknown reward kind {kind!r}")


def _spec_to_json(spec: DesignSpec) -> dict:
    return {
        "n": spec.n,
        "theta0": spec.theta0,
        "theta1": spec.theta1,
        "alpha": spec.alpha,
        "beta": spec.beta,
        "blocks": list(spec.blocks.sizes) if spec.blocks else None,
    }


def _spec_from_json(obj: dict) -> DesignSpec:
    blocks = obj.get("blocks")
    return DesignSpec(
        n=obj["n"],
        theta0=obj["theta0"],
        theta1=obj["theta1"],
        alpha=obj["alpha"],
        beta=obj.get("beta"),
        blocks=BlockSchedule(tuple(blocks)) if blocks else None,
    )


def export_policy(policy: PolicyTable, out_dir: Path, name: str) -> list[Path]:
    """Write <name>.csv (one row per stage/state) and a <name>.json sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    json_path = out_dir / f"{name}.json"
    g = policy.e_grid.values
    bets = policy.bet_grid.values
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "grid_index", "e_value", "action_kind", "bet"])
        for t in range(policy.spec.n):
            row_actions = policy.actions[t]
            for s in range(policy.e_grid.size):
                code = int(row_actions[s])
                if code == STOP_CODE:
                    w.writerow([t, s, fmt(g[s]), "stop", ""])
                else:
                    w.writerow([t, s, fmt(g[s]), "bet", fmt(bets[code])])
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "design": _spec_to_json(policy.spec),
        "rewards": _reward_to_json(policy.rewards),
        "futility_on_hz": policy.futility_on_hz,
        "start_stage": policy.start_stage,
        "e_grid": {
            "hash": policy.e_grid.content_hash,
            "alpha": policy.e_grid.alpha,
            "size_log": policy.e_grid.size_log,
            "size_lin": policy.e_grid.size_lin,
            "size": policy.e_grid.size,
        },
        "bet_grid": {
            "hash": policy.bet_grid.content_hash,
            "values": [fmt(b) for b in bets],
        },
        "policy_id": policy.content_hash,
        "diagnostics": _diag_to_json(policy.diagnostics),
    }
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return [csv_path, json_path]


def _diag_to_json(diag: dict) -> dict:
    out = {}
    for key, value in diag.items():
        if key == "lagrange":
            out[key] = {
                "final_lambda": value.final_lambda,
                "final_policy_id": value.final_policy_id,
                "eps_newton": value.eps_newton,
                "iterations": [
                    {"lam": it.lam, "power": it.power, "ess": it.ess}
                    for it in value.iterations
                ],
            }
        else:
            out[key] = value
    return out


def import_policy(csv_path: Path, json_path: Optional[Path] = None) -> PolicyTable:
    """Rebuild a policy from its export; grid hashes must match the sidecar."""
    csv_path = Path(csv_path)
    if json_path is None:
        json_path = csv_path.with_suffix(".json")
    with open(json_path) as fh:
        sidecar = json.load(fh)
    if sidecar.get("schema_version") != SCHEMA_VERSION:
        raise ValueError("unsupported policy schema version")
    spec = _spec_from_json(sidecar["design"])
    eg = build_e_grid(
        sidecar["e_grid"]["alpha"],
        sidecar["e_grid"]["size_log"],
        sidecar["e_grid"]["size_lin"],
    )
    if eg.content_hash != sidecar["e_grid"]["hash"]:
        raise ValueError("e-grid hash mismatch: rebuilt grid differs from export")
    bg = BetGrid(values=np.array([float(b) for b in sidecar["bet_grid"]["values"]]))
    if bg.content_hash != sidecar["bet_grid"]["hash"]:
        raise ValueError("bet grid hash mismatch")
    actions = np.zeros((spec.n, eg.size), dtype=np.int32)
    with open(csv_path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:5] != ["t", "grid_index", "e_value", "action_kind", "bet"]:
            raise ValueError("unexpected policy CSV header")
        for row in r:
            t, s = int(row[0]), int(row[1])
            if row[3] == "stop":
                actions[t, s] = STOP_CODE
            else:
                actions[t, s] = bg.index_of(float(row[4]))
    policy = PolicyTable(
        actions=actions,
        spec=spec,
        e_grid=eg,
        bet_grid=bg,
        rewards=_reward_from_json(sidecar["rewards"]),
        futility_on_hz=sidecar["futility_on_hz"],
        start_stage=sidecar.get("start_stage", 0),
    )
    if policy.content_hash != sidecar["policy_id"]:
        raise ValueError("policy content hash mismatch after import")
    return policy


def export_oc_curves(
    profiles: dict[float, OCProfile], spec: DesignSpec, path: Path
) -> Path:
    """One row per analysis time with the curves under theta0 and theta1.

    The almost-hopeless-zone occupancy columns are diagnostics, not stopping
    probabilities.
    """
    path = Path(path)
    p0, p1 = profiles[spec.theta0], profiles[spec.theta1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "t",
                "cum_rejection_theta0",
                "cum_rejection_theta1",
                "cum_futility_theta0",
                "cum_futility_theta1",
                "ahz_theta0",
                "ahz_theta1",
            ]
        )
        for t in range(spec.n + 1):
            w.writerow(
                [
                    t,
                    fmt(p0.cumulative_rejection[t]),
                    fmt(p1.cumulative_rejection[t]),
                    fmt(p0.cumulative_futility[t]),
                    fmt(p1.cumulative_futility[t]),
                    fmt(p0.ahz_occupancy[t]),
                    fmt(p1.ahz_occupancy[t]),
                ]
            )
    return path


def oc_summary(profiles: dict[float, OCProfile], spec: DesignSpec) -> dict:
    p0, p1 = profiles[spec.theta0], profiles[spec.theta1]
    return {
        "final_power": p1.final_rejection,
        "final_size": p0.final_rejection,
        "ess_theta1": p1.ess,
        "ess_theta0": p0.ess,
        "final_futility_theta0": p0.final_futility,
        "final_futility_theta1": p1.final_futility,
        "analysis_points": p1.analysis_points,
    }


def export_heatmap(policy: PolicyTable, path: Path) -> Path:
    """Per (stage, e-value) cell: the action and the zone label."""
    path = Path(path)
    g = policy.e_grid.values
    bets = policy.bet_grid.values
    spec = policy.spec
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "e_value", "bet", "zone"])
        for t in range(spec.n):
            for s in range(policy.e_grid.size):
                code = int(policy.actions[t, s])
                zone = classify_zone(EState(t, float(g[s])), spec).value
                bet = "" if code == STOP_CODE else fmt(bets[code])
                w.writerow([t, fmt(g[s]), bet, zone])
    return path


def export_bounds(spec: DesignSpec, path: Path) -> Path:
    """Kelly-referenced diagnostic overlay curves per analysis time."""
    path = Path(path)
    bounds = diagnostic_bounds(spec)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "m_upper", "m_lower"])
        for t in range(spec.n + 1):
            w.writerow([t, fmt(bounds.m_upper[t]), fmt(bounds.m_lower[t])])
    return path


def export_path(trial_path: EProcessPath, path: Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "outcome", "bet", "e_value", "e_value_discrete", "zone"])
        zones = trial_path.zones or []
        disc = trial_path.evalues_discrete or []
        w.writerow([0, "", "", fmt(1.0), fmt(disc[0]) if disc else "", zones[0].value if zones else ""])
        for k, (y, b) in enumerate(zip(trial_path.outcomes, trial_path.bets), start=1):
            w.writerow(
                [
                    k,
                    y,
                    fmt(b),
                    fmt(trial_path.evalues[k]),
                    fmt(disc[k]) if len(disc) > k else "",
                    zones[k].value if len(zones) > k else "",
                ]
            )
    return path


def export_e_grid(e_grid: EGrid, path: Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "value"])
        for i, v in enumerate(e_grid.values):
            w.writerow([i, fmt(v)])
    return path


def export_bet_grid(bet_grid: BetGrid, path: Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "value"])
        for i, v in enumerate(bet_grid.values):
            w.writerow([i, fmt(v)])
    return path


def file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class OutputBundle:
    """Manifest of produced files with content hashes."""

    out_dir: Path
    config: dict
    files: dict[str, str]

    def write_manifest(self) -> Path:
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "files": self.files,
        }
        path = Path(self.out_dir) / "manifest.json"
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return path

    def verify(self) -> bool:
        return all(
            file_sha256(Path(self.out_dir) / rel) == digest
            for rel, digest in self.files.items()
        )


def bundle_files(out_dir: Path, config: dict, paths: list[Path]) -> OutputBundle:
    out_dir = Path(out_dir)
    files = {
        str(p.relative_to(out_dir)): file_sha256(p) for p in sorted(paths)
    }
    return OutputBundle(out_dir=out_dir, config=config, files=files)
