"""Single-file persistence for designs, sessions and their event logs.

The event log is append-only and every append commits before it is
acknowledged; a session snapshot is updated in the same transaction, so a
restart between any two events loses nothing and the snapshot always equals
a replay of the log.
"""

from __future__ import annotations

import io as _stdio
import json
import sqlite3
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .grids import BetGrid, build_e_grid
from .io import _reward_from_json, _reward_to_json, _spec_from_json, _spec_to_json
from .solver import PolicyTable

_SCHEMA = """
CREATE TABLE IF NOT EXISTS designs (
  id TEXT PRIMARY KEY,
  request TEXT NOT NULL,
  summary TEXT NOT NULL,
  policy BLOB NOT NULL,
  created REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
  id TEXT PRIMARY KEY,
  design_id TEXT NOT NULL,
  created REAL NOT NULL,
  status TEXT NOT NULL,
  seq INTEGER NOT NULL,
  t INTEGER NOT NULL,
  state_index INTEGER NOT NULL,
  e_cont REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS events (
  session_id TEXT NOT NULL,
  seq INTEGER NOT NULL,
  outcome INTEGER,
  action_kind TEXT NOT NULL,
  bet REAL,
  e_cont REAL NOT NULL,
  e_index INTEGER NOT NULL,
  zone TEXT NOT NULL,
  conditional_power REAL NOT NULL,
  status TEXT NOT NULL,
  override_used INTEGER NOT NULL,
  created REAL NOT NULL,
  PRIMARY KEY (session_id, seq)
);
CREATE TABLE IF NOT EXISTS overrides (
  session_id TEXT NOT NULL,
  at_t INTEGER NOT NULL,
  created REAL NOT NULL,
  PRIMARY KEY (session_id, at_t)
);
"""


def policy_to_bytes(policy: PolicyTable) -> bytes:
    meta = {
        "design": _spec_to_json(policy.spec),
        "rewards": _reward_to_json(policy.rewards),
        "futility_on_hz": policy.futility_on_hz,
        "start_stage": policy.start_stage,
        "e_grid": {
            "alpha": policy.e_grid.alpha,
            "size_log": policy.e_grid.size_log,
            "size_lin": policy.e_grid.size_lin,
            "hash": policy.e_grid.content_hash,
        },
    }
    buf = _stdio.BytesIO()
    np.savez_compressed(
        buf,
        actions=policy.actions,
        bet_values=policy.bet_grid.values,
        meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
    )
    return buf.getvalue()


def policy_from_bytes(blob: bytes) -> PolicyTable:
    with np.load(_stdio.BytesIO(blob)) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        actions = data["actions"].astype(np.int32)
        bet_values = data["bet_values"].astype(float)
    eg = build_e_grid(
        meta["e_grid"]["alpha"], meta["e_grid"]["size_log"], meta["e_grid"]["size_lin"]
    )
    if eg.content_hash != meta["e_grid"]["hash"]:
        raise ValueError("e-grid hash mismatch restoring policy")
    return PolicyTable(
        actions=actions,
        spec=_spec_from_json(meta["design"]),
        e_grid=eg,
        bet_grid=BetGrid(values=bet_values),
        rewards=_reward_from_json(meta["rewards"]),
        futility_on_hz=meta["futility_on_hz"],
        start_stage=meta.get("start_stage", 0),
    )


@dataclass
class SessionRow:
    id: str
    design_id: str
    status: str
    seq: int
    t: int
    state_index: int
    e_cont: float


@dataclass
class EventRow:
    session_id: str
    seq: int
    outcome: Optional[int]
    action_kind: str
    bet: Optional[float]
    e_cont: float
    e_index: int
    zone: str
    conditional_power: float
    status: str
    override_used: bool


class Store:
    def __init__(self, path: str | Path):
        self.path = str(path)
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.executescript(_SCHEMA)
        self._conn.commit()

    def close(self):
        self._conn.close()

    # -- designs ---------------------------------------------------------
    def put_design(self, design_id: str, request: dict, summary: dict, policy: PolicyTable):
        self._conn.execute(
            "INSERT OR IGNORE INTO designs (id, request, summary, policy, created) "
            "VALUES (?, ?, ?, ?, ?)",
            (
                design_id,
                json.dumps(request, sort_keys=True),
                json.dumps(summary, sort_keys=True),
                policy_to_bytes(policy),
                time.time(),
            ),
        )
        self._conn.commit()

    def get_design(self, design_id: str):
        row = self._conn.execute(
            "SELECT request, summary, policy FROM designs WHERE id = ?", (design_id,)
        ).fetchone()
        if row is None:
            return None
        return json.loads(row[0]), json.loads(row[1]), policy_from_bytes(row[2])

    def design_summary(self, design_id: str) -> Optional[dict]:
        row = self._conn.execute(
            "SELECT summary FROM designs WHERE id = ?", (design_id,)
        ).fetchone()
        return json.loads(row[0]) if row else None

    # -- sessions --------------------------------------------------------
    def create_session(self, row: SessionRow):
        self._conn.execute(
            "INSERT INTO sessions (id, design_id, created, status, seq, t, "
            "state_index, e_cont) VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
            (
                row.id,
                row.design_id,
                time.time(),
                row.status,
                row.seq,
                row.t,
                row.state_index,
                row.e_cont,
            ),
        )
        self._conn.commit()

    def get_session(self, session_id: str) -> Optional[SessionRow]:
        row = self._conn.execute(
            "SELECT id, design_id, status, seq, t, state_index, e_cont "
            "FROM sessions WHERE id = ?",
            (session_id,),
        ).fetchone()
        if row is None:
            return None
        return SessionRow(
            id=row[0], design_id=row[1], status=row[2], seq=row[3], t=row[4],
            state_index=row[5], e_cont=row[6],
        )

    def append_event(self, event: EventRow, snapshot: SessionRow):
        """Insert the event and update the snapshot in one transaction."""
        with self._conn:
            self._conn.execute(
                "INSERT INTO events (session_id, seq, outcome, action_kind, bet, "
                "e_cont, e_index, zone, conditional_power, status, override_used, "
                "created) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    event.session_id,
                    event.seq,
                    event.outcome,
                    event.action_kind,
                    event.bet,
                    event.e_cont,
                    event.e_index,
                    event.zone,
                    event.conditional_power,
                    event.status,
                    int(event.override_used),
                    time.time(),
                ),
            )
            self._conn.execute(
                "UPDATE sessions SET status = ?, seq = ?, t = ?, state_index = ?, "
                "e_cont = ? WHERE id = ?",
                (
                    snapshot.status,
                    snapshot.seq,
                    snapshot.t,
                    snapshot.state_index,
                    snapshot.e_cont,
                    snapshot.id,
                ),
            )

    def list_events(self, session_id: str) -> list[EventRow]:
        rows = self._conn.execute(
            "SELECT session_id, seq, outcome, action_kind, bet, e_cont, e_index, "
            "zone, conditional_power, status, override_used FROM events "
            "WHERE session_id = ? ORDER BY seq",
            (session_id,),
        ).fetchall()
        return [
            EventRow(
                session_id=r[0], seq=r[1], outcome=r[2], action_kind=r[3], bet=r[4],
                e_cont=r[5], e_index=r[6], zone=r[7], conditional_power=r[8],
                status=r[9], override_used=bool(r[10]),
            )
            for r in rows
        ]

    # -- overrides -------------------------------------------------------
    def add_override(self, session_id: str, at_t: int):
        self._conn.execute(
            "INSERT OR IGNORE INTO overrides (session_id, at_t, created) VALUES (?, ?, ?)",
            (session_id, at_t, time.time()),
        )
        self._conn.commit()

    def has_override(self, session_id: str, at_t: int) -> bool:
        row = self._conn.execute(
            "SELECT 1 FROM overrides WHERE session_id = ? AND at_t = ?",
            (session_id, at_t),
        ).fetchone()
        return row is not None

    def list_overrides(self, session_id: str) -> list[int]:
        rows = self._conn.execute(
            "SELECT at_t FROM overrides WHERE session_id = ? ORDER BY at_t",
            (session_id,),
        ).fetchall()
        return [r[0] for r in rows]
