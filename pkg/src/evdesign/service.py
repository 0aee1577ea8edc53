"""Session-oriented HTTP facade for live trial monitoring.

Designs are solved once per content hash and cached; sessions bind an
outcome log to a solved policy.  The discrete grid value drives actions and
the rejection decision (the continuous replay value is display-only), so a
session is always a deterministic replay of its outcome log.

Stop semantics: bankruptcy and hopeless-zone entry close a session for good
(conditional power is zero).  A futility Stop recommended by a constrained
policy is advisory: an operator may override it for the current analysis
time, after which outcomes keep being accepted; an un-overridden advance
into a pending Stop applies the stop instead of consuming the outcome.
Overrides never alter the efficacy rule, which depends only on the e-value
path reaching 1/alpha.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import uuid
from dataclasses import dataclass
from typing import Optional

import numpy as np
from fastapi import Depends, FastAPI, HTTPException, Request
from pydantic import BaseModel, Field

from .betting import BlockSchedule, DesignSpec, EState, classify_zone
from .grids import build_bet_grid, build_e_grid, get_kernel, project_update
from .io import SCHEMA_VERSION, _spec_to_json
from .oc import forward_oc
from .solver import (
    STOP_CODE,
    Constrained,
    PMax,
    PolicyTable,
    grow_policy,
    policy_value,
    solve_blocked,
    solve_constrained,
    solve_essmin,
    solve_pmax,
)
from .store import EventRow, SessionRow, Store

STATUS_OPEN = "open"
STATUS_REJECTED = "rejected_efficacy"
STATUS_STOPPED = "stopped_futility"
STATUS_BANKRUPT = "bankrupt"
STATUS_COMPLETED = "completed"


class DesignBody(BaseModel):
    n: int
    theta0: float
    theta1: float
    alpha: float
    beta: Optional[float] = None
    blocks: Optional[list[int]] = None


class DesignRequest(BaseModel):
    design: DesignBody
    strategy: str = Field(pattern="^(pmax|essmin|constrained|grow)$")
    eps_newton: float = 0.01


class SessionRequest(BaseModel):
    design_id: str


class OutcomeBody(BaseModel):
    y: int


@dataclass
class RuntimeDesign:
    """Loaded policy plus derived tables the session endpoints need."""

    design_id: str
    policy: PolicyTable
    cp_table: np.ndarray  # (n+1, S) hitting probability under theta1
    summary: dict

    @property
    def spec(self) -> DesignSpec:
        return self.policy.spec


def _design_hash(request: DesignRequest) -> str:
    canon = json.dumps(request.model_dump(), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _spec_from_body(body: DesignBody) -> DesignSpec:
    blocks = BlockSchedule(tuple(body.blocks)) if body.blocks else None
    return DesignSpec(
        n=body.n,
        theta0=body.theta0,
        theta1=body.theta1,
        alpha=body.alpha,
        beta=body.beta,
        blocks=blocks,
    )


def _solve(request: DesignRequest) -> tuple[PolicyTable, dict]:
    spec = _spec_from_body(request.design)
    e_grid = build_e_grid(spec.alpha)
    bet_grid = build_bet_grid()
    trace = None
    if request.strategy == "pmax":
        policy, _ = solve_pmax(spec, e_grid, bet_grid)
    elif request.strategy == "essmin":
        policy, _ = solve_essmin(spec, e_grid, bet_grid)
    elif request.strategy == "grow":
        policy = grow_policy(spec, e_grid)
    else:
        if spec.beta is None:
            raise HTTPException(422, "constrained designs need beta")
        if spec.blocks is None:
            policy, trace = solve_constrained(
                spec, e_grid, bet_grid, eps_newton=request.eps_newton
            )
        else:
            policy, trace = solve_blocked(
                spec,
                e_grid,
                bet_grid,
                Constrained(0.0, schedule=spec.blocks),
                eps_newton=request.eps_newton,
            )
    prof1 = forward_oc(policy, spec.theta1, spec=spec)
    prof0 = forward_oc(policy, spec.theta0, spec=spec)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "strategy": request.strategy,
        "design": _spec_to_json(spec),
        "power": prof1.final_rejection,
        "size": prof0.final_rejection,
        "ess_theta1": prof1.ess,
        "ess_theta0": prof0.ess,
        "policy_id": policy.content_hash,
    }
    if trace is not None:
        summary["lambda_trace"] = {
            "final_lambda": trace.final_lambda,
            "eps_newton": trace.eps_newton,
            "iterations": [
                {"lam": it.lam, "power": it.power, "ess": it.ess}
                for it in trace.iterations
            ],
        }
    return policy, summary


def create_app(db_path: Optional[str] = None, api_token: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="evdesign service")
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    db_path = db_path or os.environ.get("EVDESIGN_DB", "evdesign.sqlite")
    token = api_token if api_token is not None else os.environ.get("EVDESIGN_API_TOKEN")
    store = Store(db_path)
    runtime: dict[str, RuntimeDesign] = {}
    solve_lock = threading.Lock()
    session_locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()
    oc_cache: dict[tuple[str, float], dict] = {}

    def require_token(request: Request):
        if token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise HTTPException(401, "missing or invalid API token")

    auth = Depends(require_token)

    def session_lock(session_id: str) -> threading.Lock:
        with locks_guard:
            lock = session_locks.get(session_id)
            if lock is None:
                lock = threading.Lock()
                session_locks[session_id] = lock
            return lock

    def load_runtime(design_id: str) -> RuntimeDesign:
        rt = runtime.get(design_id)
        if rt is not None:
            return rt
        stored = store.get_design(design_id)
        if stored is None:
            raise HTTPException(404, f"unknown design {design_id}")
        _, summary, policy = stored
        cp = policy_value(policy, policy.spec.theta1, PMax()).values
        rt = RuntimeDesign(design_id=design_id, policy=policy, cp_table=cp, summary=summary)
        runtime[design_id] = rt
        return rt

    def masked_best_bet(rt: RuntimeDesign, t: int, idx: int) -> int:
        """Best non-Stop action by one-step conditional-power lookahead.

        Used when an operator overrides a recommended futility stop: the
        continuation maximizes the probability of still reaching 1/alpha.
        """
        kern = get_kernel(rt.policy.e_grid, rt.policy.bet_grid, rt.spec.theta0)
        cp_next = rt.cp_table[t + 1]
        vals = rt.spec.theta1 * cp_next[kern.up[:, idx]] + (
            1.0 - rt.spec.theta1
        ) * cp_next[kern.down[:, idx]]
        return int(np.argmax(vals))

    def effective_action(rt: RuntimeDesign, session: SessionRow) -> tuple[int, bool]:
        """Bet-grid action code for the pre-outcome state, resolving overrides.

        Returns (code, stop_pending): code == STOP_CODE means an
        un-overridden stop recommendation is pending.
        """
        code = int(rt.policy.actions[session.t, session.state_index])
        if code != STOP_CODE:
            return code, False
        if store.has_override(session.id, session.t):
            return masked_best_bet(rt, session.t, session.state_index), True
        return STOP_CODE, True

    def event_json(rt: RuntimeDesign, event: EventRow) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": event.session_id,
            "seq": event.seq,
            "outcome": event.outcome,
            "action": {
                "kind": event.action_kind,
                "bet": event.bet,
            },
            "e_value": event.e_cont,
            "e_value_discrete": float(rt.policy.e_grid.values[event.e_index]),
            "zone": event.zone,
            "conditional_power": event.conditional_power,
            "status": event.status,
            "override_used": event.override_used,
        }

    def branch_summary(rt: RuntimeDesign, t: int, idx: int, bet: float, y: int) -> dict:
        eg = rt.policy.e_grid
        u, d = project_update(eg, idx, bet, rt.spec.theta0)
        nidx = u if y == 1 else d
        zone = classify_zone(EState(t + 1, float(eg.values[nidx])), rt.spec)
        return {
            "outcome": y,
            "e_value_discrete": float(eg.values[nidx]),
            "zone": zone.value,
            "conditional_power": float(rt.cp_table[t + 1, nidx]),
        }

    @app.post("/designs", dependencies=[auth])
    def create_design(request: DesignRequest):
        try:
            _spec_from_body(request.design)
        except ValueError as exc:
            raise HTTPException(422, str(exc))
        design_id = _design_hash(request)
        existing = store.design_summary(design_id)
        if existing is not None:
            return {"design_id": design_id, **existing}
        with solve_lock:
            existing = store.design_summary(design_id)
            if existing is not None:
                return {"design_id": design_id, **existing}
            try:
                policy, summary = _solve(request)
            except HTTPException:
                raise
            except ValueError as exc:
                raise HTTPException(422, str(exc))
            except Exception as exc:  # solver failures surface as 500
                raise HTTPException(500, f"solver error: {exc}")
            store.put_design(design_id, request.model_dump(), summary, policy)
        return {"design_id": design_id, **summary}

    @app.get("/designs/{design_id}", dependencies=[auth])
    def get_design(design_id: str):
        rt = load_runtime(design_id)
        return {"design_id": design_id, **rt.summary}

    @app.get("/designs/{design_id}/policy", dependencies=[auth])
    def get_policy(design_id: str):
        rt = load_runtime(design_id)
        policy = rt.policy
        spec = rt.spec
        eg = policy.e_grid
        bets = policy.bet_grid.values
        zone_codes = {
            "rejected": "R",
            "hopeless": "H",
            "almost_hopeless": "A",
            "open": "O",
            "bankrupt": "B",
        }
        actions = []
        zones = []
        for t in range(spec.n):
            row = policy.actions[t]
            actions.append(
                [None if c == STOP_CODE else float(bets[c]) for c in row]
            )
            zones.append(
                "".join(
                    zone_codes[classify_zone(EState(t, float(v)), spec).value]
                    for v in eg.values
                )
            )
        from .betting import diagnostic_bounds

        bounds = diagnostic_bounds(spec)
        sched = spec.blocks
        return {
            "schema_version": SCHEMA_VERSION,
            "design_id": design_id,
            "stages": spec.n,
            "e_values": [float(v) for v in eg.values],
            "actions": actions,
            "zones": zones,
            "m_upper": [float(v) for v in bounds.m_upper],
            "m_lower": [float(v) for v in bounds.m_lower],
            "analysis_points": (
                list(range(spec.n + 1)) if sched is None else [0, *sched.cumulative]
            ),
        }

    @app.get("/designs/{design_id}/oc", dependencies=[auth])
    def get_oc(design_id: str, theta: float):
        rt = load_runtime(design_id)
        if not 0.0 < theta < 1.0:
            raise HTTPException(422, "theta must lie in (0, 1)")
        key = (design_id, theta)
        if key not in oc_cache:
            profile = forward_oc(rt.policy, theta, spec=rt.spec)
            oc_cache[key] = {
                "schema_version": SCHEMA_VERSION,
                "design_id": design_id,
                "theta": theta,
                "cumulative_rejection": profile.cumulative_rejection.tolist(),
                "cumulative_futility": profile.cumulative_futility.tolist(),
                "ahz_occupancy": profile.ahz_occupancy.tolist(),
                "ess": profile.ess,
                "analysis_points": profile.analysis_points,
            }
        return oc_cache[key]

    @app.post("/sessions", dependencies=[auth])
    def create_session(request: SessionRequest):
        rt = load_runtime(request.design_id)
        session_id = uuid.uuid4().hex[:12]
        row = SessionRow(
            id=session_id,
            design_id=request.design_id,
            status=STATUS_OPEN,
            seq=0,
            t=0,
            state_index=rt.policy.e_grid.index_of_one,
            e_cont=1.0,
        )
        store.create_session(row)
        return session_view(session_id)

    def get_session_or_404(session_id: str) -> SessionRow:
        row = store.get_session(session_id)
        if row is None:
            raise HTTPException(404, f"unknown session {session_id}")
        return row

    @app.post("/sessions/{session_id}/outcomes", dependencies=[auth])
    def advance_session(session_id: str, body: OutcomeBody):
        if body.y not in (0, 1):
            raise HTTPException(400, "outcome must be 0 or 1")
        with session_lock(session_id):
            session = get_session_or_404(session_id)
            if session.status != STATUS_OPEN:
                raise HTTPException(409, f"session is {session.status}")
            rt = load_runtime(session.design_id)
            spec = rt.spec
            eg = rt.policy.e_grid
            code, stop_pending = effective_action(rt, session)
            if code == STOP_CODE:
                # un-overridden stop recommendation: the stop is applied and
                # the submitted outcome is not consumed
                zone = classify_zone(
                    EState(session.t, float(eg.values[session.state_index])), spec
                ).value
                event = EventRow(
                    session_id=session_id,
                    seq=session.seq + 1,
                    outcome=None,
                    action_kind="stop",
                    bet=None,
                    e_cont=session.e_cont,
                    e_index=session.state_index,
                    zone=zone,
                    conditional_power=0.0,
                    status=STATUS_STOPPED,
                    override_used=False,
                )
                snapshot = SessionRow(
                    id=session_id,
                    design_id=session.design_id,
                    status=STATUS_STOPPED,
                    seq=session.seq + 1,
                    t=session.t,
                    state_index=session.state_index,
                    e_cont=session.e_cont,
                )
                store.append_event(event, snapshot)
                return event_json(rt, event)
            bet = float(rt.policy.bet_grid.values[code])
            y = body.y
            u, d = project_update(eg, session.state_index, bet, spec.theta0)
            new_idx = u if y == 1 else d
            mult = 1.0 + bet * (1.0 / spec.theta0 - 1.0) if y == 1 else 1.0 - bet
            new_cont = session.e_cont * mult
            new_t = session.t + 1
            zone = classify_zone(EState(new_t, float(eg.values[new_idx])), spec)
            if new_idx == eg.top_index:
                status = STATUS_REJECTED
            elif new_idx == 0:
                status = STATUS_BANKRUPT
            elif new_t == spec.n:
                status = STATUS_COMPLETED
            elif zone.value == "hopeless":
                status = STATUS_STOPPED  # binding: the boundary is unreachable
            else:
                status = STATUS_OPEN
            event = EventRow(
                session_id=session_id,
                seq=session.seq + 1,
                outcome=y,
                action_kind="bet",
                bet=bet,
                e_cont=new_cont,
                e_index=new_idx,
                zone=zone.value,
                conditional_power=float(rt.cp_table[new_t, new_idx]),
                status=status,
                override_used=stop_pending,
            )
            snapshot = SessionRow(
                id=session_id,
                design_id=session.design_id,
                status=status,
                seq=session.seq + 1,
                t=new_t,
                state_index=new_idx,
                e_cont=new_cont,
            )
            store.append_event(event, snapshot)
            return event_json(rt, event)

    def session_view(session_id: str) -> dict:
        session = get_session_or_404(session_id)
        rt = load_runtime(session.design_id)
        spec = rt.spec
        eg = rt.policy.e_grid
        events = store.list_events(session_id)
        zone = classify_zone(
            EState(session.t, float(eg.values[session.state_index])), spec
        )
        recommended: Optional[dict] = None
        stop_pending = False
        if session.status == STATUS_OPEN and session.t < spec.n:
            code, stop_pending = effective_action(rt, session)
            if code == STOP_CODE:
                recommended = {"kind": "stop", "advisory": True, "overridden": False}
            else:
                recommended = {
                    "kind": "bet",
                    "bet": float(rt.policy.bet_grid.values[code]),
                    "advisory": False,
                    "overridden": stop_pending,
                }
        boundary = True
        if spec.blocks is not None:
            boundary = spec.blocks.is_boundary(session.t)
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": session_id,
            "design_id": session.design_id,
            "strategy": rt.summary.get("strategy"),
            "status": session.status,
            "t": session.t,
            "n": spec.n,
            "e_value": session.e_cont,
            "e_value_discrete": float(eg.values[session.state_index]),
            "zone": zone.value,
            "conditional_power": float(rt.cp_table[session.t, session.state_index]),
            "recommended_action": recommended,
            "stop_pending": stop_pending,
            "at_block_boundary": boundary,
            "overrides": store.list_overrides(session_id),
            "events": [event_json(rt, e) for e in events],
            "outcomes": [e.outcome for e in events if e.outcome is not None],
        }

    @app.get("/sessions/{session_id}", dependencies=[auth])
    def get_session(session_id: str):
        return session_view(session_id)

    @app.get("/sessions/{session_id}/whatif", dependencies=[auth])
    def whatif(session_id: str):
        session = get_session_or_404(session_id)
        if session.status != STATUS_OPEN:
            raise HTTPException(409, f"session is {session.status}")
        rt = load_runtime(session.design_id)
        code, stop_pending = effective_action(rt, session)
        if code == STOP_CODE:
            code = masked_best_bet(rt, session.t, session.state_index)
        bet = float(rt.policy.bet_grid.values[code])
        up = branch_summary(rt, session.t, session.state_index, bet, 1)
        down = branch_summary(rt, session.t, session.state_index, bet, 0)
        cp_mix = (
            rt.spec.theta1 * up["conditional_power"]
            + (1.0 - rt.spec.theta1) * down["conditional_power"]
        )
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": session_id,
            "bet": bet,
            "stop_pending": stop_pending,
            "success": up,
            "failure": down,
            "conditional_power_current": cp_mix,
            "conditional_power_policy": float(
                rt.cp_table[session.t, session.state_index]
            ),
        }

    @app.post("/sessions/{session_id}/override-stop", dependencies=[auth])
    def override_stop(session_id: str):
        with session_lock(session_id):
            session = get_session_or_404(session_id)
            if session.status != STATUS_OPEN:
                raise HTTPException(409, f"session is {session.status}")
            store.add_override(session_id, session.t)
        return session_view(session_id)

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    ui_dir = os.environ.get("EVDESIGN_UI_DIR")
    if ui_dir and os.path.isdir(ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    app.state.store = store
    return app


def main():  # pragma: no cover - convenience launcher
    import uvicorn

    uvicorn.run(create_app(), host="127.0.0.1", port=8008)


if __name__ == "__main__":  # pragma: no cover
    main()
