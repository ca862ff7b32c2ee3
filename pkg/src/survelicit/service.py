"""HTTP JSON API hosting interactive elicitation sessions.

Serves the prior-only phase: quartile entry with immediate refitting and
prior-predictive previews.  No endpoint touches outcome data, so experts
cannot see analysis results while stating their beliefs.  Sessions live in
memory and are snapshotted to JSON on every write.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import families as fam
from .data_io import RunConfig
from .elicitation import (
    QUANTITY_NAMES,
    ConstraintSet,
    ElicitedQuantity,
    PriorSpec,
    sample_prior,
)
from .errors import InfeasibleSpecError, ValidationError

DEFAULT_PREVIEW_DRAWS = 20_000
PREVIEW_GRID_YEARS = 30.0
PREVIEW_GRID_POINTS = 61


class QuartilesIn(BaseModel):
    q25: float
    q50: float
    q75: float
    kind: str = "beta"
    support: tuple[float, float] | None = None


class SessionCreate(BaseModel):
    t0: float = 5.0
    t1: float = 10.0
    x0: float = 0.0
    constraints: dict | None = None


@dataclass
class ElicitationSession:
    id: str
    t0: float
    t1: float
    x0: float
    constraints: ConstraintSet
    quantities: dict[str, ElicitedQuantity] = field(default_factory=dict)
    version: int = 0  # bumped on every quantity change; keys the preview cache
    preview_cache: dict = field(default_factory=dict)
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)

    def spec(self) -> PriorSpec:
        missing = [n for n in QUANTITY_NAMES if n not in self.quantities]
        if missing:
            raise ValidationError(f"session is missing quantities: {missing}")
        return PriorSpec(
            t0=self.t0, t1=self.t1, x0=self.x0,
            quantities=dict(self.quantities),
            constraints=self.constraints,
        )

    def state(self) -> dict:
        out = {
            "id": self.id,
            "t0": self.t0,
            "t1": self.t1,
            "x0": self.x0,
            "version": self.version,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "quantities": {},
        }
        for name, q in self.quantities.items():
            out["quantities"][name] = {
                "q25": q.q25,
                "q50": q.q50,
                "q75": q.q75,
                "distribution": q.dist.label(),
                "fit_residual": q.fit_residual,
            }
        return out


def _fit_payload(q: ElicitedQuantity) -> dict:
    dist = q.dist
    kind = type(dist).__name__
    params: dict[str, float] = {}
    if kind == "BetaDist":
        params = {"alpha": dist.alpha, "beta": dist.beta}
    elif kind == "NormalDist":
        params = {"mean": dist.mean, "sd": dist.sd}
    elif kind == "ScaledBetaDist":
        params = {"alpha": dist.alpha, "beta": dist.beta, "lo": dist.lo, "hi": dist.hi}
    elif kind == "PointMassDist":
        params = {"value": dist.value}
    return {
        "name": q.name,
        "distribution": q.dist.label(),
        "params": params,
        "fit_residual": q.fit_residual,
    }


def create_app(snapshot_dir: str | Path | None = None, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="survelicit elicitation service")
    sessions: dict[str, ElicitationSession] = {}
    snapshot_path = Path(snapshot_dir) if snapshot_dir else None

    def snapshot(session: ElicitationSession) -> None:
        if snapshot_path is None:
            return
        snapshot_path.mkdir(parents=True, exist_ok=True)
        (snapshot_path / f"{session.id}.json").write_text(
            json.dumps(session.state(), indent=2)
        )

    def get_session(session_id: str) -> ElicitationSession:
        if session_id not in sessions:
            raise ValidationError(f"unknown session {session_id}")
        return sessions[session_id]

    @app.exception_handler(ValidationError)
    async def validation_handler(request: Request, exc: ValidationError):
        status = 404 if str(exc).startswith("unknown session") else 422
        return JSONResponse(
            status_code=status,
            content={"code": "validation_error", "message": str(exc)},
        )

    @app.exception_handler(InfeasibleSpecError)
    async def infeasible_handler(request: Request, exc: InfeasibleSpecError):
        return JSONResponse(
            status_code=409,
            content={
                "code": "infeasible_spec",
                "message": str(exc),
                "constraint": exc.worst_constraint,
            },
        )

    @app.post("/sessions")
    def create_session(body: SessionCreate | None = None):
        body = body or SessionCreate()
        constraints = ConstraintSet(**(body.constraints or {}))
        if not (0 <= body.x0 < body.t0 < body.t1):
            raise ValidationError("need 0 <= x0 < t0 < t1")
        sid = uuid.uuid4().hex[:12]
        session = ElicitationSession(
            id=sid, t0=body.t0, t1=body.t1, x0=body.x0, constraints=constraints
        )
        sessions[sid] = session
        snapshot(session)
        return {"id": sid, "t0": session.t0, "t1": session.t1}

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str):
        return get_session(session_id).state()

    @app.put("/sessions/{session_id}/quantities/{name}")
    def put_quantity(session_id: str, name: str, body: QuartilesIn):
        session = get_session(session_id)
        if name not in QUANTITY_NAMES:
            raise ValidationError(
                f"unknown quantity {name!r}; expected one of {QUANTITY_NAMES}"
            )
        try:
            # point masses are a programmatic construct; elicited quartiles
            # must be strictly increasing
            if not (body.q25 < body.q50 < body.q75):
                raise ValidationError(
                    f"quartiles must be strictly increasing, got "
                    f"({body.q25}, {body.q50}, {body.q75})"
                )
            quantity = ElicitedQuantity.from_quartiles(
                name, body.q25, body.q50, body.q75,
                kind=body.kind, support=body.support,
            )
        except ValidationError as exc:
            return JSONResponse(
                status_code=422,
                content={"code": "invalid_quartiles", "field": name, "message": str(exc)},
            )
        session.quantities[name] = quantity
        session.version += 1
        session.preview_cache.clear()  # stale previews must not survive edits
        session.updated_at = time.time()
        snapshot(session)
        return _fit_payload(quantity)

    @app.get("/sessions/{session_id}/preview")
    def get_preview(session_id: str, family: str, seed: int = 0,
                    n: int = DEFAULT_PREVIEW_DRAWS):
        session = get_session(session_id)
        family = fam.coerce_family(family)
        key = (session.version, family.value, seed, n)
        if key in session.preview_cache:
            return session.preview_cache[key]
        spec = session.spec()
        draws = sample_prior(family, spec, n, seed=seed)
        grid = np.linspace(0.0, PREVIEW_GRID_YEARS, PREVIEW_GRID_POINTS)
        arms = {}
        for arm in (1, 2):
            theta = draws.arm_params(arm)
            s = np.exp(fam.logsf(family, theta[:, None, :], grid[None, :]))
            med, lo, hi = np.percentile(s, [50.0, 5.0, 95.0], axis=0)
            with np.errstate(all="ignore"):
                means = fam.mean(family, theta)
            means = means[np.isfinite(means)]
            arms[str(arm)] = {
                "median": [float(v) for v in med],
                "lo": [float(v) for v in lo],
                "hi": [float(v) for v in hi],
                "mean_quartiles": [float(v) for v in np.percentile(means, [25, 50, 75])],
            }
        payload = {
            "family": family.value,
            "seed": seed,
            "n_preview": n,
            "grid_years": [float(g) for g in grid],
            "arms": arms,
            "acceptance_rate": draws.acceptance_rate,
            "violations": {
                k: int(v) for k, v in sorted(draws.rejections.items()) if v > 0
            },
            "n_proposed": draws.n_proposed,
            "session_version": session.version,
        }
        session.preview_cache[key] = payload
        return payload

    @app.get("/sessions/{session_id}/export")
    def export_config(session_id: str):
        session = get_session(session_id)
        spec = session.spec()
        cfg = RunConfig(prior=spec)
        return cfg.to_dict()

    if static_dir and Path(static_dir).exists():
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def _default_static_dir():
    import os

    env = os.environ.get("SURVELICIT_UI_DIR")
    if env:
        return env
    candidate = Path(__file__).resolve().parents[2] / "frontend"
    return candidate if candidate.exists() else None


def _default_snapshot_dir():
    import os

    return os.environ.get("SURVELICIT_SESSION_DIR", "sessions")


app = create_app(
    snapshot_dir=_default_snapshot_dir(), static_dir=_default_static_dir()
)
