"""HTTP facade over the explanation engine.

JSON in, JSON out, ISO-8601 UTC timestamps throughout. Domain errors map
to ``{code, message}`` bodies with a stable status per error code, so
clients can branch on ``code`` without parsing prose.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Mapping

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .context import UserProfile
from .engine import ExplanationEngine
from .errors import ValidationError, WhyhubError
from .eventlog import EventRecord, rule_from_dict, rule_to_dict
from .timeutil import MINUTE_MS, format_instant, parse_instant

logger = logging.getLogger(__name__)

_STATUS_FOR_CODE = {
    "validation_error": 400,
    "range_error": 400,
    "scenario_validation_error": 400,
    "unknown_user": 404,
    "unknown_rule": 404,
    "action_not_found": 404,
    "nothing_to_explain": 404,
    "conflict": 409,
    "ambiguous_cause": 409,
    "provider_unavailable": 503,
    "storage_error": 500,
    "policy_config_error": 500,
    "template_slot_error": 500,
}


def create_app(engine: ExplanationEngine, *, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="whyhub", docs_url=None, redoc_url=None)

    @app.exception_handler(WhyhubError)
    async def _domain_error(_: Request, exc: WhyhubError) -> JSONResponse:
        status = _STATUS_FOR_CODE.get(exc.code, 500)
        return JSONResponse(status_code=status, content={"code": exc.code, "message": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _request_error(_: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"code": "validation_error", "message": str(exc.errors())}
        )

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    # -- events -------------------------------------------------------------

    @app.post("/events")
    def post_event(payload: dict = Body(...)) -> dict[str, Any]:
        record = EventRecord.from_dict(payload)
        result = engine.post_event(record)
        return {
            "seq": result.seq,
            "fired_rules": [f.rule.id for f in result.firings],
        }

    @app.get("/events")
    def get_events(request: Request) -> dict[str, Any]:
        params = request.query_params
        now = engine.clock()
        start = parse_instant(params["from"]) if "from" in params else now - 60 * MINUTE_MS
        end = parse_instant(params["to"]) if "to" in params else now
        window = engine.log.window(start, end)
        return {
            "from": format_instant(start),
            "to": format_instant(end),
            "events": [record.to_dict() for record in window.records],
        }

    # -- rules ----------------------------------------------------------------

    @app.put("/rules")
    def put_rule(payload: dict = Body(...)) -> dict[str, Any]:
        rule = rule_from_dict(payload)
        engine.put_rule(rule)
        return {"id": rule.id}

    @app.get("/rules")
    def get_rules() -> dict[str, Any]:
        return {"rules": [rule_to_dict(rule) for rule in engine.rules.current()]}

    @app.delete("/rules/{rule_id}")
    def delete_rule(rule_id: str) -> dict[str, Any]:
        engine.delete_rule(rule_id)
        return {"id": rule_id, "deleted": True}

    # -- users ----------------------------------------------------------------

    @app.put("/users")
    def put_user(payload: dict = Body(...)) -> dict[str, Any]:
        profile = UserProfile.from_dict(payload)
        engine.put_user(profile)
        return {"id": profile.id}

    @app.get("/users")
    def get_users() -> dict[str, Any]:
        return {"users": [profile.to_dict() for profile in engine.users.all()]}

    # -- user state seam -------------------------------------------------------

    @app.get("/state")
    def get_state(request: Request) -> dict[str, str]:
        params = request.query_params
        user_id = params.get("user_id")
        if not user_id:
            raise ValidationError("user_id query parameter is required")
        at = parse_instant(params["at"]) if "at" in params else engine.clock()
        return {"state": engine.context.fetch_user_state(user_id, at).value}

    # -- explanations ------------------------------------------------------------

    @app.post("/explanations")
    def post_explanation(payload: dict = Body(...)) -> dict[str, Any]:
        if "user_id" not in payload:
            raise ValidationError("user_id is required")
        debug = bool(payload.get("debug", False))
        overrides = payload.get("context_overrides")
        if overrides is not None and not isinstance(overrides, Mapping):
            raise ValidationError("context_overrides must be an object")
        at = parse_instant(payload["at"]) if "at" in payload else None
        outcome = engine.explain(
            str(payload["user_id"]),
            entity=payload.get("entity"),
            action=payload.get("action"),
            at=at,
            debug=debug,
            context_overrides=overrides,
        )
        return outcome.to_dict(debug=debug)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="dashboard")

    return app
