"""HTTP surfaces: one app for the floor monitor, one for the coordinator.

Both factories take the shared runtime stack and return FastAPI apps.
Request bodies are plain JSON dicts validated by the underlying types,
keeping the wire format identical to the library objects' serialized
form. The two apps are separate so deployments can run them in one
process (the demo default, webhook wired in-process) or on separate
hosts with a real HTTP hop between them.
"""

from __future__ import annotations

import logging
from contextlib import asynccontextmanager
from typing import TYPE_CHECKING, Any

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .envelope import Envelope
from .inspector import HttpInspector, HttpInspectorConfig, make_inspector
from .rules import Category
from .sentinel import MODES, Alert

if TYPE_CHECKING:
    from .runtime import Stack

logger = logging.getLogger(__name__)


async def _read_json(request: Request) -> tuple[dict[str, Any] | None, JSONResponse | None]:
    try:
        body = await request.json()
    except Exception:
        return None, JSONResponse({"detail": "body must be JSON"}, status_code=400)
    if not isinstance(body, dict):
        return None, JSONResponse({"detail": "body must be a JSON object"}, status_code=400)
    return body, None


def create_sentinel_app(stack: Stack) -> FastAPI:
    """Monitor-facing API: ingress, analysis, and alert streams.

    The lifespan hook starts the monitor loop if nothing else has, so
    the app is self-contained under any ASGI server; embedders that
    start the stack themselves keep ownership of its shutdown.
    """

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        started_here = stack.ensure_started()
        yield
        if started_here:
            await stack.aclose()

    app = FastAPI(
        title="floor monitor", docs_url=None, redoc_url=None, lifespan=lifespan
    )

    async def _gated_publish(envelope: Envelope) -> Envelope | None:
        if stack.coordinator is not None:
            return await stack.coordinator.gate_publish(envelope)
        return await stack.floor.publish(envelope)

    @app.post("/publish")
    async def publish(request: Request):
        body, err = await _read_json(request)
        if err is not None:
            return err
        try:
            envelope = Envelope.from_dict(body)
        except ValueError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=400)
        delivered = await _gated_publish(envelope)
        if delivered is None:
            return JSONResponse(
                {"published": False, "detail": "sender is quarantined"},
                status_code=403,
            )
        return {"published": True, "envelope": delivered.to_dict()}

    @app.post("/analyze")
    async def analyze(request: Request):
        body, err = await _read_json(request)
        if err is not None:
            return err
        try:
            envelope = Envelope.from_dict(body)
        except ValueError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=400)
        alert = await stack.sentinel.analyze(envelope.stamped())
        return alert.to_dict()

    @app.get("/alerts")
    async def alerts(limit: int | None = None):
        recent = stack.sentinel.broadcaster.recent(limit)
        return {"alerts": [a.to_dict() for a in recent]}

    @app.websocket("/ws/alerts")
    async def ws_alerts(websocket: WebSocket):
        await websocket.accept()
        queue = stack.sentinel.broadcaster.subscribe()
        try:
            while True:
                alert = await queue.get()
                await websocket.send_json(alert.to_dict())
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            stack.sentinel.broadcaster.unsubscribe(queue)

    @app.websocket("/ws/publish")
    async def ws_publish(websocket: WebSocket):
        await websocket.accept()
        try:
            while True:
                data = await websocket.receive_json()
                try:
                    envelope = Envelope.from_dict(data)
                except ValueError as exc:
                    await websocket.send_json(
                        {"published": False, "detail": str(exc)}
                    )
                    continue
                delivered = await _gated_publish(envelope)
                if delivered is None:
                    await websocket.send_json(
                        {"published": False, "detail": "sender is quarantined"}
                    )
                else:
                    await websocket.send_json(
                        {"published": True, "timestamp": delivered.timestamp}
                    )
        except WebSocketDisconnect:
            pass

    @app.post("/ai/config")
    async def ai_config(request: Request):
        body, err = await _read_json(request)
        if err is not None:
            return err
        backend = body.get("backend", "stub")
        if backend not in ("stub", "http"):
            return JSONResponse(
                {"detail": f"unknown backend {backend!r}"}, status_code=400
            )
        config = None
        if backend == "http":
            base = HttpInspectorConfig()
            try:
                config = HttpInspectorConfig(
                    base_url=body.get("base_url", base.base_url),
                    model=body.get("model", base.model),
                    api_key_env=body.get("api_key_env", base.api_key_env),
                    timeout_seconds=float(
                        body.get("timeout_seconds", base.timeout_seconds)
                    ),
                    max_retries=int(body.get("max_retries", base.max_retries)),
                    temperature=float(
                        body.get("temperature", base.temperature)
                    ),
                )
            except (TypeError, ValueError) as exc:
                return JSONResponse({"detail": str(exc)}, status_code=400)
        old = stack.sentinel.inspector
        stack.sentinel.inspector = make_inspector(backend, config=config)
        if isinstance(old, HttpInspector):
            await old.aclose()
        return {
            "backend": backend,
            "config": config.to_dict() if config is not None else None,
        }

    @app.post("/coordinator/config")
    async def coordinator_config(request: Request):
        body, err = await _read_json(request)
        if err is not None:
            return err
        if "mode" in body:
            mode = body["mode"]
            if mode not in MODES:
                return JSONResponse(
                    {"detail": f"mode must be one of {list(MODES)}"},
                    status_code=400,
                )
            stack.sentinel.mode = mode
        if "blocking_categories" in body:
            try:
                cats = frozenset(
                    Category(c) for c in body["blocking_categories"]
                )
            except ValueError as exc:
                return JSONResponse({"detail": str(exc)}, status_code=400)
            stack.sentinel.blocking_categories = cats
        if "webhook_url" in body or "webhook_max_attempts" in body:
            try:
                await stack.reconfigure_webhook(
                    url=body.get("webhook_url"),
                    max_attempts=body.get("webhook_max_attempts"),
                )
            except ValueError as exc:
                return JSONResponse({"detail": str(exc)}, status_code=400)
        return {
            "mode": stack.sentinel.mode,
            "blocking_categories": sorted(
                c.value for c in stack.sentinel.blocking_categories
            ),
            "webhook_url": (
                stack.sentinel.webhook.url
                if stack.sentinel.webhook is not None
                else None
            ),
        }

    return app


def create_coordinator_app(stack: Stack) -> FastAPI:
    """Coordinator-facing API: alert intake, scenario control, status."""
    app = FastAPI(title="floor coordinator", docs_url=None, redoc_url=None)

    @app.post("/sentinel-alerts")
    async def sentinel_alerts(request: Request):
        body, err = await _read_json(request)
        if err is not None:
            return err
        try:
            alert = Alert.from_dict(body)
        except (KeyError, TypeError, ValueError) as exc:
            return JSONResponse(
                {"detail": f"malformed alert: {exc}"}, status_code=400
            )
        quarantined = await stack.coordinator.handle_alert(alert)
        return {"accepted": True, "quarantined": quarantined}

    @app.post("/start")
    async def start(request: Request):
        if stack.scenario_running:
            return JSONResponse(
                {"detail": "scenario already running"}, status_code=409
            )
        runner = stack.start_scenario()
        return {"started": True, "scenario": runner.scenario.name}

    @app.post("/stop")
    async def stop():
        stopped = await stack.stop_scenario()
        return {"stopped": stopped}

    @app.get("/status")
    async def status():
        info = stack.coordinator.status()
        info["scenario_running"] = stack.scenario_running
        info["mode"] = stack.sentinel.mode
        info["published"] = stack.floor.published
        info["analyzed"] = stack.sentinel.stats.analyzed
        info["flagged"] = stack.sentinel.stats.flagged
        info["blocked"] = stack.sentinel.stats.blocked
        return info

    @app.post("/quarantine/release/{sender}")
    async def release(sender: str):
        if not stack.coordinator.release(sender):
            return JSONResponse(
                {"detail": f"{sender!r} is not quarantined"}, status_code=404
            )
        return {"released": sender}

    return app
