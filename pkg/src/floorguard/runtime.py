"""Assembly of the full stack: floor, monitor, coordinator, HTTP apps.

``build_stack`` wires every component with sane defaults and returns a
``Stack`` handle owning their lifecycles. By default the coordinator
webhook is served in-process over an ASGI transport, so the demo runs
the full alert-to-quarantine loop with real HTTP semantics and no open
ports; pointing ``webhook_url`` at a real endpoint splits the two apps
across processes.
"""

from __future__ import annotations

import asyncio
import logging
import os
from pathlib import Path

import httpx

from .behavior import DEFAULT_THRESHOLD, DEFAULT_WINDOW_SECONDS, BehaviorTracker
from .coordinator import Coordinator, Policy
from .floor import DEFAULT_HIGH_WATER, AuditLog, Floor
from .inspector import HttpInspector, HttpInspectorConfig, make_inspector
from .rules import compile_catalog, load_rules
from .scenario import Scenario, ScenarioRunner, load_scenario
from .sentinel import (
    DEFAULT_BLOCKING_CATEGORIES,
    AlertBroadcaster,
    AnalyzedHook,
    DeliverHook,
    Sentinel,
)
from .service import create_coordinator_app, create_sentinel_app
from .webhook import DEFAULT_MAX_ATTEMPTS, WebhookSender

logger = logging.getLogger(__name__)

ENV_FLOOR_LOG = "FLOOR_LOG"
ENV_WEBHOOK_URL = "COORDINATOR_WEBHOOK_URL"
ENV_WEBHOOK_MAX_ATTEMPTS = "COORDINATOR_WEBHOOK_MAX_ATTEMPTS"

# Marker URL for the in-process coordinator hop.
INTERNAL_WEBHOOK_URL = "http://coordinator.internal/sentinel-alerts"


class Stack:
    """Owns one wired floor-monitor-coordinator trio and its HTTP apps."""

    def __init__(
        self,
        floor: Floor,
        audit: AuditLog | None,
        coordinator: Coordinator,
        scenario: Scenario,
        time_scale: float = 1.0,
    ):
        self.floor = floor
        self.audit = audit
        self.coordinator = coordinator
        self.scenario = scenario
        self.time_scale = time_scale
        self.sentinel: Sentinel = None  # type: ignore[assignment]  # set by build_stack
        self.coordinator_app = create_coordinator_app(self)
        self.sentinel_app = None
        self._owned_clients: list[httpx.AsyncClient] = []
        self._scenario_task: asyncio.Task[None] | None = None
        self._runner: ScenarioRunner | None = None

    # -- webhook wiring --------------------------------------------------

    def internal_webhook(self, max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> WebhookSender:
        """Webhook sender that reaches the coordinator app in-process."""
        client = httpx.AsyncClient(
            transport=httpx.ASGITransport(app=self.coordinator_app),
            base_url="http://coordinator.internal",
        )
        self._owned_clients.append(client)
        return WebhookSender(
            INTERNAL_WEBHOOK_URL, max_attempts=max_attempts, client=client
        )

    async def reconfigure_webhook(
        self, url: str | None = None, max_attempts: int | None = None
    ) -> None:
        old = self.sentinel.webhook
        if max_attempts is None:
            max_attempts = old.max_attempts if old is not None else DEFAULT_MAX_ATTEMPTS
        max_attempts = int(max_attempts)
        if url is None and old is not None:
            url = old.url
        if url is None:
            self.sentinel.webhook = None
        elif url == INTERNAL_WEBHOOK_URL:
            self.sentinel.webhook = self.internal_webhook(max_attempts)
        else:
            self.sentinel.webhook = WebhookSender(url, max_attempts=max_attempts)
        if old is not None:
            await old.aclose()

    # -- scenario control --------------------------------------------------

    @property
    def scenario_running(self) -> bool:
        return self._scenario_task is not None and not self._scenario_task.done()

    def start_scenario(self) -> ScenarioRunner:
        if self.scenario_running:
            raise RuntimeError("scenario already running")
        runner = ScenarioRunner(
            self.scenario,
            self.floor,
            self.sentinel,
            self.coordinator,
            time_scale=self.time_scale,
        )
        self._runner = runner
        self._scenario_task = asyncio.create_task(runner.run())
        return runner

    async def stop_scenario(self) -> bool:
        task = self._scenario_task
        if task is None:
            return False
        if not task.done():
            task.cancel()
        try:
            await task
        except asyncio.CancelledError:
            pass
        except Exception:
            logger.exception("scenario task failed")
        self._scenario_task = None
        return True

    async def wait_scenario(self) -> ScenarioRunner | None:
        if self._scenario_task is not None:
            await self._scenario_task
        return self._runner

    # -- lifecycle ---------------------------------------------------------

    async def start(self) -> None:
        self.sentinel.start()

    def ensure_started(self) -> bool:
        """Start the monitor if idle; True when this call started it."""
        if not self.sentinel.started:
            self.sentinel.start()
            return True
        return False

    async def aclose(self) -> None:
        await self.stop_scenario()
        await self.sentinel.stop()
        if self.sentinel.webhook is not None:
            await self.sentinel.webhook.aclose()
        if isinstance(self.sentinel.inspector, HttpInspector):
            await self.sentinel.inspector.aclose()
        for client in self._owned_clients:
            await client.aclose()
        self._owned_clients.clear()
        await self.floor.close()
        if self.audit is not None:
            self.audit.close()


def build_stack(
    *,
    log_path: str | Path | None = None,
    mode: str = "passive",
    rules_path: str | Path | None = None,
    burst_window: float = DEFAULT_WINDOW_SECONDS,
    burst_threshold: int = DEFAULT_THRESHOLD,
    inspector_backend: str = "stub",
    inspector_config: HttpInspectorConfig | None = None,
    policy: Policy | None = None,
    decision_delay_seconds: float = 0.0,
    webhook_url: str | None = None,
    webhook_max_attempts: int | None = None,
    scenario_path: str | Path | None = None,
    time_scale: float = 1.0,
    audit_all: bool = False,
    high_water: int = DEFAULT_HIGH_WATER,
    on_deliver: DeliverHook | None = None,
    on_analyzed: AnalyzedHook | None = None,
) -> Stack:
    """Wire every component; call ``await stack.start()`` inside a loop."""
    if log_path is None:
        log_path = os.environ.get(ENV_FLOOR_LOG) or None
    audit = AuditLog(log_path) if log_path else None
    floor = Floor(audit=audit, high_water=high_water)

    coordinator = Coordinator(
        floor,
        policy=policy,
        decision_delay_seconds=decision_delay_seconds,
    )
    scenario = load_scenario(scenario_path)
    stack = Stack(floor, audit, coordinator, scenario, time_scale=time_scale)

    if webhook_url is None:
        webhook_url = os.environ.get(ENV_WEBHOOK_URL) or None
    if webhook_max_attempts is None:
        env_attempts = os.environ.get(ENV_WEBHOOK_MAX_ATTEMPTS)
        webhook_max_attempts = int(env_attempts) if env_attempts else DEFAULT_MAX_ATTEMPTS
    if webhook_url is None or webhook_url == INTERNAL_WEBHOOK_URL:
        webhook = stack.internal_webhook(webhook_max_attempts)
    else:
        webhook = WebhookSender(webhook_url, max_attempts=webhook_max_attempts)

    catalog = compile_catalog(load_rules(rules_path) if rules_path else None)
    sentinel = Sentinel(
        floor,
        catalog=catalog,
        behavior=BehaviorTracker(
            window_seconds=burst_window, threshold=burst_threshold
        ),
        inspector=make_inspector(inspector_backend, config=inspector_config),
        webhook=webhook,
        broadcaster=AlertBroadcaster(),
        mode=mode,
        blocking_categories=DEFAULT_BLOCKING_CATEGORIES,
        on_deliver=on_deliver,
        on_analyzed=on_analyzed,
        audit_all=audit_all,
    )
    stack.sentinel = sentinel
    stack.sentinel_app = create_sentinel_app(stack)
    return stack


async def run_demo(stack: Stack) -> ScenarioRunner:
    """Start the stack, play its scenario to completion, return the runner."""
    stack.ensure_started()
    stack.start_scenario()
    runner = await stack.wait_scenario()
    assert runner is not None
    return runner


async def serve(stack: Stack, sentinel_port: int, coordinator_port: int) -> None:
    """Serve both apps with uvicorn until cancelled."""
    import uvicorn

    stack.ensure_started()
    servers = [
        uvicorn.Server(
            uvicorn.Config(
                stack.sentinel_app,
                host="127.0.0.1",
                port=sentinel_port,
                log_level="warning",
            )
        ),
        uvicorn.Server(
            uvicorn.Config(
                stack.coordinator_app,
                host="127.0.0.1",
                port=coordinator_port,
                log_level="warning",
            )
        ),
    ]
    try:
        await asyncio.gather(*(server.serve() for server in servers))
    finally:
        await stack.aclose()
