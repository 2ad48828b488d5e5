"""Scripted multi-agent demo played against a fully wired stack.

The bundled travel-planning script has three benign-looking agents; one
of them turns hostile mid-run with an instruction-override message, then
leaks contact details, and keeps talking until the coordinator's
quarantine gate silences it. Scripts are plain JSON so new scenarios
need no code.
"""

from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .coordinator import COORDINATOR_SENDER, STATUS_MSG_TYPE, Coordinator
from .envelope import Envelope
from .floor import Floor
from .sentinel import Sentinel

logger = logging.getLogger(__name__)

DEFAULT_SCENARIO = "scenario_travel"

ONLINE_BANNER = "[Coordinator] Orchestrator online -- starting agents"


@dataclass(frozen=True)
class ScriptStep:
    """One scripted utterance. ``delay_seconds`` is the offset from start."""

    delay_seconds: float
    sender: str
    msg_type: str
    content: str
    metadata: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ScriptStep:
        return cls(
            delay_seconds=float(data.get("delay_seconds", 0.0)),
            sender=data["sender"],
            msg_type=data["type"],
            content=data.get("content", ""),
            metadata=data.get("metadata") or {},
        )


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    steps: list[ScriptStep]

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Scenario:
        steps = [ScriptStep.from_dict(s) for s in data.get("steps", [])]
        return cls(
            name=data.get("name", "scenario"),
            description=data.get("description", ""),
            steps=steps,
        )


def load_scenario(path: str | Path | None = None) -> Scenario:
    """Load a scenario JSON file; the bundled demo when path is None."""
    if path is None:
        ref = resources.files("floorguard.data").joinpath(
            f"{DEFAULT_SCENARIO}.json"
        )
        data = json.loads(ref.read_text(encoding="utf-8"))
    else:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    return Scenario.from_dict(data)


class ScenarioRunner:
    """Plays a script through the coordinator's publish gate.

    Every agent message goes through ``gate_publish`` so quarantine takes
    effect mid-script. After the last step the runner waits for the
    sentinel and coordinator to go idle, so callers observe a complete
    transcript when ``run`` returns.
    """

    def __init__(
        self,
        scenario: Scenario,
        floor: Floor,
        sentinel: Sentinel,
        coordinator: Coordinator,
        time_scale: float = 1.0,
    ):
        if time_scale <= 0:
            raise ValueError("time_scale must be positive")
        self.scenario = scenario
        self.floor = floor
        self.sentinel = sentinel
        self.coordinator = coordinator
        self.time_scale = time_scale
        self.running = False
        self.published = 0
        self.dropped = 0

    async def run(self) -> None:
        if self.running:
            raise RuntimeError("scenario already running")
        self.running = True
        try:
            await self.floor.publish(
                Envelope(
                    sender=COORDINATOR_SENDER,
                    msg_type=STATUS_MSG_TYPE,
                    content=ONLINE_BANNER,
                )
            )
            loop = asyncio.get_running_loop()
            start = loop.time()
            for step in self.scenario.steps:
                due = start + step.delay_seconds * self.time_scale
                delay = due - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
                envelope = Envelope(
                    sender=step.sender,
                    msg_type=step.msg_type,
                    content=step.content,
                    metadata=dict(step.metadata),
                )
                delivered = await self.coordinator.gate_publish(envelope)
                if delivered is None:
                    self.dropped += 1
                else:
                    self.published += 1
            await self.settle()
        finally:
            self.running = False

    async def settle(self, timeout: float = 15.0) -> bool:
        """Wait until detection and quarantine activity has quiesced."""
        loop = asyncio.get_running_loop()
        deadline = loop.time() + timeout
        while loop.time() < deadline:
            await self.coordinator.drain()
            remaining = max(0.1, deadline - loop.time())
            if not await self.sentinel.drain(timeout=remaining):
                return False
            # A drained sentinel may have tripped a new delayed decision.
            if not self.coordinator._decision_tasks and self.sentinel.caught_up:
                return True
        return False
