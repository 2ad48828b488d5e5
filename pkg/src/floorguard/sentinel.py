"""Layered floor monitor: rules, then behavior, then model scoring.

The sentinel subscribes to the floor like any other participant and runs
every envelope through three detection layers. Cheap regex rules and the
sliding-window burst tracker always run; the model-backed inspector adds
a second opinion on injection and a hallucination check. Results merge
into one alert per message.

Flagged alerts fan out on three channels at once: a ``sentinel_alert``
envelope republished to the floor itself, an in-process broadcaster that
feeds websocket subscribers and a bounded recent-alert ring, and an
HTTP webhook with retries for an external coordinator. The sentinel can
also gate delivery: in blocking mode, flagged messages whose categories
intersect the configured blocking set never reach the downstream
deliver hook.
"""

from __future__ import annotations

import asyncio
import json
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Awaitable, Callable

from .behavior import BehaviorTracker
from .envelope import Envelope
from .floor import Floor
from .inspector import AiAssessment, StubInspector
from .rules import Category, CompiledCatalog, RuleMatch, compile_catalog
from .webhook import WebhookSender

logger = logging.getLogger(__name__)

SENTINEL_SENDER = "sentinel"
ALERT_MSG_TYPE = "sentinel_alert"

AI_PI_RULE_ID = "AI_PI"
AI_HALLU_RULE_ID = "AI_HALLU"

# Model-layer matches carry the whole message as context, capped so one
# giant payload cannot bloat the transcript.
AI_SNIPPET_LIMIT = 240

DEFAULT_BLOCKING_CATEGORIES = frozenset(
    {Category.PROMPT_INJECTION, Category.DATA_EXFILTRATION}
)

MODES = ("passive", "blocking", "hybrid")


def match_reason(match: RuleMatch) -> str:
    """Human-oriented reason string for one match."""
    return f"{match.rule_id}:{match.pattern}"


@dataclass(frozen=True)
class Alert:
    """Full analysis verdict for one envelope."""

    sender: str
    msg_type: str
    content: str
    flagged: bool
    reasons: list[str]
    matches: list[RuleMatch]
    summary: dict[str, Any]
    timestamp: float
    envelope: dict[str, Any]
    ai_raw: dict[str, Any] | None = None

    @property
    def categories(self) -> set[Category]:
        return {m.category for m in self.matches}

    @property
    def rule_ids(self) -> list[str]:
        return [m.rule_id for m in self.matches]

    def to_dict(self) -> dict[str, Any]:
        data = {
            "sender": self.sender,
            "msg_type": self.msg_type,
            "content": self.content,
            "flagged": self.flagged,
            "reasons": list(self.reasons),
            "matches": [m.to_dict() for m in self.matches],
            "summary": dict(self.summary),
            "timestamp": self.timestamp,
            "envelope": dict(self.envelope),
        }
        if self.ai_raw is not None:
            data["ai_raw"] = self.ai_raw
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Alert:
        return cls(
            sender=data["sender"],
            msg_type=data["msg_type"],
            content=data["content"],
            flagged=data["flagged"],
            reasons=list(data.get("reasons", [])),
            matches=[RuleMatch.from_dict(m) for m in data.get("matches", [])],
            summary=dict(data.get("summary", {})),
            timestamp=data["timestamp"],
            envelope=dict(data.get("envelope", {})),
            ai_raw=data.get("ai_raw"),
        )


class AlertBroadcaster:
    """Bounded recent-alert ring plus live push to async subscribers."""

    def __init__(self, capacity: int = 1000):
        self._ring: deque[Alert] = deque(maxlen=capacity)
        self._queues: list[asyncio.Queue[Alert]] = []

    def publish(self, alert: Alert) -> None:
        self._ring.append(alert)
        for queue in list(self._queues):
            queue.put_nowait(alert)

    def recent(self, limit: int | None = None) -> list[Alert]:
        alerts = list(self._ring)
        if limit is not None:
            alerts = alerts[-limit:] if limit > 0 else []
        return alerts

    def subscribe(self) -> asyncio.Queue[Alert]:
        queue: asyncio.Queue[Alert] = asyncio.Queue()
        self._queues.append(queue)
        return queue

    def unsubscribe(self, queue: asyncio.Queue[Alert]) -> None:
        try:
            self._queues.remove(queue)
        except ValueError:
            pass


DeliverHook = Callable[[Envelope, "Alert"], Awaitable[None]]
AnalyzedHook = Callable[[Envelope, "Alert"], Awaitable[None]]


@dataclass
class SentinelStats:
    analyzed: int = 0
    flagged: int = 0
    blocked: int = 0
    webhook_failures: int = 0
    ai_degraded: int = 0


class Sentinel:
    """The floor monitor. One instance per floor.

    ``mode`` selects the enforcement posture: ``passive`` only observes,
    ``blocking`` and ``hybrid`` additionally withhold flagged messages
    in blocking categories from the ``on_deliver`` downstream hook.
    Republished alert envelopes and coordinator webhooks flow in every
    mode; blocking changes delivery only.
    """

    def __init__(
        self,
        floor: Floor,
        catalog: CompiledCatalog | None = None,
        behavior: BehaviorTracker | None = None,
        inspector: Any | None = None,
        webhook: WebhookSender | None = None,
        broadcaster: AlertBroadcaster | None = None,
        mode: str = "passive",
        blocking_categories: frozenset[Category] = DEFAULT_BLOCKING_CATEGORIES,
        on_deliver: DeliverHook | None = None,
        on_analyzed: AnalyzedHook | None = None,
        audit_all: bool = False,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.floor = floor
        self.catalog = catalog if catalog is not None else compile_catalog()
        self.behavior = behavior if behavior is not None else BehaviorTracker()
        self.inspector = inspector if inspector is not None else StubInspector()
        self.webhook = webhook
        self.broadcaster = broadcaster if broadcaster is not None else AlertBroadcaster()
        self.mode = mode
        self.blocking_categories = frozenset(blocking_categories)
        self.on_deliver = on_deliver
        self.on_analyzed = on_analyzed
        self.audit_all = audit_all
        self.stats = SentinelStats()
        self._task: asyncio.Task[None] | None = None
        self._pending: set[asyncio.Task[Any]] = set()
        self._received = 0
        self._processing = False

    # -- lifecycle -----------------------------------------------------

    @property
    def started(self) -> bool:
        return self._task is not None

    def start(self) -> None:
        if self._task is not None:
            raise RuntimeError("sentinel already started")
        subscription = self.floor.subscribe()
        # Publishes before this point are invisible to the subscription.
        self._received = self.floor.published
        self._task = asyncio.create_task(self._run(subscription))

    async def stop(self) -> None:
        if self._task is not None:
            self._task.cancel()
            try:
                await self._task
            except asyncio.CancelledError:
                pass
            self._task = None
        if self._pending:
            await asyncio.gather(*self._pending, return_exceptions=True)
            self._pending.clear()

    async def _run(self, subscription: Any) -> None:
        async for envelope in subscription:
            self._received += 1
            if self._is_own_traffic(envelope):
                continue
            self._processing = True
            try:
                await self.handle(envelope)
            except Exception:
                logger.exception("sentinel failed on envelope from %s", envelope.sender)
            finally:
                self._processing = False

    @property
    def caught_up(self) -> bool:
        """True when every published envelope has been fully handled."""
        return (
            self._received >= self.floor.published
            and not self._processing
            and not self._pending
        )

    async def drain(self, timeout: float = 10.0) -> bool:
        """Wait until the pipeline is idle; False on timeout.

        Handling an envelope can publish more (alert republishes), which
        re-arms the condition, so this loops until a stable idle state.
        """
        loop = asyncio.get_running_loop()
        deadline = loop.time() + timeout
        while loop.time() < deadline:
            if self.caught_up:
                await asyncio.sleep(0.01)
                if self.caught_up:
                    return True
            await asyncio.sleep(0.005)
        return False

    @staticmethod
    def _is_own_traffic(envelope: Envelope) -> bool:
        return (
            envelope.sender == SENTINEL_SENDER
            or envelope.msg_type == ALERT_MSG_TYPE
        )

    # -- analysis ------------------------------------------------------

    async def analyze(self, envelope: Envelope) -> Alert:
        """Run all three layers on one envelope. Pure of side effects."""
        rule_matches = self.catalog.scan(envelope.content)

        timestamp = envelope.timestamp if envelope.timestamp is not None else time.time()
        burst = self.behavior.observe(envelope.sender, timestamp)
        matches = list(rule_matches)
        if burst is not None:
            if not burst.context_snippet:
                burst = RuleMatch(
                    rule_id=burst.rule_id,
                    category=burst.category,
                    pattern=burst.pattern,
                    span=None,
                    matched_text=None,
                    context_snippet=envelope.content[:AI_SNIPPET_LIMIT],
                    rationale=burst.rationale,
                )
            matches.append(burst)

        assessment: AiAssessment = await self.inspector.assess(envelope.content)
        ai_used = not assessment.error
        if assessment.error:
            self.stats.ai_degraded += 1

        reasons = [match_reason(m) for m in matches]
        if ai_used:
            if assessment.pi_flagged:
                matches.append(
                    RuleMatch(
                        rule_id=AI_PI_RULE_ID,
                        category=Category.PROMPT_INJECTION,
                        pattern=f"risk>={assessment.pi_risk:.2f}",
                        span=None,
                        matched_text=None,
                        context_snippet=envelope.content[:AI_SNIPPET_LIMIT],
                        rationale=assessment.pi_rationale,
                    )
                )
                reasons.append(
                    f"ai_prompt_injection_risk:{assessment.pi_risk:.2f}"
                )
            if assessment.hallu_flagged:
                matches.append(
                    RuleMatch(
                        rule_id=AI_HALLU_RULE_ID,
                        category=Category.HALLUCINATION,
                        pattern=f"risk>={assessment.hallu_risk:.2f}",
                        span=None,
                        matched_text=None,
                        context_snippet=envelope.content[:AI_SNIPPET_LIMIT],
                        rationale=assessment.hallu_explanation,
                    )
                )
                reasons.append(
                    f"ai_hallucination_risk:{assessment.hallu_risk:.2f}"
                )

        flagged = bool(matches)
        summary = {
            "categories": sorted({m.category.value for m in matches}),
            "rule_ids": [m.rule_id for m in matches],
            "match_count": len(matches),
            "ai_used": ai_used,
        }
        alert = Alert(
            sender=envelope.sender,
            msg_type=envelope.msg_type,
            content=envelope.content,
            flagged=flagged,
            reasons=reasons,
            matches=matches,
            summary=summary,
            timestamp=max(time.time(), timestamp),
            envelope=envelope.to_dict(),
            ai_raw=assessment.to_raw() if ai_used else None,
        )
        return alert

    # -- event loop body -----------------------------------------------

    async def handle(self, envelope: Envelope) -> Alert:
        """Analyze one envelope and run every configured side effect."""
        alert = await self.analyze(envelope)
        self.stats.analyzed += 1

        if alert.flagged:
            self.stats.flagged += 1
            self._audit(alert)
            await self._notify(alert)
        elif self.audit_all:
            self._audit(alert)

        blocked = self._should_block(alert)
        if blocked:
            self.stats.blocked += 1
        if self.on_deliver is not None and not blocked:
            await self.on_deliver(envelope, alert)
        if self.on_analyzed is not None:
            await self.on_analyzed(envelope, alert)
        return alert

    def _should_block(self, alert: Alert) -> bool:
        if self.mode == "passive" or not alert.flagged:
            return False
        return bool(alert.categories & self.blocking_categories)

    def _audit(self, alert: Alert) -> None:
        if self.floor.audit is not None:
            try:
                self.floor.audit.append("alert", alert.to_dict())
            except (OSError, ValueError):
                logger.exception("alert audit write failed")

    async def _notify(self, alert: Alert) -> None:
        self.broadcaster.publish(alert)
        await self._republish(alert)
        if self.webhook is not None:
            task = asyncio.create_task(self._post_webhook(alert))
            self._pending.add(task)
            task.add_done_callback(self._pending.discard)

    async def _republish(self, alert: Alert) -> None:
        note = Envelope(
            sender=SENTINEL_SENDER,
            msg_type=ALERT_MSG_TYPE,
            content=(
                f"flagged message from '{alert.sender}' "
                f"(rules={','.join(alert.summary['rule_ids'])})"
            ),
            metadata={"alert": json.dumps(alert.to_dict())},
        )
        try:
            await self.floor.publish(note)
        except Exception:
            logger.exception("alert republish failed")

    async def _post_webhook(self, alert: Alert) -> None:
        assert self.webhook is not None
        result = await self.webhook.send(alert.to_dict())
        if not result.ok:
            self.stats.webhook_failures += 1
            if self.floor.audit is not None:
                try:
                    self.floor.audit.append(
                        "note",
                        {
                            "event": "webhook_delivery_failed",
                            "sender": alert.sender,
                            "attempts": result.attempts,
                            "detail": result.detail,
                        },
                    )
                except (OSError, ValueError):
                    logger.exception("webhook failure audit write failed")
