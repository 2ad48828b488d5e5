"""Quarantine policy and enforcement for the shared floor.

The coordinator receives alerts (normally over the sentinel's webhook),
decides which ones warrant isolating a sender, and enforces that
decision at the publish gate: envelopes from quarantined senders are
dropped before they reach the floor. Decisions are announced on the
floor itself so every participant sees them in the transcript.
"""

from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass, field
from typing import Any

from .envelope import Envelope
from .floor import Floor
from .rules import Category
from .sentinel import Alert

logger = logging.getLogger(__name__)

COORDINATOR_SENDER = "Coordinator"
DECISION_MSG_TYPE = "decision"
STATUS_MSG_TYPE = "status"

DEFAULT_SEVERE_RULE_IDS = frozenset(
    {"PI_OVERRIDE", "PI_DEV_MODE", "FREQ_BURST", "AI_PI", "EXFIL_CUES"}
)
DEFAULT_SEVERE_CATEGORIES = frozenset(
    {Category.PROMPT_INJECTION, Category.DATA_EXFILTRATION}
)


@dataclass(frozen=True)
class Policy:
    """What counts as severe enough to quarantine.

    An alert triggers quarantine when it is flagged and touches at least
    one severe rule id or severe category. Both sets empty means the
    policy quarantines nothing, which is a legitimate configuration for
    observation-only runs.
    """

    severe_rule_ids: frozenset[str] = DEFAULT_SEVERE_RULE_IDS
    severe_categories: frozenset[Category] = DEFAULT_SEVERE_CATEGORIES

    def is_severe(self, alert: Alert) -> bool:
        if not alert.flagged:
            return False
        if self.severe_rule_ids & set(alert.rule_ids):
            return True
        return bool(self.severe_categories & alert.categories)


@dataclass
class QuarantineEntry:
    sender: str
    since: float
    categories: set[str] = field(default_factory=set)
    rule_ids: set[str] = field(default_factory=set)
    alert_count: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "sender": self.sender,
            "since": self.since,
            "categories": sorted(self.categories),
            "rule_ids": sorted(self.rule_ids),
            "alert_count": self.alert_count,
        }


def decision_content(sender: str, categories: list[str], rule_ids: list[str]) -> str:
    return (
        f"[Coordinator] '{sender}' quarantined "
        f"(categories={','.join(categories)} rules={','.join(rule_ids)})"
    )


@dataclass
class CoordinatorStats:
    alerts_received: int = 0
    quarantines: int = 0
    dropped_envelopes: int = 0


class Coordinator:
    """Applies a quarantine policy and gates floor publishes.

    Quarantine is idempotent per sender: the first severe alert creates
    the entry and announces a decision; later alerts only merge their
    categories and rules into it. ``decision_delay_seconds`` postpones
    activation, modelling the decision latency of a slower adjudicator,
    so in-flight traffic from the offender still lands in the transcript
    before the gate closes.
    """

    def __init__(
        self,
        floor: Floor,
        policy: Policy | None = None,
        decision_delay_seconds: float = 0.0,
    ):
        self.floor = floor
        self.policy = policy if policy is not None else Policy()
        self.decision_delay_seconds = decision_delay_seconds
        self._active: dict[str, QuarantineEntry] = {}
        self._pending: dict[str, QuarantineEntry] = {}
        self._decision_tasks: set[asyncio.Task[None]] = set()
        self.stats = CoordinatorStats()

    # -- alert intake ----------------------------------------------------

    async def handle_alert(self, alert: Alert) -> bool:
        """Process one alert; returns True if it triggered a quarantine."""
        self.stats.alerts_received += 1
        if not self.policy.is_severe(alert):
            return False
        return await self._quarantine(alert)

    async def _quarantine(self, alert: Alert) -> bool:
        sender = alert.sender
        categories = alert.summary.get(
            "categories", sorted(c.value for c in alert.categories)
        )
        rule_ids = alert.summary.get("rule_ids", alert.rule_ids)

        entry = self._active.get(sender) or self._pending.get(sender)
        if entry is not None:
            entry.categories.update(categories)
            entry.rule_ids.update(rule_ids)
            entry.alert_count += 1
            return False

        entry = QuarantineEntry(
            sender=sender,
            since=time.time(),
            categories=set(categories),
            rule_ids=set(rule_ids),
            alert_count=1,
        )
        content = decision_content(sender, list(categories), list(rule_ids))
        if self.decision_delay_seconds > 0:
            self._pending[sender] = entry
            task = asyncio.create_task(self._activate_later(entry, content))
            self._decision_tasks.add(task)
            task.add_done_callback(self._decision_tasks.discard)
        else:
            await self._activate(entry, content)
        return True

    async def _activate_later(self, entry: QuarantineEntry, content: str) -> None:
        await asyncio.sleep(self.decision_delay_seconds)
        self._pending.pop(entry.sender, None)
        await self._activate(entry, content)

    async def _activate(self, entry: QuarantineEntry, content: str) -> None:
        self._active[entry.sender] = entry
        self.stats.quarantines += 1
        await self._announce(DECISION_MSG_TYPE, content)

    async def _announce(self, msg_type: str, content: str) -> None:
        envelope = Envelope(
            sender=COORDINATOR_SENDER, msg_type=msg_type, content=content
        )
        try:
            await self.floor.publish(envelope)
        except Exception:
            logger.exception("coordinator announcement failed")

    # -- publish gate ----------------------------------------------------

    def is_quarantined(self, sender: str) -> bool:
        return sender in self._active

    async def gate_publish(self, envelope: Envelope) -> Envelope | None:
        """Publish unless the sender is actively quarantined.

        Pending (delayed) quarantines do not gate; only activated ones.
        Dropped envelopes vanish silently apart from a counter, so the
        offender gets no signal about the control.
        """
        if envelope.sender in self._active:
            self.stats.dropped_envelopes += 1
            return None
        return await self.floor.publish(envelope)

    # -- admin -----------------------------------------------------------

    def release(self, sender: str) -> bool:
        entry = self._active.pop(sender, None)
        pending = self._pending.pop(sender, None)
        return entry is not None or pending is not None

    def quarantined(self) -> list[QuarantineEntry]:
        return sorted(self._active.values(), key=lambda e: e.sender)

    def status(self) -> dict[str, Any]:
        return {
            "quarantined": [e.to_dict() for e in self.quarantined()],
            "pending": sorted(self._pending),
            "alerts_received": self.stats.alerts_received,
            "quarantines": self.stats.quarantines,
            "dropped_envelopes": self.stats.dropped_envelopes,
        }

    async def drain(self) -> None:
        """Wait for any delayed decisions to activate. Test helper."""
        while self._decision_tasks:
            await asyncio.gather(*list(self._decision_tasks), return_exceptions=True)
