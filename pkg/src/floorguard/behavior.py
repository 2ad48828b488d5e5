"""Per-sender message-rate tracking with a sliding time window.

Rules catch what a message says; this layer catches how a sender acts.
The only behavior implemented is burst detection: a sender emitting at
least ``threshold`` messages inside the trailing ``window_seconds`` is
flagged, which catches rapid-fire probing that no single message would
trip on its own.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .rules import Category, RuleMatch

BURST_RULE_ID = "FREQ_BURST"
DEFAULT_WINDOW_SECONDS = 10.0
DEFAULT_THRESHOLD = 5


@dataclass
class SenderWindow:
    timestamps: deque[float] = field(default_factory=deque)
    total: int = 0


class BehaviorTracker:
    """Sliding-window burst detector, one window per sender.

    ``observe`` is O(evictions) amortized: each timestamp enters and
    leaves its deque exactly once. Timestamps that arrive out of order
    are clamped up to the newest one seen for that sender, so a stale
    clock can never shrink the window below reality.
    """

    def __init__(
        self,
        window_seconds: float = DEFAULT_WINDOW_SECONDS,
        threshold: int = DEFAULT_THRESHOLD,
        category: Category = Category.STALKING,
    ):
        if window_seconds <= 0:
            raise ValueError("window_seconds must be positive")
        if threshold < 1:
            raise ValueError("threshold must be at least 1")
        self.window_seconds = window_seconds
        self.threshold = threshold
        self.category = category
        self._senders: dict[str, SenderWindow] = {}
        self.clamped_timestamps = 0

    def observe(self, sender: str, timestamp: float) -> RuleMatch | None:
        """Record one message and report a burst match if the rate trips.

        The window is half-open: events strictly older than
        ``timestamp - window_seconds`` no longer count, while an event
        exactly at the boundary still does.
        """
        win = self._senders.get(sender)
        if win is None:
            win = self._senders[sender] = SenderWindow()
        if win.timestamps and timestamp < win.timestamps[-1]:
            timestamp = win.timestamps[-1]
            self.clamped_timestamps += 1
        win.timestamps.append(timestamp)
        win.total += 1
        cutoff = timestamp - self.window_seconds
        while win.timestamps[0] < cutoff:
            win.timestamps.popleft()
        count = len(win.timestamps)
        if count < self.threshold:
            return None
        return RuleMatch(
            rule_id=BURST_RULE_ID,
            category=self.category,
            pattern=f"rate>={self.threshold}/{self.window_seconds:g}s",
            span=None,
            matched_text=None,
            context_snippet="",
            rationale=(
                f"Sender emitted {count} messages within "
                f"{self.window_seconds:g}s (threshold {self.threshold})."
            ),
        )

    def count_in_window(self, sender: str) -> int:
        win = self._senders.get(sender)
        return len(win.timestamps) if win else 0

    def total_observed(self, sender: str) -> int:
        win = self._senders.get(sender)
        return win.total if win else 0

    def reset(self, sender: str | None = None) -> None:
        if sender is None:
            self._senders.clear()
        else:
            self._senders.pop(sender, None)
