"""In-process fan-out FIFO bus plus the append-only NDJSON audit transcript.

The floor serializes all publishes into a single arrival order and feeds
that order to every subscriber through a per-subscriber buffer, so multiple
observers (detection pipeline, relays, dashboards) each see the full stream
in the same sequence. The queue itself is never persisted; the NDJSON
transcript is the only durable artifact.
"""

from __future__ import annotations

import asyncio
import json
import logging
from pathlib import Path
from typing import Any

from .envelope import Envelope

logger = logging.getLogger(__name__)

# Marks end-of-stream on subscriber buffers when the floor shuts down.
_END = object()

AUDIT_KINDS = ("envelope", "alert", "note")

DEFAULT_LOG_PATH = "logs/floor.ndjson"
DEFAULT_HIGH_WATER = 10_000


class FloorClosed(RuntimeError):
    """Raised when publishing to a floor that has been shut down."""


class AuditLog:
    """Append-only NDJSON writer assigning gapless sequence numbers.

    One JSON object per line: ``{"kind": K, K: payload, "seq": n}``. The
    writer is intentionally a single sequential appender; the floor holds
    its arrival lock while appending so transcript order equals bus order.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")
        self._seq = 0
        self.errors = 0

    @property
    def seq(self) -> int:
        return self._seq

    def append(self, kind: str, payload: dict[str, Any]) -> int:
        """Write one record; returns its sequence number.

        I/O failures propagate to the caller; sequence numbers are only
        consumed by successful writes.
        """
        if kind not in AUDIT_KINDS:
            raise ValueError(f"unknown audit kind {kind!r}")
        record = {"kind": kind, kind: payload, "seq": self._seq + 1}
        line = json.dumps(record, ensure_ascii=False)
        try:
            self._fh.write(line + "\n")
            self._fh.flush()
        except (OSError, ValueError):
            self.errors += 1
            raise
        self._seq += 1
        return self._seq

    def close(self) -> None:
        self._fh.close()


def read_transcript(path: str | Path) -> list[dict[str, Any]]:
    """Parse an NDJSON transcript into a list of records."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


class Subscription:
    """Ordered stream of envelopes delivered after the subscription began."""

    def __init__(self, floor: Floor):
        self._floor = floor
        self._queue: asyncio.Queue = asyncio.Queue()
        self._warned_high_water = False
        self.closed = False

    def qsize(self) -> int:
        return self._queue.qsize()

    def _push(self, item) -> None:
        self._queue.put_nowait(item)

    def __aiter__(self) -> Subscription:
        return self

    async def __anext__(self) -> Envelope:
        if self.closed:
            raise StopAsyncIteration
        item = await self._queue.get()
        if item is _END:
            self.closed = True
            raise StopAsyncIteration
        return item

    def close(self) -> None:
        """Detach from the floor; the stream ends after buffered items."""
        self._floor._detach(self)
        self._push(_END)


class Floor:
    """Asynchronous fan-out FIFO bus for envelopes.

    Safe for any number of concurrent publishers and subscribers on one
    event loop; an internal lock fixes the arrival order, and the audit
    record for an envelope is written before any subscriber can observe it.
    Audit failures are counted and logged but never block delivery.
    """

    def __init__(
        self,
        audit: AuditLog | None = None,
        high_water: int = DEFAULT_HIGH_WATER,
    ):
        self.audit = audit
        self.high_water = high_water
        self._subs: list[Subscription] = []
        self._lock = asyncio.Lock()
        self._closed = False
        self.published = 0
        self.audit_errors = 0
        self.high_water_warnings = 0

    @property
    def closed(self) -> bool:
        return self._closed

    async def publish(self, envelope: Envelope) -> Envelope:
        """Validate, stamp, audit, and fan out one envelope.

        Returns the (possibly timestamp-stamped) envelope as the ack.
        Raises ValueError on an invalid envelope and FloorClosed after
        shutdown.
        """
        envelope.validate()
        if self._closed:
            raise FloorClosed("floor is shut down")
        envelope = envelope.stamped()
        envelope.validate()
        async with self._lock:
            if self._closed:
                raise FloorClosed("floor is shut down")
            self._audit_envelope(envelope)
            self.published += 1
            for sub in self._subs:
                sub._push(envelope)
                self._check_high_water(sub)
        return envelope

    def _audit_envelope(self, envelope: Envelope) -> None:
        if self.audit is None:
            return
        try:
            self.audit.append("envelope", envelope.to_dict())
        except (OSError, ValueError):
            # Log-and-continue: audit I/O must never drop traffic.
            self.audit_errors += 1
            logger.exception("audit append failed; envelope delivered anyway")

    def _check_high_water(self, sub: Subscription) -> None:
        if sub.qsize() <= self.high_water or sub._warned_high_water:
            return
        sub._warned_high_water = True
        self.high_water_warnings += 1
        logger.warning(
            "subscriber buffer exceeded high-water mark (%d buffered)",
            sub.qsize(),
        )
        if self.audit is not None:
            try:
                self.audit.append(
                    "note",
                    {"event": "high_water", "buffered": sub.qsize()},
                )
            except (OSError, ValueError):
                self.audit_errors += 1

    def subscribe(self) -> Subscription:
        """Attach a new subscriber; it sees every envelope published next."""
        if self._closed:
            sub = Subscription(self)
            sub._push(_END)
            return sub
        sub = Subscription(self)
        self._subs.append(sub)
        return sub

    def _detach(self, sub: Subscription) -> None:
        if sub in self._subs:
            self._subs.remove(sub)

    async def close(self) -> None:
        """Stop accepting publishes and terminate all streams cleanly."""
        async with self._lock:
            if self._closed:
                return
            self._closed = True
            for sub in self._subs:
                sub._push(_END)
            self._subs.clear()
