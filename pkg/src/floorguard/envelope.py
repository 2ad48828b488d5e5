"""Interaction messages exchanged on the conversational floor."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Any

# Metadata values are restricted to JSON scalars so envelopes stay
# schema-light and trivially serializable on every transport.
Scalar = str | int | float | bool


@dataclass(frozen=True)
class Envelope:
    """One utterance on the floor.

    The wire format uses the key ``type`` for ``msg_type``; the Python name
    avoids shadowing the builtin. ``timestamp`` is epoch seconds as a float
    and may be left unset by the caller, in which case the bus stamps the
    current time at publish.
    """

    sender: str
    msg_type: str
    content: str = ""
    metadata: dict[str, Scalar] = field(default_factory=dict)
    timestamp: float | None = None

    def validate(self) -> None:
        """Raise ValueError unless the envelope satisfies its invariants."""
        if not isinstance(self.sender, str) or not self.sender:
            raise ValueError("envelope sender must be a non-empty string")
        if not isinstance(self.msg_type, str):
            raise ValueError("envelope type must be a string")
        if not isinstance(self.content, str):
            raise ValueError("envelope content must be a string")
        if not isinstance(self.metadata, dict):
            raise ValueError("envelope metadata must be an object")
        for key, value in self.metadata.items():
            if not isinstance(key, str):
                raise ValueError("metadata keys must be strings")
            if isinstance(value, bool):
                continue
            if not isinstance(value, (str, int, float)):
                raise ValueError(
                    f"metadata value for {key!r} must be a scalar "
                    "(string, number, or boolean)"
                )
        if self.timestamp is not None:
            if not isinstance(self.timestamp, (int, float)) or isinstance(
                self.timestamp, bool
            ):
                raise ValueError("envelope timestamp must be a number")
            if not math.isfinite(self.timestamp) or self.timestamp <= 0:
                raise ValueError("envelope timestamp must be finite and > 0")

    def stamped(self, now: float | None = None) -> Envelope:
        """Return self, with the current time filled in if unset."""
        if self.timestamp is not None:
            return self
        return replace(self, timestamp=now if now is not None else time.time())

    def to_dict(self) -> dict[str, Any]:
        return {
            "sender": self.sender,
            "type": self.msg_type,
            "content": self.content,
            "metadata": dict(self.metadata),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: Any) -> Envelope:
        """Build an envelope from a wire dict, ignoring unknown keys."""
        if not isinstance(data, dict):
            raise ValueError("envelope must be a JSON object")
        env = cls(
            sender=data.get("sender", ""),
            msg_type=data.get("type", ""),
            content=data.get("content", ""),
            metadata=data.get("metadata") or {},
            timestamp=data.get("timestamp"),
        )
        env.validate()
        return env
