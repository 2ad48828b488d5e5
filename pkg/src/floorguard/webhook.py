"""HTTP webhook delivery with exponential backoff.

Alert delivery to an external coordinator must not stall the monitor,
so sends run as fire-and-forget tasks and failures are bounded: after
``max_attempts`` total requests the payload is dropped and the failure
is reported to the caller for auditing.
"""

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass
from typing import Any

import httpx

logger = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 5
DEFAULT_INITIAL_BACKOFF = 0.5
DEFAULT_BACKOFF_MULTIPLIER = 2.0


@dataclass(frozen=True)
class DeliveryResult:
    ok: bool
    attempts: int
    status_code: int | None = None
    detail: str = ""


class WebhookSender:
    """POSTs JSON payloads to one URL, retrying with exponential backoff.

    A request counts as delivered only on a 2xx response. Everything
    else, including connection errors and timeouts, consumes one attempt
    and waits ``initial_backoff * multiplier**k`` before the next try.
    """

    def __init__(
        self,
        url: str,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        initial_backoff: float = DEFAULT_INITIAL_BACKOFF,
        backoff_multiplier: float = DEFAULT_BACKOFF_MULTIPLIER,
        timeout_seconds: float = 5.0,
        client: httpx.AsyncClient | None = None,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if initial_backoff < 0:
            raise ValueError("initial_backoff must be non-negative")
        self.url = url
        self.max_attempts = max_attempts
        self.initial_backoff = initial_backoff
        self.backoff_multiplier = backoff_multiplier
        self.timeout_seconds = timeout_seconds
        self._client = client
        self._owns_client = client is None
        self.delivered = 0
        self.failed = 0

    async def _ensure_client(self) -> httpx.AsyncClient:
        if self._client is None:
            self._client = httpx.AsyncClient(timeout=self.timeout_seconds)
        return self._client

    async def aclose(self) -> None:
        if self._client is not None and self._owns_client:
            await self._client.aclose()
            self._client = None

    async def send(self, payload: dict[str, Any]) -> DeliveryResult:
        client = await self._ensure_client()
        backoff = self.initial_backoff
        last_detail = ""
        last_status: int | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                response = await client.post(
                    self.url, json=payload, timeout=self.timeout_seconds
                )
                last_status = response.status_code
                if 200 <= response.status_code < 300:
                    self.delivered += 1
                    return DeliveryResult(
                        ok=True,
                        attempts=attempt,
                        status_code=response.status_code,
                    )
                last_detail = f"status {response.status_code}"
            except httpx.HTTPError as exc:
                last_status = None
                last_detail = f"{type(exc).__name__}: {exc}"
            if attempt < self.max_attempts:
                await asyncio.sleep(backoff)
                backoff *= self.backoff_multiplier
        self.failed += 1
        logger.warning(
            "webhook delivery to %s failed after %d attempts (%s)",
            self.url,
            self.max_attempts,
            last_detail,
        )
        return DeliveryResult(
            ok=False,
            attempts=self.max_attempts,
            status_code=last_status,
            detail=last_detail,
        )
