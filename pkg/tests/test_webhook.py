import httpx
import pytest

from floorguard import WebhookSender

pytestmark = pytest.mark.anyio


def counting_transport(responses):
    """Transport returning queued responses; raises when a response is an
    exception instance."""
    calls = []

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(request)
        item = responses[min(len(calls), len(responses)) - 1]
        if isinstance(item, Exception):
            raise item
        return httpx.Response(item)

    return httpx.MockTransport(handler), calls


async def test_delivers_first_try():
    transport, calls = counting_transport([200])
    sender = WebhookSender(
        "http://coord.test/alerts", client=httpx.AsyncClient(transport=transport)
    )
    result = await sender.send({"x": 1})
    assert result.ok
    assert result.attempts == 1
    assert result.status_code == 200
    assert len(calls) == 1
    assert sender.delivered == 1


async def test_retries_until_success():
    transport, calls = counting_transport([500, 503, 200])
    sender = WebhookSender(
        "http://coord.test/alerts",
        initial_backoff=0.01,
        client=httpx.AsyncClient(transport=transport),
    )
    result = await sender.send({})
    assert result.ok
    assert result.attempts == 3
    assert len(calls) == 3


async def test_gives_up_after_max_attempts():
    transport, calls = counting_transport([httpx.ConnectError("refused")])
    sender = WebhookSender(
        "http://coord.test/alerts",
        max_attempts=4,
        initial_backoff=0.01,
        client=httpx.AsyncClient(transport=transport),
    )
    result = await sender.send({})
    assert not result.ok
    assert result.attempts == 4
    assert len(calls) == 4
    assert "ConnectError" in result.detail
    assert sender.failed == 1


async def test_non_2xx_is_a_failure_204_is_not():
    transport, calls = counting_transport([204])
    sender = WebhookSender(
        "http://coord.test/alerts", client=httpx.AsyncClient(transport=transport)
    )
    assert (await sender.send({})).ok

    transport, calls = counting_transport([302])
    sender = WebhookSender(
        "http://coord.test/alerts",
        max_attempts=2,
        initial_backoff=0.01,
        client=httpx.AsyncClient(transport=transport),
    )
    result = await sender.send({})
    assert not result.ok
    assert result.status_code == 302


async def test_backoff_gaps_double(monkeypatch):
    sleeps = []

    async def record_sleep(delay):
        sleeps.append(delay)

    monkeypatch.setattr("floorguard.webhook.asyncio.sleep", record_sleep)
    transport, calls = counting_transport([500])
    sender = WebhookSender(
        "http://coord.test/alerts",
        max_attempts=5,
        initial_backoff=0.5,
        client=httpx.AsyncClient(transport=transport),
    )
    result = await sender.send({})
    assert not result.ok
    assert len(calls) == 5
    assert sleeps == [0.5, 1.0, 2.0, 4.0]


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        WebhookSender("http://x", max_attempts=0)
    with pytest.raises(ValueError):
        WebhookSender("http://x", initial_backoff=-1.0)
