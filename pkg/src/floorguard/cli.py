"""Command line entry points: demo scenario, HTTP services, evaluation."""

from __future__ import annotations

import asyncio
import json

import click

from .floor import read_transcript
from .harness import DEFAULT_BENIGN, DEFAULT_COUNTS, DEFAULT_SEED, run_eval, replay_transcript
from .inspector import HttpInspectorConfig
from .runtime import build_stack, run_demo
from .runtime import serve as serve_stack
from .sentinel import MODES

DEFAULT_LOG = "logs/floor.ndjson"


def _inspector_config(url: str | None, timeout: float) -> HttpInspectorConfig | None:
    if url is None:
        return None
    return HttpInspectorConfig(base_url=url, timeout_seconds=timeout)


@click.group()
def main() -> None:
    """Shared-floor monitoring: detection, quarantine, evaluation."""


@main.command()
@click.option("--mode", type=click.Choice(MODES), default="passive", show_default=True)
@click.option("--log-path", default=DEFAULT_LOG, show_default=True)
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None,
              help="JSON rule catalog replacing the built-in one.")
@click.option("--burst-window", type=float, default=10.0, show_default=True)
@click.option("--burst-threshold", type=int, default=5, show_default=True)
@click.option("--scenario", "scenario_path", type=click.Path(exists=True), default=None,
              help="Scenario JSON; the bundled travel demo when omitted.")
@click.option("--inspector", "inspector_backend", type=click.Choice(["stub", "http"]),
              default="stub", show_default=True)
@click.option("--inspector-url", default=None, help="Chat-completions base URL for --inspector http.")
@click.option("--inspector-timeout", type=float, default=10.0, show_default=True)
@click.option("--decision-delay", type=float, default=1.5, show_default=True,
              help="Seconds between a severe alert and quarantine taking effect.")
def scenario(
    mode: str,
    log_path: str,
    rules_path: str | None,
    burst_window: float,
    burst_threshold: int,
    scenario_path: str | None,
    inspector_backend: str,
    inspector_url: str | None,
    inspector_timeout: float,
    decision_delay: float,
) -> None:
    """Play the scripted multi-agent demo and print the transcript."""

    async def _run():
        stack = build_stack(
            log_path=log_path,
            mode=mode,
            rules_path=rules_path,
            burst_window=burst_window,
            burst_threshold=burst_threshold,
            inspector_backend=inspector_backend,
            inspector_config=_inspector_config(inspector_url, inspector_timeout),
            decision_delay_seconds=decision_delay,
            scenario_path=scenario_path,
        )
        try:
            runner = await run_demo(stack)
            return {
                "published": runner.published,
                "dropped": runner.dropped,
                "flagged": stack.sentinel.stats.flagged,
                "blocked": stack.sentinel.stats.blocked,
                "ai_degraded": stack.sentinel.stats.ai_degraded,
                "quarantined": [e.sender for e in stack.coordinator.quarantined()],
            }
        finally:
            await stack.aclose()

    stats = asyncio.run(_run())

    for record in read_transcript(log_path):
        if record["kind"] == "envelope":
            env = record["envelope"]
            click.echo(f"[{env['sender']}] ({env['type']}) {env['content']}")
        elif record["kind"] == "alert":
            alert = record["alert"]
            rules = ",".join(alert["summary"]["rule_ids"])
            click.echo(f"  !! alert on '{alert['sender']}' rules={rules}")
    click.echo(f"-- run stats: {json.dumps(stats)}")


@main.command()
@click.option("--sentinel-port", type=int, default=8101, show_default=True)
@click.option("--coordinator-port", type=int, default=8102, show_default=True)
@click.option("--mode", type=click.Choice(MODES), default="passive", show_default=True)
@click.option("--log-path", default=DEFAULT_LOG, show_default=True)
@click.option("--decision-delay", type=float, default=1.5, show_default=True)
def serve(
    sentinel_port: int,
    coordinator_port: int,
    mode: str,
    log_path: str,
    decision_delay: float,
) -> None:
    """Serve the monitor and coordinator HTTP APIs until interrupted."""
    stack = build_stack(
        log_path=log_path,
        mode=mode,
        decision_delay_seconds=decision_delay,
    )
    click.echo(
        f"monitor on 127.0.0.1:{sentinel_port}, "
        f"coordinator on 127.0.0.1:{coordinator_port}"
    )
    try:
        asyncio.run(serve_stack(stack, sentinel_port, coordinator_port))
    except KeyboardInterrupt:
        pass


@main.group(name="eval")
def eval_group() -> None:
    """Attack-corpus evaluation."""


@eval_group.command(name="run")
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@click.option("--counts", default=",".join(str(c) for c in DEFAULT_COUNTS),
              show_default=True,
              help="Attack counts: injection,exfiltration,fabrication.")
@click.option("--benign", type=int, default=DEFAULT_BENIGN, show_default=True)
@click.option("--backend", type=click.Choice(["stub", "http"]), default="stub",
              show_default=True)
@click.option("--out", "out_dir", default="eval_out", show_default=True)
@click.option("--inspector-url", default=None)
@click.option("--inspector-timeout", type=float, default=10.0, show_default=True)
def eval_run(
    seed: int,
    counts: str,
    benign: int,
    backend: str,
    out_dir: str,
    inspector_url: str | None,
    inspector_timeout: float,
) -> None:
    """Generate the corpus, run it through the stack, write reports."""
    parts = [int(p) for p in counts.split(",")]
    if len(parts) != 3 or any(p < 0 for p in parts):
        raise click.BadParameter("--counts must be three non-negative integers")
    report = asyncio.run(
        run_eval(
            seed=seed,
            counts=(parts[0], parts[1], parts[2]),
            benign=benign,
            backend=backend,
            out_dir=out_dir,
            inspector_config=_inspector_config(inspector_url, inspector_timeout),
        )
    )
    click.echo(json.dumps(report, indent=2))


@eval_group.command(name="replay")
@click.option("--transcript", required=True, type=click.Path(exists=True))
def eval_replay(transcript: str) -> None:
    """Recompute the evaluation report from an audit transcript."""
    click.echo(json.dumps(replay_transcript(transcript), indent=2))


if __name__ == "__main__":
    main()
