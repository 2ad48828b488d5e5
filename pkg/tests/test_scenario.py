import json

import pytest

from floorguard import build_stack, load_scenario, read_transcript, run_demo
from floorguard.scenario import ONLINE_BANNER, ScriptStep

pytestmark = pytest.mark.anyio


def test_bundled_scenario_loads():
    scenario = load_scenario()
    assert scenario.name == "travel_planning"
    assert len(scenario.steps) == 11
    senders = {s.sender for s in scenario.steps}
    assert senders == {"planner_agent", "research_agent", "vendor_suggester"}
    delays = [s.delay_seconds for s in scenario.steps]
    assert delays == sorted(delays)
    assert scenario.steps[5].metadata == {"vendor": "X-Air"}


def test_scenario_from_file(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(
        json.dumps(
            {
                "name": "tiny",
                "steps": [
                    {"sender": "a", "type": "chat", "content": "hi"},
                    {"delay_seconds": 0.1, "sender": "b", "type": "chat"},
                ],
            }
        )
    )
    scenario = load_scenario(path)
    assert scenario.name == "tiny"
    assert scenario.steps[0] == ScriptStep(
        delay_seconds=0.0, sender="a", msg_type="chat", content="hi"
    )
    assert scenario.steps[1].content == ""


async def test_demo_run_quarantines_vendor(tmp_path):
    log = tmp_path / "floor.ndjson"
    stack = build_stack(
        log_path=log,
        decision_delay_seconds=0.15,
        time_scale=0.1,
    )
    try:
        runner = await run_demo(stack)
    finally:
        await stack.aclose()

    assert runner.published == 10
    assert runner.dropped == 1
    assert stack.coordinator.is_quarantined("vendor_suggester")

    records = read_transcript(log)
    contents = [
        r["envelope"]["content"] for r in records if r["kind"] == "envelope"
    ]
    assert contents[0] == ONLINE_BANNER
    assert any(c.startswith("[Coordinator] 'vendor_suggester' quarantined") for c in contents)
    # the post-quarantine probe never reached the floor
    assert not any("Still here" in c for c in contents)
    # both sentinel republishes made it
    senders = [
        r["envelope"]["sender"] for r in records if r["kind"] == "envelope"
    ]
    assert senders.count("sentinel") == 2


async def test_runner_rejects_bad_time_scale(tmp_path):
    from floorguard import Coordinator, Floor, ScenarioRunner, Sentinel

    floor = Floor()
    with pytest.raises(ValueError):
        ScenarioRunner(
            load_scenario(), floor, Sentinel(floor), Coordinator(floor), time_scale=0
        )
