"""Multi-agent floor monitoring: shared bus, layered detection, quarantine.

The package wires a conversational floor (an in-process fan-out bus with
an append-only NDJSON transcript), a layered monitor (regex rules, burst
tracking, model-backed scoring), and a coordinator that quarantines
misbehaving senders, plus a scripted demo, HTTP surfaces, and a seeded
evaluation harness.
"""

from .behavior import BURST_RULE_ID, BehaviorTracker
from .coordinator import Coordinator, Policy, QuarantineEntry
from .envelope import Envelope
from .floor import AuditLog, Floor, FloorClosed, Subscription, read_transcript
from .harness import EvalHarness, generate_corpus, replay_transcript, run_eval
from .inspector import (
    AiAssessment,
    HttpInspector,
    HttpInspectorConfig,
    StubInspector,
    make_inspector,
)
from .rules import (
    Category,
    CompiledCatalog,
    Rule,
    RuleMatch,
    compile_catalog,
    default_catalog,
    load_rules,
)
from .runtime import Stack, build_stack, run_demo
from .scenario import Scenario, ScenarioRunner, load_scenario
from .sentinel import Alert, AlertBroadcaster, Sentinel
from .webhook import DeliveryResult, WebhookSender

__version__ = "0.1.0"

__all__ = [
    "AiAssessment",
    "Alert",
    "AlertBroadcaster",
    "AuditLog",
    "BURST_RULE_ID",
    "BehaviorTracker",
    "Category",
    "CompiledCatalog",
    "Coordinator",
    "DeliveryResult",
    "Envelope",
    "EvalHarness",
    "Floor",
    "FloorClosed",
    "HttpInspector",
    "HttpInspectorConfig",
    "Policy",
    "QuarantineEntry",
    "Rule",
    "RuleMatch",
    "Scenario",
    "ScenarioRunner",
    "Sentinel",
    "Stack",
    "StubInspector",
    "Subscription",
    "WebhookSender",
    "build_stack",
    "compile_catalog",
    "default_catalog",
    "generate_corpus",
    "load_rules",
    "load_scenario",
    "make_inspector",
    "read_transcript",
    "replay_transcript",
    "run_demo",
    "run_eval",
    "__version__",
]
