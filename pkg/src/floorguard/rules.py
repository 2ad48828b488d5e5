"""Precompiled regex screening for injection, exfiltration, PII, and probing.

The default catalog is small on purpose: it is the fast first line of the
detection pipeline, and every pattern here is cheap enough to run on all
traffic. Catalogs are also loadable from a JSON file so deployments can
extend or replace the cue lists without touching code.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any


class Category(str, Enum):
    PROMPT_INJECTION = "prompt_injection"
    DATA_EXFILTRATION = "data_exfiltration"
    PII_DISCLOSURE = "pii_disclosure"
    STALKING = "stalking"
    HALLUCINATION = "hallucination"


# Context snippets start a little before the match and run long enough to
# always contain the matched text in full.
SNIPPET_BEFORE = 10
SNIPPET_LEN = 60


@dataclass(frozen=True)
class Rule:
    rule_id: str
    category: Category
    pattern: str
    rationale: str

    def to_dict(self) -> dict[str, str]:
        return {
            "rule_id": self.rule_id,
            "category": self.category.value,
            "pattern": self.pattern,
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Rule:
        return cls(
            rule_id=data["rule_id"],
            category=Category(data["category"]),
            pattern=data["pattern"],
            rationale=data.get("rationale", ""),
        )


@dataclass(frozen=True)
class RuleMatch:
    """One rule hit. ``span`` is absent for non-positional detectors."""

    rule_id: str
    category: Category
    pattern: str
    span: tuple[int, int] | None
    matched_text: str | None
    context_snippet: str
    rationale: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "rule_id": self.rule_id,
            "category": self.category.value,
            "pattern": self.pattern,
            "span": list(self.span) if self.span is not None else None,
            "matched_text": self.matched_text,
            "context_snippet": self.context_snippet,
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RuleMatch:
        span = data.get("span")
        return cls(
            rule_id=data["rule_id"],
            category=Category(data["category"]),
            pattern=data.get("pattern", ""),
            span=tuple(span) if span is not None else None,
            matched_text=data.get("matched_text"),
            context_snippet=data.get("context_snippet", ""),
            rationale=data.get("rationale", ""),
        )


PI_OVERRIDE_PATTERN = (
    r"(?:^|\b)(ignore|forget|disregard)\b.{0,80}\b(rule|instruction|previous)\b"
)

PI_DEV_MODE_PATTERN = (
    r"\b(?:enter|enable|activate|engage|unlock|switch\s+(?:in)?to|turn\s+on)\b"
    r".{0,40}\b(?:developer|dev|debug|god|admin|dan)\s*-?\s*mode\b"
)

_EXFIL_VERBS = (
    r"dump|export|exfiltrate|leak|reveal|expose|print|paste|send|upload|"
    r"email|base64|encode|disclose|share"
)
_EXFIL_NOUNS = (
    r"secret|credential|password|passwd|token|api[\s_-]?key|"
    r"private[\s_-]?key|ssh[\s_-]?key|env(?:ironment)?[\s_-]?var(?:iable)?"
)
EXFIL_CUES_PATTERN = (
    rf"\b(?:{_EXFIL_VERBS})\b.{{0,60}}\b(?:{_EXFIL_NOUNS})s?\b"
    rf"|\b(?:{_EXFIL_NOUNS})s?\b.{{0,60}}\b(?:{_EXFIL_VERBS})\b"
)

PII_CONTACT_PATTERN = (
    r"\b\d{3}[-.\s]\d{3}[-.\s]\d{4}\b"
    r"|[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}"
)

STALK_LOCATION_PATTERN = (
    r"\bwhere\s+(?:do|does)\s+(?:you|she|he|they)\s+live\b"
    r"|\bwhere\s+are\s+you\s+(?:located|right\s+now|now)\b"
    r"|\byour\s+(?:current\s+|home\s+|exact\s+)?(?:location|address|whereabouts)\b"
    r"|\bwhat(?:'s|\s+is)\s+your\s+(?:real\s+)?(?:name|identity|address|location)\b"
    r"|\btrack(?:ing)?\s+(?:you|your\s+location|your\s+movements)\b"
)


def default_catalog() -> list[Rule]:
    """The canonical built-in rule catalog."""
    return [
        Rule(
            rule_id="PI_OVERRIDE",
            category=Category.PROMPT_INJECTION,
            pattern=PI_OVERRIDE_PATTERN,
            rationale="Classic override attempt to nullify prior system instructions.",
        ),
        Rule(
            rule_id="PI_DEV_MODE",
            category=Category.PROMPT_INJECTION,
            pattern=PI_DEV_MODE_PATTERN,
            rationale="Attempt to switch the agent into an unrestricted developer mode.",
        ),
        Rule(
            rule_id="EXFIL_CUES",
            category=Category.DATA_EXFILTRATION,
            pattern=EXFIL_CUES_PATTERN,
            rationale="Exfiltration cue targeting secrets, credentials, or environment variables.",
        ),
        Rule(
            rule_id="PII_CONTACT",
            category=Category.PII_DISCLOSURE,
            pattern=PII_CONTACT_PATTERN,
            rationale="Discloses personal contact details (phone or email) on the shared floor.",
        ),
        Rule(
            rule_id="STALK_LOCATION",
            category=Category.STALKING,
            pattern=STALK_LOCATION_PATTERN,
            rationale="Probe for a participant's location or identity.",
        ),
    ]


class CompiledCatalog:
    """Immutable compiled rule set, shareable across tasks and threads."""

    def __init__(self, rules: list[Rule]):
        seen: set[str] = set()
        compiled = []
        for rule in rules:
            if rule.rule_id in seen:
                raise ValueError(f"duplicate rule_id {rule.rule_id!r}")
            seen.add(rule.rule_id)
            compiled.append((rule, re.compile(rule.pattern, re.IGNORECASE)))
        self._compiled = tuple(compiled)

    @property
    def rules(self) -> list[Rule]:
        return [rule for rule, _ in self._compiled]

    def __len__(self) -> int:
        return len(self._compiled)

    def scan(self, content: str) -> list[RuleMatch]:
        """Match every rule against content; first occurrence per rule.

        Pure and deterministic: results come back in catalog order, one
        match per firing rule, and all firing rules are reported.
        """
        matches = []
        for rule, pattern in self._compiled:
            m = pattern.search(content)
            if m is None:
                continue
            start, end = m.span()
            lo = max(0, start - SNIPPET_BEFORE)
            # Never truncate the matched text out of its own snippet.
            hi = max(lo + SNIPPET_LEN, end)
            matches.append(
                RuleMatch(
                    rule_id=rule.rule_id,
                    category=rule.category,
                    pattern=rule.pattern,
                    span=(start, end),
                    matched_text=m.group(0),
                    context_snippet=content[lo:hi],
                    rationale=rule.rationale,
                )
            )
        return matches


def compile_catalog(rules: list[Rule] | None = None) -> CompiledCatalog:
    return CompiledCatalog(rules if rules is not None else default_catalog())


def scan(content: str, catalog: CompiledCatalog) -> list[RuleMatch]:
    return catalog.scan(content)


def load_rules(path: str | Path) -> list[Rule]:
    """Load a rule catalog from a JSON array of rule objects."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError("rule file must contain a JSON array")
    return [Rule.from_dict(item) for item in data]
