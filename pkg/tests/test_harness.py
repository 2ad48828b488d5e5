import csv
import json

import pytest

from floorguard import StubInspector, compile_catalog, generate_corpus, run_eval
from floorguard.harness import (
    CAVEAT,
    PROBE_SENDERS,
    benign_strings,
    exfil_strings,
    family_detected,
    hallu_strings,
    pi_strings,
    replay_transcript,
    risk_histogram,
)

pytestmark = pytest.mark.anyio

CATALOG = compile_catalog()
STUB = StubInspector()


def test_corpus_is_deterministic_per_seed():
    a = generate_corpus(seed=7)
    b = generate_corpus(seed=7)
    c = generate_corpus(seed=8)
    assert a == b
    assert [x.content for x in a] != [x.content for x in c]


def test_corpus_counts_ids_and_senders():
    cases = generate_corpus(seed=1, counts=(110, 49, 3), benign=100)
    assert len(cases) == 262
    assert [c.case_id for c in cases] == [f"case_{i:04d}" for i in range(1, 263)]
    by_family = {}
    for case in cases:
        by_family[case.family] = by_family.get(case.family, 0) + 1
    assert by_family == {
        "prompt_injection": 110,
        "data_exfiltration": 49,
        "hallucination": 3,
        "benign": 100,
    }
    for i, case in enumerate(cases):
        assert case.sender == PROBE_SENDERS[i % len(PROBE_SENDERS)]
        assert case.expected_detected == (case.family != "benign")


def test_case_envelope_metadata():
    case = generate_corpus(seed=1, counts=(1, 0, 0), benign=0)[0]
    env = case.envelope(1234.5)
    assert env.timestamp == 1234.5
    assert env.metadata == {
        "case_id": "case_0001",
        "family": "prompt_injection",
        "expected_detected": True,
    }
    env.validate()


def test_injection_pool_always_detected():
    for text in pi_strings():
        cats = {m.category.value for m in CATALOG.scan(text)}
        verdict = STUB.assess_sync(text)
        assert "prompt_injection" in cats or verdict.pi_flagged, text


def test_exfiltration_pool_always_detected():
    for text in exfil_strings():
        cats = {m.category.value for m in CATALOG.scan(text)}
        assert "data_exfiltration" in cats, text


def test_fabrication_pool_always_detected():
    for text in hallu_strings():
        verdict = STUB.assess_sync(text)
        assert verdict.hallu_flagged, text
        rule_cats = {m.category.value for m in CATALOG.scan(text)}
        assert rule_cats == set(), text


def test_benign_pool_never_flagged():
    for text in benign_strings():
        assert CATALOG.scan(text) == [], text
        verdict = STUB.assess_sync(text)
        assert not verdict.pi_flagged, text
        assert not verdict.hallu_flagged, text


def test_risk_histogram_binning():
    bins = risk_histogram([0.0, 0.05, 0.1, 0.69, 0.7, 0.85, 0.9, 1.0])
    assert bins == [2, 1, 0, 0, 0, 0, 1, 1, 1, 2]
    assert sum(bins) == 8
    assert risk_histogram([]) == [0] * 10


def test_family_detected_logic():
    assert family_detected("prompt_injection", True, ["prompt_injection"])
    assert not family_detected("prompt_injection", True, ["pii_disclosure"])
    assert family_detected("benign", True, [])
    assert not family_detected("benign", False, [])
    assert family_detected("hallucination", True, ["hallucination", "x"])


async def test_small_eval_run_and_replay(tmp_path):
    out = tmp_path / "out"
    report = await run_eval(
        seed=3, counts=(6, 4, 2), benign=8, out_dir=out
    )
    assert report["caveat"] == CAVEAT
    fams = report["families"]
    assert fams["prompt_injection"] == {"total": 6, "detected": 6, "rate": 1.0}
    assert fams["data_exfiltration"] == {"total": 4, "detected": 4, "rate": 1.0}
    assert fams["hallucination"] == {"total": 2, "detected": 2, "rate": 1.0}
    assert fams["benign"] == {"total": 8, "detected": 0, "rate": 0.0}
    assert report["incomplete_cases"] == 0
    assert sum(report["histograms"]["hallucination"]) == 2

    # artifacts
    on_disk = json.loads((out / "report.json").read_text())
    assert on_disk == report
    with open(out / "rates.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["family", "total", "detected", "rate"]
    assert rows[1] == ["prompt_injection", "6", "6", "1.00"]
    assert rows[4] == ["benign", "8", "0", "0.00"]
    with open(out / "pi_hist.csv") as fh:
        hist_rows = list(csv.reader(fh))
    assert hist_rows[0] == ["bin_lo", "bin_hi", "count"]
    assert len(hist_rows) == 11
    assert hist_rows[1][:2] == ["0.0", "0.1"]
    assert hist_rows[10][:2] == ["0.9", "1.0"]

    replayed = replay_transcript(out / "floor.ndjson")
    assert replayed["families"] == report["families"]
    assert replayed["histograms"] == report["histograms"]
    assert replayed["cases"] == 20
