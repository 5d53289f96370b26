import logging

import pytest

from conftest import mock_gateway
from evidoc.clues import (
    Confidence,
    EvidenceRecord,
    EvidenceType,
    PageClueReport,
    discover,
    discover_all,
    parse_clue_reply,
    union_evidence,
)
from protocol_corpus import CLUE_CASES, _item, _reply


def _fields(r):
    return (r.evidence_type.value, r.confidence.value, r.content, r.region, r.rationale, r.insight)


@pytest.mark.parametrize("name, reply, page, expected", CLUE_CASES, ids=[c[0] for c in CLUE_CASES])
def test_clue_corpus(name, reply, page, expected):
    gw, backend = mock_gateway(default=reply)
    report = discover(f"doc/page_{page}.png", page, "q?", gw)
    if expected is None:
        assert report.parse_error and not report.has_relevant_evidence and report.records == ()
        return
    assert report.parse_error is None
    assert [_fields(r) for r in report.records] == expected
    assert all(r.page == page for r in report.records)
    assert report.has_relevant_evidence == bool(expected)


def test_no_evidence_reply():
    reply = '{"page_number":3,"has_relevant_evidence":false,"evidence_items":[],"page_summary":"","key_insights":""}'
    report = parse_clue_reply(reply, 3)
    assert report.records == () and not report.has_relevant_evidence


def test_table_high_enums():
    report = parse_clue_reply(_reply([_item(etype="table", conf="high")]), 3)
    (rec,) = report.records
    assert rec.evidence_type is EvidenceType.TABLE and rec.confidence is Confidence.HIGH


def test_lying_page_number_is_overridden(caplog):
    with caplog.at_level(logging.WARNING):
        report = parse_clue_reply(_reply([_item(), _item()], page=99), 3)
    assert [r.page for r in report.records] == [3, 3]
    assert "99" in caplog.text


def test_prompt_is_rendered_with_one_image():
    gw, backend = mock_gateway(default=_reply([]))
    discover("doc/page_7.png", 7, "How many apples?", gw)
    (req,) = backend.requests
    assert req.image_parts == ("doc/page_7.png",)
    assert "Question: How many apples?" in req.text
    assert "- Page Number: 7" in req.text
    assert '"page_number": 7,' in req.text
    assert req.text.startswith("You are a Detective, an expert evidence collector")


def test_discover_all_order_and_counts():
    rules = [
        {"contains": "Page Number: 2", "response": _reply([_item("a"), _item("b")], page=2)},
        {"contains": "Page Number: 5", "response": _reply([_item("c")], page=5)},
    ]
    gw, backend = mock_gateway(rules=rules, default=_reply([], has=False))
    pages = [(5, "d/5"), (1, "d/1"), (2, "d/2"), (4, "d/4"), (3, "d/3")]
    reports = discover_all(pages, "q", gw)
    assert list(reports) == [1, 2, 3, 4, 5]
    evidence = union_evidence(reports)
    assert len(evidence) == 3
    assert [(e.page, e.content) for e in evidence] == [(2, "a"), (2, "b"), (5, "c")]
    assert all(len(r.image_parts) == 1 for r in backend.requests)
    assert discover_all(pages, "q", gw) == reports


def test_all_pages_empty_gives_empty_union():
    gw, _ = mock_gateway(default=_reply([], has=False))
    assert union_evidence(discover_all([(1, "a"), (2, "b")], "q", gw)) == []


def test_gateway_failure_propagates():
    gw, _ = mock_gateway()  # no responses scripted
    with pytest.raises(Exception):
        discover("p", 1, "q", gw)


def test_record_invariants():
    with pytest.raises(ValueError):
        EvidenceRecord(0, "", "x", "", "")
    with pytest.raises(ValueError):
        EvidenceRecord(1, "", "", "", "")
    with pytest.raises(ValueError):
        PageClueReport(2, (EvidenceRecord(1, "", "x", "", ""),))


def test_report_round_trips_through_dict():
    report = parse_clue_reply(_reply([_item()]), 3)
    assert PageClueReport.from_dict(report.to_dict()) == report
