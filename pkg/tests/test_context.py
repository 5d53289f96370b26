import itertools

import pytest

from evidoc.clues import EvidenceRecord, PageClueReport
from evidoc.context import NO_EVIDENCE, PromptMode, build, render_evidence_summary, select_prompt_mode
from evidoc.screening import RetainedSet


def rec(page, content, region="", insight=""):
    return EvidenceRecord(page, region, content, insight, "why")


def reports(counts):
    """counts: {page: n_records}"""
    return {p: PageClueReport(p, tuple(rec(p, f"p{p}-{i}") for i in range(n))) for p, n in counts.items()}


def test_evidence_concatenated_in_page_order():
    ctx = build(reports({3: 1, 1: 0, 2: 2}), RetainedSet((2,)), "q")
    assert [e.content for e in ctx.evidence] == ["p2-0", "p2-1", "p3-0"]
    assert ctx.source_pages == (1, 2, 3) and ctx.num_source_pages == 3


def test_empty_context_is_legal():
    ctx = build(reports({1: 0, 2: 0}), RetainedSet(()), "q")
    assert ctx.evidence == () and select_prompt_mode(ctx) is PromptMode.TEXT_ONLY
    assert ctx.evidence_summary() == NO_EVIDENCE


def test_filtered_page_evidence_is_kept():
    ctx = build(reports({1: 1, 2: 1}), RetainedSet((2,)), "q")
    assert 1 not in ctx.retained_pages
    assert any(e.page == 1 for e in ctx.evidence)


@pytest.mark.parametrize("retained, counts", list(itertools.product([(), (1, 2)], [{1: 0, 2: 0}, {1: 1, 2: 0}])))
def test_mode_table(retained, counts):
    images = {1: "d/1.png", 2: "d/2.png"}
    ctx = build(reports(counts), RetainedSet(retained), "q", images)
    expected = PromptMode.WITH_VISUALS if retained else PromptMode.TEXT_ONLY
    assert select_prompt_mode(ctx) is expected
    assert len(ctx.retained_images) == len(retained)


def test_images_only_for_retained_pages():
    images = {1: "d/1.png", 2: "d/2.png", 3: "d/3.png"}
    ctx = build(reports({1: 1, 2: 1, 3: 1}), RetainedSet((1, 3)), "q", images)
    assert ctx.retained_images == ("d/1.png", "d/3.png")
    assert "d/2.png" not in ctx.dump()


def test_summary_format():
    text = render_evidence_summary([rec(2, "Revenue: 120", "Table 1", "up"), rec(4, "Chart")])
    assert text == (
        "1. Page: 2\n   Location: Table 1\n   Content: Revenue: 120\n   Insight: up\n\n"
        "2. Page: 4\n   Content: Chart"
    )


def test_rebuild_is_byte_identical():
    a = build(reports({1: 2, 2: 1}), RetainedSet((1,)), "q", {1: "x", 2: "y"}).dump()
    b = build(reports({2: 1, 1: 2}), RetainedSet((1,)), "q", {1: "x", 2: "y"}).dump()
    assert a == b


def test_retained_must_be_subset():
    with pytest.raises(ValueError):
        build(reports({1: 0}), RetainedSet((5,)), "q")
