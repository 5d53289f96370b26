import pytest

from conftest import mock_gateway
from evidoc.clues import EvidenceRecord, PageClueReport
from evidoc.context import PromptMode, build
from evidoc.decision import (
    SOURCE_CLUES,
    SOURCE_RETAINED,
    EvidenceReference,
    decide,
    extract_references,
    mentioned_pages,
)
from evidoc.difficulty import DifficultyDecision
from evidoc.errors import DecisionError
from evidoc.gateway import ModelClass
from evidoc.prompts import SENTINEL
from evidoc.screening import RetainedSet

IMAGES = {p: f"doc/page_{p}.png" for p in range(1, 6)}


def context(evidence: dict, retained=()):
    reps = {p: PageClueReport(p, tuple(EvidenceRecord(p, "", c, "", "") for c in evidence.get(p, [])))
            for p in range(1, 6)}
    return build(reps, RetainedSet(tuple(retained)), "q", IMAGES)


D0 = DifficultyDecision(0, "Answer directly.")
D1 = DifficultyDecision(1, "Sum the values.")


def test_empty_evidence_gives_sentinel_without_call():
    gw, backend = mock_gateway(default="should not be used")
    bundle = decide("q", context({}, retained=(2,)), D0, gw)
    assert bundle.answer == "No answers found!" == SENTINEL
    assert bundle.references == () and not bundle.model_called
    assert backend.requests == []


def test_text_only_template_when_nothing_retained():
    gw, backend = mock_gateway(default="120 (Page 4)")
    bundle = decide("What revenue?", context({4: ["Revenue: 120"]}), D0, gw)
    (req,) = backend.requests
    assert bundle.prompt_mode is PromptMode.TEXT_ONLY
    assert req.image_parts == ()
    assert req.text.startswith("You are an extractive QA model that gives answer to given query. You are given "
                               "a query and a set of evidence.")
    assert "EVIDENCE (from 5 pages):" in req.text
    assert "Content: Revenue: 120" in req.text
    assert "STRATEGIC INSTRUCTIONS Γ_d:\nAnswer directly." in req.text


def test_reference_extraction_example():
    gw, backend = mock_gateway(default="120 (Page 4)")
    bundle = decide("q", context({4: ["Revenue: 120"]}), D0, gw)
    assert EvidenceReference(4, "Revenue: 120", "clue_discovery") in bundle.references


def test_with_visuals_attaches_retained_images_and_routes_reasoning():
    gw, backend = mock_gateway(default="150 (Pages 2 and 4)")
    bundle = decide("q", context({2: ["a"], 4: ["b"]}, retained=(2, 4)), D1, gw)
    (req,) = backend.requests
    assert req.model_class is ModelClass.REASONING and bundle.model_class_used is ModelClass.REASONING
    assert req.image_parts == ("doc/page_2.png", "doc/page_4.png")
    assert "VISUAL EVIDENCE: 2 page images attached" in req.text
    assert bundle.prompt_mode is PromptMode.WITH_VISUALS
    sources = [(r.page_index, r.evidence_source) for r in bundle.references]
    assert sources == [(2, SOURCE_CLUES), (2, SOURCE_RETAINED), (4, SOURCE_CLUES), (4, SOURCE_RETAINED)]


def test_empty_reply_is_an_error():
    gw, _ = mock_gateway(default="   ")
    with pytest.raises(DecisionError, match="empty decision output"):
        decide("q", context({1: ["x"]}), D0, gw)


def test_verbatim_answer():
    gw, _ = mock_gateway(default="  - a\n  - b  ")
    assert decide("q", context({1: ["x"]}), D0, gw).answer == "  - a\n  - b  "


@pytest.mark.parametrize("text, pages", [
    ("120 (Page 4)", [4]),
    ("see pages 2 and 5", [2, 5]),
    ("pp. 3-4", [3, 4]),
    ("p. 7, Pages 1, 2", [1, 2, 7]),
    ("page1", [1]),
    ("no citation", []),
    ("Revenue grew 20% to 150", []),
])
def test_mentioned_pages(text, pages):
    assert mentioned_pages(text) == pages


def test_references_are_sound():
    ctx = context({2: ["a"], 4: ["b"]}, retained=(4,))
    refs = extract_references("see page 2, page 4 and page 9", ctx)
    evidence_contents = {e.content for e in ctx.evidence}
    for r in refs:
        assert r.page_index in ctx.source_pages
        assert r.evidence_content in evidence_contents or r.evidence_content == IMAGES[r.page_index]
    assert 9 not in {r.page_index for r in refs}


def test_sentinel_answer_has_no_references():
    assert extract_references(SENTINEL, context({2: ["a"]})) == ()
