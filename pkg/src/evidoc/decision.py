"""Core decision: final answer plus an evidence reference table."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any

from .context import EvidenceContext, PromptMode, select_prompt_mode
from .difficulty import DifficultyDecision, route
from .errors import DecisionError
from .gateway import Gateway, ModelClass
from .prompts import SENTINEL, PromptSet, default_prompts

SOURCE_CLUES = "clue_discovery"
SOURCE_RETAINED = "retained_page"


@dataclass(frozen=True)
class EvidenceReference:
    page_index: int
    evidence_content: str
    evidence_source: str

    def to_dict(self) -> dict[str, Any]:
        return {"page_index": self.page_index, "evidence_content": self.evidence_content,
                "evidence_source": self.evidence_source}


@dataclass(frozen=True)
class AnswerBundle:
    answer: str
    references: tuple[EvidenceReference, ...]
    model_class_used: ModelClass
    prompt_mode: PromptMode
    model_called: bool = True

    def __post_init__(self) -> None:
        if not self.answer:
            raise ValueError("answer must be nonempty")

    @property
    def unanswerable(self) -> bool:
        return self.answer.strip() == SENTINEL

    def to_dict(self) -> dict[str, Any]:
        return {
            "answer": self.answer,
            "references": [r.to_dict() for r in self.references],
            "model_class_used": self.model_class_used.value,
            "prompt_mode": self.prompt_mode.value,
            "model_called": self.model_called,
        }


@dataclass(frozen=True)
class DecisionPrompt:
    mode: PromptMode
    model_class: ModelClass
    text: str
    images: tuple[str, ...]


def visual_evidence_section(context: EvidenceContext) -> str:
    pages = ", ".join(f"Page {p}" for p in context.retained_pages)
    n = len(context.retained_pages)
    return (f"VISUAL EVIDENCE: {n} page image{'s' if n != 1 else ''} attached, in order: {pages}. "
            "Use them to verify and complement the evidence above.")


def render_decision_prompt(question: str, context: EvidenceContext, decision: DifficultyDecision,
                           prompts: PromptSet | None = None) -> DecisionPrompt:
    prompts = prompts or default_prompts()
    mode = select_prompt_mode(context)
    values: dict[str, object] = {
        "question": question,
        "instruction_set": decision.instructions,
        "num_pages": context.num_source_pages,
        "evidence_summary": context.evidence_summary(),
    }
    if mode is PromptMode.WITH_VISUALS:
        values["visual_evidence_section"] = visual_evidence_section(context)
        text = prompts["decision_with_visuals"].render(**values)
        images = context.retained_images
    else:
        text = prompts["decision_text_only"].render(**values)
        images = ()
    return DecisionPrompt(mode, route(decision), text, images)


_PAGE_MENTION = re.compile(
    r"\b(?:pages?|pp?\.|pg\.?)\s*(\d+(?:\s*(?:,|&|and|-|–|to)\s*\d+)*)", re.IGNORECASE)


def mentioned_pages(answer: str) -> list[int]:
    """Page numbers cited in ``answer`` (``Page 4``, ``pages 2 and 5``, ``pp. 3-4``), ascending."""
    found: set[int] = set()
    for m in _PAGE_MENTION.finditer(answer):
        for rng in re.finditer(r"(\d+)(?:\s*(?:-|–|to)\s*(\d+))?", m.group(1)):
            lo = int(rng.group(1))
            hi = int(rng.group(2)) if rng.group(2) else lo
            if hi < lo or hi - lo > 50:
                hi = lo
            found.update(range(lo, hi + 1))
    return sorted(found)


def extract_references(answer: str, context: EvidenceContext) -> tuple[EvidenceReference, ...]:
    if answer.strip() == SENTINEL:
        return ()
    sources = set(context.source_pages)
    refs: list[EvidenceReference] = []
    for page in mentioned_pages(answer):
        if page not in sources:
            continue
        refs.extend(EvidenceReference(page, e.content, SOURCE_CLUES)
                    for e in context.evidence if e.page == page)
        if page in context.retained_pages:
            refs.append(EvidenceReference(page, context.page_images.get(page, f"page {page}"), SOURCE_RETAINED))
    return tuple(refs)


def decide(question: str, context: EvidenceContext, decision: DifficultyDecision, gateway: Gateway,
           prompts: PromptSet | None = None) -> AnswerBundle:
    prompt = render_decision_prompt(question, context, decision, prompts)
    if not context.evidence:
        return AnswerBundle(SENTINEL, (), prompt.model_class, prompt.mode, model_called=False)
    reply = gateway.complete(gateway.request(prompt.model_class, [prompt.text], prompt.images)).text
    if not reply.strip():
        raise DecisionError("empty decision output")
    return AnswerBundle(reply, extract_references(reply, context), prompt.model_class, prompt.mode)
