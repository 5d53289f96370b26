"""Evidence context: retained page images plus every clue mined from the candidate pages."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .clues import EvidenceRecord, PageClueReport, union_evidence
from .screening import RetainedSet

NO_EVIDENCE = "(no evidence found)"


class PromptMode(str, Enum):
    WITH_VISUALS = "with_visuals"
    TEXT_ONLY = "text_only"


@dataclass(frozen=True)
class EvidenceContext:
    question: str
    source_pages: tuple[int, ...]
    retained_pages: RetainedSet
    evidence: tuple[EvidenceRecord, ...]
    page_images: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        sources = set(self.source_pages)
        if not set(self.retained_pages) <= sources:
            raise ValueError("retained pages must be a subset of the source pages")
        if any(e.page not in sources for e in self.evidence):
            raise ValueError("evidence page outside the source pages")
        missing = [p for p in self.retained_pages if p not in self.page_images]
        if self.page_images and missing:
            raise ValueError(f"no image reference for retained pages {missing}")

    @property
    def num_source_pages(self) -> int:
        return len(self.source_pages)

    @property
    def retained_images(self) -> tuple[str, ...]:
        """Image refs attached to the decision call: exactly one per retained page."""
        if not self.page_images:
            return ()
        return tuple(self.page_images[p] for p in self.retained_pages)

    def evidence_summary(self) -> str:
        return render_evidence_summary(self.evidence)

    def dump(self) -> str:
        """Stable text rendering for audit logs."""
        lines = [
            f"QUESTION: {self.question}",
            f"MODE: {select_prompt_mode(self).value}",
            f"SOURCE PAGES: {', '.join(map(str, self.source_pages))}",
            f"RETAINED PAGES: {', '.join(map(str, self.retained_pages)) or '(none)'}",
            "IMAGES:",
        ]
        lines.extend(f"  {ref}" for ref in self.retained_images)
        lines += ["EVIDENCE:", self.evidence_summary(), ""]
        return "\n".join(lines)


def render_evidence_summary(evidence) -> str:
    if not evidence:
        return NO_EVIDENCE
    blocks = []
    for n, e in enumerate(evidence, start=1):
        lines = [f"{n}. Page: {e.page}"]
        if e.region:
            lines.append(f"   Location: {e.region}")
        lines.append(f"   Content: {e.content}")
        if e.insight:
            lines.append(f"   Insight: {e.insight}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def build(clue_reports: Mapping[int, PageClueReport], retained: RetainedSet, question: str,
          page_images: Mapping[int, str] | None = None) -> EvidenceContext:
    """Combine per-page reports and the retained set.

    Evidence comes from every reported page, retained or not.
    """
    sources = tuple(sorted(clue_reports))
    images = {p: page_images[p] for p in retained} if page_images else {}
    return EvidenceContext(
        question=question,
        source_pages=sources,
        retained_pages=RetainedSet(tuple(sorted(retained))),
        evidence=tuple(union_evidence(clue_reports)),
        page_images=images,
    )


def select_prompt_mode(context: EvidenceContext) -> PromptMode:
    return PromptMode.WITH_VISUALS if len(context.retained_pages) else PromptMode.TEXT_ONLY
