"""Clue discovery: one model call per page, structured evidence records out."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .errors import ProtocolError
from .gateway import Gateway, ModelClass
from .jsonrepair import extract_json_object
from .prompts import PromptSet, default_prompts

logger = logging.getLogger(__name__)


class EvidenceType(str, Enum):
    TEXT = "text"
    CHART = "chart"
    TABLE = "table"
    FIGURE = "figure"


class Confidence(str, Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"


@dataclass(frozen=True)
class EvidenceRecord:
    page: int
    region: str
    content: str
    insight: str
    rationale: str
    evidence_type: EvidenceType = EvidenceType.TEXT
    confidence: Confidence = Confidence.MEDIUM

    def __post_init__(self) -> None:
        if self.page < 1:
            raise ValueError(f"evidence page must be >= 1, got {self.page}")
        if not self.content:
            raise ValueError("evidence content must be nonempty")
        object.__setattr__(self, "evidence_type", EvidenceType(self.evidence_type))
        object.__setattr__(self, "confidence", Confidence(self.confidence))

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["evidence_type"] = self.evidence_type.value
        d["confidence"] = self.confidence.value
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EvidenceRecord":
        return cls(**d)


@dataclass(frozen=True)
class PageClueReport:
    page: int
    records: tuple[EvidenceRecord, ...] = ()
    page_summary: str = ""
    key_insights: str = ""
    parse_error: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        if any(r.page != self.page for r in self.records):
            raise ValueError(f"report for page {self.page} holds records from another page")

    @property
    def has_relevant_evidence(self) -> bool:
        return bool(self.records)

    def to_dict(self) -> dict[str, Any]:
        return {
            "page": self.page,
            "has_relevant_evidence": self.has_relevant_evidence,
            "records": [r.to_dict() for r in self.records],
            "page_summary": self.page_summary,
            "key_insights": self.key_insights,
            "parse_error": self.parse_error,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PageClueReport":
        return cls(
            page=d["page"],
            records=tuple(EvidenceRecord.from_dict(r) for r in d.get("records", [])),
            page_summary=d.get("page_summary", ""),
            key_insights=d.get("key_insights", ""),
            parse_error=d.get("parse_error"),
        )


def _text(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value.strip()
    if isinstance(value, (list, dict)):
        return json.dumps(value, ensure_ascii=False)
    return str(value)


def _enum(value: Any, enum: type[Enum], fallback: Enum, page: int, what: str) -> Enum:
    key = _text(value).lower()
    try:
        return enum(key)
    except ValueError:
        logger.warning("page %d: unknown %s %r, using %r", page, what, value, fallback.value)
        return fallback


def parse_clue_reply(text: str, page_index: int) -> PageClueReport:
    """Parse a clue-discovery reply; records are always attributed to ``page_index``.

    Raises :class:`ProtocolError` if no JSON object can be recovered or the
    object does not follow the schema.
    """
    obj = extract_json_object(text)
    items = obj.get("evidence_items", [])
    if items is None:
        items = []
    if not isinstance(items, list):
        raise ProtocolError("evidence_items is not a list", raw=text)
    claimed = obj.get("page_number")
    if claimed is not None and claimed != page_index:
        logger.warning("clue reply claims page %r for page %d; keeping %d", claimed, page_index, page_index)
    key_insights = _text(obj.get("key_insights"))
    records = []
    for n, item in enumerate(items):
        if not isinstance(item, dict):
            logger.warning("page %d: evidence item %d is not an object, skipped", page_index, n)
            continue
        content = _text(item.get("content"))
        if not content:
            logger.warning("page %d: evidence item %d has no content, skipped", page_index, n)
            continue
        records.append(EvidenceRecord(
            page=page_index,
            region=_text(item.get("location")),
            content=content,
            insight=_text(item.get("insight")) or key_insights,
            rationale=_text(item.get("relevance")),
            evidence_type=_enum(item.get("evidence_type"), EvidenceType, EvidenceType.FIGURE,
                                page_index, "evidence_type"),
            confidence=_enum(item.get("confidence"), Confidence, Confidence.LOW, page_index, "confidence"),
        ))
    if obj.get("has_relevant_evidence") is False and records:
        logger.warning("page %d: reply says no relevant evidence but lists %d items", page_index, len(records))
    return PageClueReport(
        page=page_index,
        records=tuple(records),
        page_summary=_text(obj.get("page_summary")),
        key_insights=key_insights,
    )


def discover(page_image: str, page_index: int, question: str, gateway: Gateway,
             prompts: PromptSet | None = None) -> PageClueReport:
    prompts = prompts or default_prompts()
    text = prompts["clue_discovery"].render(question=question, page_num=page_index)
    reply = gateway.complete(gateway.request(ModelClass.ORDINARY, [text], [page_image])).text
    try:
        return parse_clue_reply(reply, page_index)
    except ProtocolError as exc:
        logger.warning("page %d: clue reply unusable (%s); treating as no evidence", page_index, exc)
        return PageClueReport(page=page_index, parse_error=str(exc))


def discover_all(pages: Sequence[tuple[int, str]], question: str, gateway: Gateway,
                 prompts: PromptSet | None = None) -> dict[int, PageClueReport]:
    """Run :func:`discover` on every ``(page_index, image_ref)``; result keyed in ascending page order."""
    if not pages:
        raise ValueError("discover_all needs at least one page")
    prompts = prompts or default_prompts()
    with ThreadPoolExecutor(max_workers=min(len(pages), gateway.concurrency)) as pool:
        futures = {idx: pool.submit(discover, ref, idx, question, gateway, prompts) for idx, ref in pages}
        return {idx: futures[idx].result() for idx in sorted(futures)}


def union_evidence(reports: Mapping[int, PageClueReport] | Iterable[PageClueReport]) -> list[EvidenceRecord]:
    """All records, ascending by page then discovery order."""
    values = reports.values() if isinstance(reports, Mapping) else reports
    out: list[EvidenceRecord] = []
    for report in sorted(values, key=lambda r: r.page):
        out.extend(report.records)
    return out
