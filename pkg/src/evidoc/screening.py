"""Page screening: grade each candidate page's charts/tables/figures against the question.

Replies follow a three-line protocol::

    Has_Chart: Yes|No
    Relevance: Completely Relevant|Relevant|Irrelevant|none
    Reasoning: ...

Parsing is fail-closed: anything ambiguous becomes ``IR`` so noisy pages are
never retained.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .gateway import Gateway, ModelClass
from .prompts import PromptSet, default_prompts

logger = logging.getLogger(__name__)


class Relevance(str, Enum):
    CR = "CR"
    R = "R"
    IR = "IR"


@dataclass(frozen=True)
class ScreeningVerdict:
    page: int
    has_chart: bool
    label: Relevance | None
    rationale: str = ""
    fail_closed: bool = False

    def __post_init__(self) -> None:
        if self.label is not None:
            object.__setattr__(self, "label", Relevance(self.label))
        if (self.label is None) != (not self.has_chart):
            raise ValueError("label must be None exactly when has_chart is false")

    @property
    def retained(self) -> bool:
        return self.label in (Relevance.CR, Relevance.R)

    def to_dict(self) -> dict[str, Any]:
        return {
            "page": self.page,
            "has_chart": self.has_chart,
            "label": self.label.value if self.label else None,
            "rationale": self.rationale,
            "fail_closed": self.fail_closed,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ScreeningVerdict":
        return cls(d["page"], d["has_chart"], d.get("label"), d.get("rationale", ""), d.get("fail_closed", False))


@dataclass(frozen=True)
class RetainedSet:
    pages: tuple[int, ...] = ()

    def __iter__(self):
        return iter(self.pages)

    def __len__(self) -> int:
        return len(self.pages)

    def __contains__(self, page: object) -> bool:
        return page in self.pages


_LINE_RE = re.compile(r"^[\s*#>\-]*(has[\s_-]*chart|relevance|reasoning)\s*\**\s*[:：]\s*(.*)$", re.IGNORECASE)

_YES = {"yes", "y", "true"}
_NO = {"no", "n", "false"}

_RELEVANCE_RE = re.compile(r"^(completely relevant|not relevant|irrelevant|relevant|cr|ir|r)\b")
_RELEVANCE_WORDS = {
    "completely relevant": Relevance.CR,
    "cr": Relevance.CR,
    "relevant": Relevance.R,
    "r": Relevance.R,
    "irrelevant": Relevance.IR,
    "not relevant": Relevance.IR,
    "ir": Relevance.IR,
}


def _relevance_label(value: str) -> Relevance | None:
    if "/" in value or "|" in value:
        # the template's option list echoed back
        return None
    m = _RELEVANCE_RE.match(value)
    return _RELEVANCE_WORDS[m.group(1)] if m else None


def _clean_value(value: str) -> str:
    value = value.strip().strip("*").strip()
    if value.startswith("[") and value.endswith("]"):
        value = value[1:-1]
    value = value.strip().strip("\"'`").rstrip(".").strip()
    return re.sub(r"\s+", " ", value).lower()


def parse_screening_reply(text: str, page_index: int) -> ScreeningVerdict:
    fields: dict[str, str] = {}
    reasoning_lines: list[str] = []
    in_reasoning = False
    for line in text.splitlines():
        m = _LINE_RE.match(line)
        if m:
            key = re.sub(r"[\s_-]+", "_", m.group(1).lower())
            value = m.group(2).strip().lstrip("*").strip()
            in_reasoning = key == "reasoning"
            if key not in fields:
                fields[key] = value
                if in_reasoning:
                    reasoning_lines = [value]
            else:
                in_reasoning = False
        elif in_reasoning and line.strip():
            reasoning_lines.append(line.strip())
    rationale = " ".join(s for s in reasoning_lines if s).strip()

    def fail(why: str) -> ScreeningVerdict:
        logger.warning("page %d: screening reply %s; marking irrelevant", page_index, why)
        return ScreeningVerdict(page_index, True, Relevance.IR, rationale, fail_closed=True)

    chart_raw = fields.get("has_chart")
    chart = _clean_value(chart_raw) if chart_raw is not None else None
    if chart:
        chart = chart.split()[0].strip(",.;:()")
    if chart in _YES:
        has_chart: bool | None = True
    elif chart in _NO:
        has_chart = False
    else:
        has_chart = None

    rel_raw = fields.get("relevance")
    rel = _clean_value(rel_raw) if rel_raw is not None else None
    is_none = rel in (None, "", "none", "n/a", "na")

    if has_chart is False:
        # a page without visual elements is never retained, whatever relevance word follows
        return ScreeningVerdict(page_index, False, None, rationale)
    if has_chart is None:
        if chart_raw is None and rel_raw is not None and rel == "none":
            return ScreeningVerdict(page_index, False, None, rationale)
        return fail("has no usable Has_Chart line")
    if is_none:
        return fail("reports a chart but no relevance grade")
    label = _relevance_label(rel)
    if label is None:
        return fail(f"has unrecognized relevance {rel_raw!r}")
    return ScreeningVerdict(page_index, True, label, rationale)


def screen(page_image: str, page_index: int, question: str, gateway: Gateway,
           prompts: PromptSet | None = None) -> ScreeningVerdict:
    prompts = prompts or default_prompts()
    text = prompts["page_screening"].render(question=question, page_number=page_index)
    reply = gateway.complete(gateway.request(ModelClass.ORDINARY, [text], [page_image])).text
    return parse_screening_reply(reply, page_index)


def screen_all(pages: Sequence[tuple[int, str]], question: str, gateway: Gateway,
               prompts: PromptSet | None = None) -> dict[int, ScreeningVerdict]:
    if not pages:
        raise ValueError("screen_all needs at least one page")
    prompts = prompts or default_prompts()
    with ThreadPoolExecutor(max_workers=min(len(pages), gateway.concurrency)) as pool:
        futures = {idx: pool.submit(screen, ref, idx, question, gateway, prompts) for idx, ref in pages}
        return {idx: futures[idx].result() for idx in sorted(futures)}


def build_retained_set(verdicts: Iterable[ScreeningVerdict] | Mapping[int, ScreeningVerdict]) -> RetainedSet:
    values = verdicts.values() if isinstance(verdicts, Mapping) else verdicts
    return RetainedSet(tuple(sorted(v.page for v in values if v.retained)))
