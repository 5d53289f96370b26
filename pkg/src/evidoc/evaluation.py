"""Batch evaluation with rule-based, type-directed answer scoring.

Scoring rules (harness-defined, not any benchmark's official script):

* ``Int``   -- predicted number (thousands separators stripped) equals the gold integer.
* ``Float`` -- ``|pred - gold| <= tolerance * |gold|`` (relative tolerance, default 1%).
* ``Str``   -- case/whitespace/edge-punctuation-insensitive equality, or gold contained in prediction.
* ``List``  -- set equality of normalized elements.
* ``None``  -- prediction is one of the unanswerable markers (default: the sentinel), exactly.

For numbers the whole prediction is parsed first; failing that, the first
number in the text is used.
"""

from __future__ import annotations

import ast
import json
import logging
import os
import re
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Sequence

from .decision import AnswerBundle
from .errors import EvidocError, IndexNotFoundError, InvalidGoldError
from .gateway import Gateway, ModelClass
from .prompts import SENTINEL, PromptSet, default_prompts

logger = logging.getLogger(__name__)

UNANSWERABLE_GOLD = {"not answerable", "unanswerable", "no answer", SENTINEL.lower()}


class AnswerType(str, Enum):
    INT = "Int"
    FLOAT = "Float"
    STR = "Str"
    LIST = "List"
    NONE = "None"


@dataclass(frozen=True)
class EvalItem:
    question_id: str
    doc_id: str
    question: str
    gold_answer: str
    answer_type: AnswerType
    category: str = "Uncategorized"

    def __post_init__(self) -> None:
        object.__setattr__(self, "answer_type", AnswerType(self.answer_type))


class EvalItemsError(EvidocError, ValueError):
    pass


def load_items(path: str | os.PathLike) -> list[EvalItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                gold = obj["gold_answer"]
                if not isinstance(gold, str):
                    gold = json.dumps(gold)
                items.append(EvalItem(
                    question_id=str(obj["question_id"]), doc_id=str(obj["doc_id"]),
                    question=obj["question"], gold_answer=gold,
                    answer_type=AnswerType(obj["answer_type"]),
                    category=str(obj.get("category") or "Uncategorized"),
                ))
            except (ValueError, KeyError, TypeError) as exc:
                raise EvalItemsError(f"{path}:{lineno}: bad item ({exc})") from exc
    if not items:
        raise EvalItemsError("no items")
    return items


# -- normalization -----------------------------------------------------------

_THOUSANDS = re.compile(r"(?<=\d),(?=\d{3}(?!\d))")
_NUMBER = re.compile(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?")
_EDGE = "\"'`.,;:!?()[]{}*-•"


def normalize_text(s: str) -> str:
    s = unicodedata.normalize("NFKC", s).lower()
    s = " ".join(s.split())
    return s.strip(_EDGE + " ")


def parse_number(s: str) -> float | None:
    cleaned = _THOUSANDS.sub("", unicodedata.normalize("NFKC", s)).strip()
    bare = cleaned.strip("$€£¥% ").rstrip(".")
    try:
        return float(bare)
    except ValueError:
        pass
    m = _NUMBER.search(cleaned)
    return float(m.group(0)) if m else None


def _parse_list_literal(s: str) -> list[Any] | None:
    s = s.strip()
    if not (s.startswith("[") and s.endswith("]")):
        return None
    for loader in (json.loads, ast.literal_eval):
        try:
            value = loader(s)
        except (ValueError, SyntaxError):
            continue
        if isinstance(value, (list, tuple)):
            return list(value)
    return None


_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+")


def split_prediction_list(s: str) -> list[str]:
    literal = _parse_list_literal(s)
    if literal is not None:
        return [str(x) for x in literal]
    lines = [ln for ln in s.splitlines() if ln.strip()]
    if len(lines) > 1:
        return [_BULLET.sub("", ln) for ln in lines]
    sep = ";" if ";" in s else ","
    return [part for part in _THOUSANDS.sub("", s).split(sep) if part.strip()]


def _norm_element(x: Any) -> str:
    text = normalize_text(str(x))
    num = parse_number(text) if _NUMBER.fullmatch(_THOUSANDS.sub("", text)) else None
    return repr(num) if num is not None else text


# -- scoring -------------------------------------------------------------------

def score_item(predicted: str, item: EvalItem, tolerance: float = 0.01,
               unanswerable_markers: Sequence[str] = (SENTINEL,)) -> bool:
    """Return whether ``predicted`` answers ``item``; raise :class:`InvalidGoldError` for a bad gold."""
    gold = item.gold_answer
    kind = item.answer_type
    gold_unanswerable = normalize_text(gold) in UNANSWERABLE_GOLD
    if kind is AnswerType.NONE:
        if not gold_unanswerable:
            raise InvalidGoldError(f"{item.question_id}: answer_type None but gold {gold!r} is answerable")
        return predicted.strip() in unanswerable_markers
    if gold_unanswerable:
        raise InvalidGoldError(f"{item.question_id}: gold {gold!r} is unanswerable but type is {kind.value}")
    if not predicted or not predicted.strip():
        return False

    if kind is AnswerType.INT:
        g = parse_number(gold)
        if g is None or g != int(g):
            raise InvalidGoldError(f"{item.question_id}: Int gold {gold!r} is not an integer")
        p = parse_number(predicted)
        return p is not None and p == g
    if kind is AnswerType.FLOAT:
        g = parse_number(gold)
        if g is None:
            raise InvalidGoldError(f"{item.question_id}: Float gold {gold!r} is not a number")
        p = parse_number(predicted)
        if p is None:
            return False
        return abs(p - g) <= tolerance * abs(g) if g != 0 else p == 0
    if kind is AnswerType.STR:
        g = normalize_text(gold)
        if not g:
            raise InvalidGoldError(f"{item.question_id}: empty Str gold")
        p = normalize_text(predicted)
        return p == g or g in p
    if kind is AnswerType.LIST:
        g_list = _parse_list_literal(gold)
        if g_list is None:
            raise InvalidGoldError(f"{item.question_id}: List gold {gold!r} is not a list literal")
        g_set = {_norm_element(x) for x in g_list}
        p_set = {_norm_element(x) for x in split_prediction_list(predicted)}
        p_set.discard("")
        return g_set == p_set
    raise InvalidGoldError(f"unknown answer type {kind!r}")


# -- judge-based extraction (optional) ----------------------------------------

class JudgeExtractor:
    """Ask a model to reduce a long response to a short answer before scoring."""

    def __init__(self, gateway: Gateway, prompts: PromptSet | None = None) -> None:
        self.gateway = gateway
        self.prompts = prompts or default_prompts()

    def __call__(self, item: EvalItem, response: str) -> str:
        if response.strip() == SENTINEL:
            return SENTINEL
        text = self.prompts["answer_extraction"].render(
            question=item.question, answer_type=item.answer_type.value, response=response)
        return self.gateway.complete(self.gateway.request(ModelClass.ORDINARY, [text])).text.strip()


# -- batch ---------------------------------------------------------------------

@dataclass
class ItemResult:
    question_id: str
    category: str
    status: str  # scored | invalid | skipped | error
    raw_answer: str | None = None
    predicted: str | None = None
    correct: bool | None = None
    reason: str | None = None


@dataclass
class ScoreReport:
    items: list[ItemResult]
    per_category: dict[str, float] = field(default_factory=dict)
    category_counts: dict[str, tuple[int, int]] = field(default_factory=dict)
    overall: float = 0.0
    scored: int = 0
    correct: int = 0

    @property
    def errored(self) -> list[ItemResult]:
        return [r for r in self.items if r.status == "error"]

    def to_dict(self) -> dict[str, Any]:
        return {
            "overall": self.overall,
            "scored": self.scored,
            "correct": self.correct,
            "per_category": self.per_category,
            "category_counts": {k: list(v) for k, v in self.category_counts.items()},
            "items": [asdict(r) for r in self.items],
            "label": "harness-scored",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"

    def to_table(self) -> str:
        rows = [(cat, str(c), str(n), f"{self.per_category[cat]:.2f}")
                for cat, (c, n) in self.category_counts.items()]
        rows.append(("Overall", str(self.correct), str(self.scored), f"{self.overall:.2f}"))
        header = ("Category", "Correct", "Total", "Accuracy")
        widths = [max(len(r[i]) for r in [header, *rows]) for i in range(4)]

        def fmt(r):
            return "  ".join([r[0].ljust(widths[0])] + [r[i].rjust(widths[i]) for i in range(1, 4)])

        lines = [fmt(header), "  ".join("-" * w for w in widths)]
        lines += [fmt(r) for r in rows[:-1]]
        lines += ["  ".join("-" * w for w in widths), fmt(rows[-1])]
        skipped = sum(r.status != "scored" for r in self.items)
        if skipped:
            lines.append(f"({skipped} item(s) not scored: see report JSON)")
        return "\n".join(lines) + "\n"


def aggregate(results: Iterable[ItemResult]) -> ScoreReport:
    results = list(results)
    counts: dict[str, list[int]] = {}
    for r in results:
        if r.status != "scored":
            continue
        c = counts.setdefault(r.category, [0, 0])
        c[0] += bool(r.correct)
        c[1] += 1
    per_category = {cat: 100.0 * c / n for cat, (c, n) in sorted(counts.items())}
    scored = sum(n for _, n in counts.values())
    correct = sum(c for c, _ in counts.values())
    return ScoreReport(
        items=results,
        per_category=per_category,
        category_counts={cat: (c, n) for cat, (c, n) in sorted(counts.items())},
        overall=100.0 * correct / scored if scored else 0.0,
        scored=scored,
        correct=correct,
    )


def run_eval(items: Sequence[EvalItem], pipeline: Callable[[EvalItem], str | AnswerBundle], *,
             tolerance: float = 0.01, unanswerable_markers: Sequence[str] = (SENTINEL,),
             extractor: Callable[[EvalItem, str], str] | None = None, concurrency: int = 4) -> ScoreReport:
    """Answer every item with ``pipeline`` and score it; item order does not affect the numbers."""

    def one(item: EvalItem) -> ItemResult:
        res = ItemResult(item.question_id, item.category, "error")
        try:
            out = pipeline(item)
        except IndexNotFoundError as exc:
            res.status, res.reason = "skipped", str(exc)
            logger.warning("item %s skipped: %s", item.question_id, exc)
            return res
        except EvidocError as exc:
            res.reason = str(exc)
            logger.error("item %s failed: %s", item.question_id, exc)
            return res
        raw = out.answer if isinstance(out, AnswerBundle) else str(out)
        res.raw_answer = raw
        try:
            predicted = extractor(item, raw) if extractor else raw
        except EvidocError as exc:
            res.reason = f"answer extraction failed: {exc}"
            return res
        res.predicted = predicted
        try:
            res.correct = score_item(predicted, item, tolerance, unanswerable_markers)
        except InvalidGoldError as exc:
            res.status, res.reason = "invalid", str(exc)
            logger.warning("item %s excluded: %s", item.question_id, exc)
            return res
        res.status = "scored"
        return res

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        results = list(pool.map(one, items))
    return aggregate(results)
