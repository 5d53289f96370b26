"""Difficulty assessment: one call decides ordinary vs reasoning mode and writes guidance."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .context import EvidenceContext
from .errors import ProtocolError
from .gateway import Gateway, ModelClass
from .jsonrepair import extract_json_object
from .prompts import PromptSet, default_prompts

logger = logging.getLogger(__name__)

DEFAULT_INSTRUCTIONS = "Answer directly from the evidence."


@dataclass(frozen=True)
class DifficultyDecision:
    level: int
    instructions: str
    fallback: bool = False

    def __post_init__(self) -> None:
        if self.level not in (0, 1):
            raise ValueError(f"difficulty level must be 0 or 1, got {self.level!r}")
        if not self.instructions:
            raise ValueError("instructions must be nonempty")

    def to_dict(self) -> dict:
        return {"difficulty_level": self.level, "instruction_set": self.instructions, "fallback": self.fallback}


FALLBACK = DifficultyDecision(0, DEFAULT_INSTRUCTIONS, fallback=True)


def structured_context(context: EvidenceContext) -> str:
    retained = ", ".join(map(str, context.retained_pages)) or "none"
    return (
        f"Retained page images: {retained}\n"
        f"Evidence (from {context.num_source_pages} pages):\n"
        f"{context.evidence_summary()}"
    )


def _level(value) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int) and value in (0, 1):
        return value
    if isinstance(value, str) and value.strip() in ("0", "1"):
        return int(value.strip())
    return None


def parse_difficulty_reply(text: str) -> DifficultyDecision:
    try:
        obj = extract_json_object(text)
    except ProtocolError as exc:
        logger.warning("difficulty reply unusable (%s); falling back to ordinary mode", exc)
        return FALLBACK
    level = _level(obj.get("difficulty_level"))
    if level is None:
        logger.warning("invalid difficulty_level %r; falling back to ordinary mode", obj.get("difficulty_level"))
        return FALLBACK
    instructions = obj.get("instruction_set")
    if not isinstance(instructions, str) or not instructions.strip():
        logger.warning("missing instruction_set; using default instructions")
        return DifficultyDecision(level, DEFAULT_INSTRUCTIONS, fallback=True)
    return DifficultyDecision(level, instructions)


def assess(question: str, context: EvidenceContext, gateway: Gateway,
           prompts: PromptSet | None = None) -> DifficultyDecision:
    prompts = prompts or default_prompts()
    text = prompts["difficulty_assessment"].render(
        question=question, structured_context=structured_context(context))
    reply = gateway.complete(gateway.request(ModelClass.ORDINARY, [text])).text
    return parse_difficulty_reply(reply)


def route(decision: DifficultyDecision) -> ModelClass:
    return ModelClass.REASONING if decision.level == 1 else ModelClass.ORDINARY
