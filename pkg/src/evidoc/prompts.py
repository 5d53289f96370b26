"""Prompt templates with named ``{placeholder}`` slots.

Only declared placeholder names are substituted, so literal braces (the JSON
schemas inside the prompts) pass through untouched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from os import PathLike
from pathlib import Path

from .errors import ConfigurationError

SENTINEL = "No answers found!"

# template name -> placeholders it must contain
TEMPLATE_SLOTS: dict[str, tuple[str, ...]] = {
    "clue_discovery": ("question", "page_num"),
    "page_screening": ("question", "page_number"),
    "difficulty_assessment": ("question", "structured_context"),
    "decision_text_only": ("question", "instruction_set", "num_pages", "evidence_summary"),
    "decision_with_visuals": ("question", "instruction_set", "num_pages", "evidence_summary",
                              "visual_evidence_section"),
    "answer_extraction": ("question", "answer_type", "response"),
}


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    text: str
    slots: tuple[str, ...]

    def __post_init__(self) -> None:
        missing = [s for s in self.slots if "{" + s + "}" not in self.text]
        if missing:
            raise ConfigurationError(f"template {self.name!r} lacks placeholders {missing}")

    def render(self, **values: object) -> str:
        missing = set(self.slots) - set(values)
        if missing:
            raise ConfigurationError(f"template {self.name!r} missing values for {sorted(missing)}")
        pattern = re.compile(r"\{(" + "|".join(map(re.escape, self.slots)) + r")\}")
        return pattern.sub(lambda m: str(values[m.group(1)]), self.text)


class PromptSet:
    """All agent templates, packaged defaults optionally overridden from a directory."""

    def __init__(self, directory: str | PathLike | None = None) -> None:
        self.directory = Path(directory) if directory is not None else None
        self._templates = {name: self._load(name, slots) for name, slots in TEMPLATE_SLOTS.items()}

    def _load(self, name: str, slots: tuple[str, ...]) -> PromptTemplate:
        if self.directory is not None:
            path = self.directory / f"{name}.txt"
            if path.is_file():
                return PromptTemplate(name, path.read_text(encoding="utf-8"), slots)
        text = resources.files("evidoc").joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8")
        return PromptTemplate(name, text, slots)

    def __getitem__(self, name: str) -> PromptTemplate:
        return self._templates[name]


_DEFAULT: PromptSet | None = None


def default_prompts() -> PromptSet:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = PromptSet()
    return _DEFAULT
