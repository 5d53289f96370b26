"""End-to-end question answering over one indexed document.

retrieve top-K pages -> (clue discovery || page screening) per page ->
evidence context -> difficulty assessment -> core decision.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Protocol

import httpx

from . import clues, screening
from .clues import PageClueReport
from .config import PipelineConfig
from .context import EvidenceContext, build
from .decision import AnswerBundle, DecisionPrompt, decide, render_decision_prompt
from .difficulty import DifficultyDecision, assess
from .errors import ConfigurationError, EvidocError, IndexNotFoundError, PipelineError
from .gateway import Gateway
from .index import MultiVectorIndex, QueryEmbedding, RelevanceScore, read_index, retrieve_top_k
from .prompts import PromptSet
from .screening import RetainedSet, ScreeningVerdict, build_retained_set

logger = logging.getLogger(__name__)

ARTIFACT_FILES = ("query.json", "retrieval.json", "clues.jsonl", "verdicts.jsonl",
                  "context.txt", "decision.json", "answer.json")


class QueryEncoder(Protocol):
    def encode(self, question: str) -> QueryEmbedding: ...


class PrecomputedQueries:
    """Query embeddings exported ahead of time, one JSON object per line: ``question``, ``vectors``."""

    def __init__(self, table: Mapping[str, QueryEmbedding]) -> None:
        self.table = dict(table)

    @classmethod
    def from_jsonl(cls, path: str | os.PathLike) -> "PrecomputedQueries":
        table = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    table[obj["question"]] = QueryEmbedding(obj["vectors"])
                except (ValueError, KeyError, TypeError, EvidocError) as exc:
                    raise ConfigurationError(f"{path}:{lineno}: bad query embedding row ({exc})") from exc
        return cls(table)

    def encode(self, question: str) -> QueryEmbedding:
        try:
            return self.table[question]
        except KeyError:
            raise ConfigurationError(f"no precomputed query embedding for question {question!r}") from None


class HTTPQueryEncoder:
    """Embedding service: POST ``{"queries": [q]}`` -> ``{"embeddings": [[[...], ...]]}``."""

    def __init__(self, url: str, client: httpx.Client | None = None, timeout: float = 60.0) -> None:
        self.url = url
        self.client = client or httpx.Client(timeout=timeout)

    def encode(self, question: str) -> QueryEmbedding:
        resp = self.client.post(self.url, json={"queries": [question]})
        resp.raise_for_status()
        return QueryEmbedding(resp.json()["embeddings"][0])


def encoder_from_config(config: PipelineConfig) -> QueryEncoder:
    if config.retriever.query_embeddings is not None:
        return PrecomputedQueries.from_jsonl(config.retriever.query_embeddings)
    if config.retriever.encoder_url:
        return HTTPQueryEncoder(config.retriever.encoder_url)
    raise ConfigurationError("retriever needs 'query_embeddings' or 'encoder_url'")


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


def _jsonl(rows) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)


@dataclass(frozen=True)
class PipelineRun:
    doc_id: str
    question: str
    k: int
    retrieval: tuple[RelevanceScore, ...]
    clue_reports: Mapping[int, PageClueReport]
    verdicts: Mapping[int, ScreeningVerdict]
    retained: RetainedSet
    context: EvidenceContext
    decision: DifficultyDecision
    decision_prompt: DecisionPrompt
    bundle: AnswerBundle
    config_snapshot: Mapping[str, Any]

    def artifacts(self) -> dict[str, str]:
        """Run files, keyed by name; contents are stable across identical runs."""
        return {
            "query.json": _dumps({"doc_id": self.doc_id, "question": self.question, "k": self.k,
                                  "config": self.config_snapshot}),
            "retrieval.json": _dumps({"doc_id": self.doc_id, "k": self.k,
                                      "results": [{"page_index": s.page_index, "score": s.score}
                                                  for s in self.retrieval]}),
            "clues.jsonl": _jsonl(self.clue_reports[p].to_dict() for p in sorted(self.clue_reports)),
            "verdicts.jsonl": _jsonl(self.verdicts[p].to_dict() for p in sorted(self.verdicts)),
            "context.txt": self.context.dump(),
            "decision.json": _dumps({
                **self.decision.to_dict(),
                "model_class": self.decision_prompt.model_class.value,
                "prompt_mode": self.decision_prompt.mode.value,
                "images": list(self.decision_prompt.images),
                "prompt": self.decision_prompt.text,
            }),
            "answer.json": _dumps(self.bundle.to_dict()),
        }

    def write(self, run_dir: str | os.PathLike) -> Path:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        for name, content in self.artifacts().items():
            (run_dir / name).write_text(content, encoding="utf-8")
        return run_dir


def _fan_out(pages: list[tuple[int, str]], question: str, gateway: Gateway, prompts: PromptSet | None):
    """Clue discovery and screening for every page, all calls in flight together."""
    with ThreadPoolExecutor(max_workers=2 * len(pages)) as pool:
        clue_f = {i: pool.submit(clues.discover, ref, i, question, gateway, prompts) for i, ref in pages}
        screen_f = {i: pool.submit(screening.screen, ref, i, question, gateway, prompts) for i, ref in pages}
        reports, verdicts = {}, {}
        for i in sorted(clue_f):
            try:
                reports[i] = clue_f[i].result()
            except Exception as exc:
                raise PipelineError("clue_discovery", exc, page=i) from exc
            try:
                verdicts[i] = screen_f[i].result()
            except Exception as exc:
                raise PipelineError("page_screening", exc, page=i) from exc
    return reports, verdicts


def run_pipeline(index: MultiVectorIndex, question: str, config: PipelineConfig, gateway: Gateway, *,
                 encoder: QueryEncoder | None = None, prompts: PromptSet | None = None,
                 run_dir: str | os.PathLike | None = None) -> PipelineRun:
    prompts = prompts or PromptSet(config.prompts)
    k = config.retriever.k
    try:
        encoder = encoder or encoder_from_config(config)
        top = retrieve_top_k(index, encoder.encode(question), k)
    except Exception as exc:
        raise PipelineError("retrieval", exc) from exc

    page_refs = {s.page_index: config.pages.ref(index.doc_id, s.page_index) for s in top}
    pages = sorted(page_refs.items())
    reports, verdicts = _fan_out(pages, question, gateway, prompts)
    retained = build_retained_set(verdicts)
    context = build(reports, retained, question, page_refs)

    try:
        decision = assess(question, context, gateway, prompts)
    except Exception as exc:
        raise PipelineError("difficulty_assessment", exc) from exc
    try:
        prompt = render_decision_prompt(question, context, decision, prompts)
        bundle = decide(question, context, decision, gateway, prompts)
    except Exception as exc:
        raise PipelineError("core_decision", exc) from exc

    run = PipelineRun(
        doc_id=index.doc_id, question=question, k=k, retrieval=tuple(top),
        clue_reports=reports, verdicts=verdicts, retained=retained, context=context,
        decision=decision, decision_prompt=prompt, bundle=bundle, config_snapshot=dict(config.raw),
    )
    if run_dir is not None:
        run.write(run_dir)
    return run


class Pipeline:
    """Config-bound pipeline with an index cache, shareable across threads."""

    def __init__(self, config: PipelineConfig, gateway: Gateway, encoder: QueryEncoder | None = None) -> None:
        self.config = config
        self.gateway = gateway
        self.encoder = encoder
        self.prompts = PromptSet(config.prompts)
        self._indices: dict[str, MultiVectorIndex] = {}
        self._lock = threading.Lock()

    def index_for(self, doc_id: str) -> MultiVectorIndex:
        with self._lock:
            if doc_id not in self._indices:
                path = self.config.retriever.index_file(doc_id)
                if not path.is_file():
                    raise IndexNotFoundError(path)
                self._indices[doc_id] = read_index(path)
            return self._indices[doc_id]

    def _encoder(self) -> QueryEncoder:
        with self._lock:
            if self.encoder is None:
                self.encoder = encoder_from_config(self.config)
            return self.encoder

    def run(self, doc_id: str, question: str, run_dir: str | os.PathLike | None = None) -> PipelineRun:
        index = self.index_for(doc_id)
        return run_pipeline(index, question, self.config, self.gateway, encoder=self._encoder(),
                            prompts=self.prompts, run_dir=run_dir)

    def __call__(self, doc_id: str, question: str, run_dir: str | os.PathLike | None = None) -> AnswerBundle:
        return self.run(doc_id, question, run_dir).bundle
