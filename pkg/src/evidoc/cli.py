"""Command line entry point: ``evidoc index|export|ask|eval|inspect``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from .config import PipelineConfig, build_gateway, load_config
from .errors import EvidocError, IndexNotFoundError
from .evaluation import JudgeExtractor, load_items, run_eval
from .index import export_jsonl, import_jsonl, read_index, write_index
from .pipeline import ARTIFACT_FILES, Pipeline, encoder_from_config
from .prompts import PromptSet

log = logging.getLogger("evidoc")

EXIT_OK = 0
EXIT_ITEM_ERRORS = 1
EXIT_FAILURE = 2


def _load(args) -> PipelineConfig:
    config = load_config(args.config)
    if args.k is not None:
        config = config.with_k(args.k)
    return config


def _validate(config: PipelineConfig, mock: str | None):
    PromptSet(config.prompts)
    return build_gateway(config, mock)


def cmd_index(args) -> int:
    index = import_jsonl(args.import_path, doc_id=args.doc_id)
    write_index(index, args.out_path)
    print(f"wrote {args.out_path}: doc_id={index.doc_id} pages={len(index)} dim={index.dim} "
          f"vectors={index.vector_count} unit_norm={index.unit_norm}")
    return EXIT_OK


def cmd_export(args) -> int:
    index = read_index(args.index_path)
    export_jsonl(index, args.out_path)
    print(f"exported {len(index)} pages to {args.out_path}")
    return EXIT_OK


def _print_bundle(bundle) -> None:
    print(bundle.answer)
    print()
    print(f"[model: {bundle.model_class_used.value}, prompt: {bundle.prompt_mode.value}]")
    if bundle.references:
        print("References:")
        for r in bundle.references:
            print(f"  page {r.page_index:>4}  {r.evidence_source:<15} {r.evidence_content}")


def cmd_ask(args) -> int:
    config = _load(args)
    gateway = _validate(config, args.mock)
    index_path = config.retriever.index_file(args.doc_id)
    if not index_path.is_file():
        raise IndexNotFoundError(index_path)
    if args.dry_run:
        encoder_from_config(config)
        print(f"dry run OK: index {index_path}, k={config.retriever.k}")
        return EXIT_OK
    run_dir = Path(args.run_dir) if args.run_dir else (
        config.run_dir / f"{args.doc_id}-{hashlib.sha1(args.question.encode()).hexdigest()[:10]}")
    run = Pipeline(config, gateway).run(args.doc_id, args.question, run_dir=run_dir)
    _print_bundle(run.bundle)
    print(f"\nrun directory: {run_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _load(args)
    gateway = _validate(config, args.mock)
    items = load_items(args.items_path)
    if args.dry_run:
        encoder_from_config(config)
        missing = sorted({i.doc_id for i in items if not config.retriever.index_file(i.doc_id).is_file()})
        print(f"dry run OK: {len(items)} items, k={config.retriever.k}")
        for doc in missing:
            print(f"  warning: index not found for {doc}: {config.retriever.index_file(doc)}")
        return EXIT_OK
    out = Path(args.out) if args.out else config.run_dir / "eval"
    pipeline = Pipeline(config, gateway)
    extractor = JudgeExtractor(gateway, pipeline.prompts) if (args.judge or config.eval.judge) else None
    report = run_eval(
        items,
        lambda item: pipeline(item.doc_id, item.question, run_dir=out / "items" / item.question_id),
        tolerance=config.eval.tolerance,
        unanswerable_markers=config.eval.unanswerable_markers,
        extractor=extractor,
        concurrency=config.concurrency,
    )
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(report.to_table(), encoding="utf-8")
    print(report.to_table(), end="")
    for r in report.items:
        if r.status != "scored":
            print(f"  {r.question_id}: {r.status}: {r.reason}")
    print(f"report: {out / 'report.json'}")
    return EXIT_ITEM_ERRORS if report.errored else EXIT_OK


def cmd_inspect(args) -> int:
    run_dir = Path(args.run_dir)
    answer_path = run_dir / "answer.json"
    if not answer_path.is_file():
        print(f"not a run directory: {run_dir}", file=sys.stderr)
        return EXIT_FAILURE
    query = json.loads((run_dir / "query.json").read_text(encoding="utf-8"))
    retrieval = json.loads((run_dir / "retrieval.json").read_text(encoding="utf-8"))
    decision = json.loads((run_dir / "decision.json").read_text(encoding="utf-8"))
    answer = json.loads(answer_path.read_text(encoding="utf-8"))
    verdicts = [json.loads(ln) for ln in (run_dir / "verdicts.jsonl").read_text(encoding="utf-8").splitlines()]
    reports = [json.loads(ln) for ln in (run_dir / "clues.jsonl").read_text(encoding="utf-8").splitlines()]
    print(f"question: {query['question']}  (doc {query['doc_id']}, k={query['k']})")
    print("retrieval: " + ", ".join(f"p{r['page_index']}={r['score']:.4f}" for r in retrieval["results"]))
    for rep, ver in zip(reports, verdicts):
        print(f"  page {rep['page']:>4}: {len(rep['records'])} clue(s), screening={ver['label']}")
    print(f"difficulty: {decision['difficulty_level']} -> {decision['model_class']} ({decision['prompt_mode']})")
    print(f"answer: {answer['answer']}")
    missing = [f for f in ARTIFACT_FILES if not (run_dir / f).is_file()]
    if missing:
        print(f"missing artifacts: {', '.join(missing)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evidoc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build a binary index from JSON-lines page embeddings")
    p.add_argument("import_path")
    p.add_argument("out_path")
    p.add_argument("--doc-id")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("export", help="export a binary index back to JSON lines")
    p.add_argument("index_path")
    p.add_argument("out_path")
    p.set_defaults(func=cmd_export)

    def common(p):
        p.add_argument("--config", required=True)
        p.add_argument("--mock", help="scripted mock backend file (replaces configured backends)")
        p.add_argument("--k", type=int, help="override retriever top-K")
        p.add_argument("--dry-run", action="store_true", help="validate config and prompts, no model calls")

    p = sub.add_parser("ask", help="answer one question about one document")
    common(p)
    p.add_argument("doc_id")
    p.add_argument("question")
    p.add_argument("--run-dir")
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("eval", help="run and score a batch of questions")
    common(p)
    p.add_argument("items_path")
    p.add_argument("--out")
    p.add_argument("--judge", action="store_true", help="extract short answers with the model before scoring")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="summarize a run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except EvidocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
