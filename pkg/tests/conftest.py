from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from evidoc.config import build_gateway, load_config
from evidoc.gateway import Gateway, MockBackend, ModelClass
from evidoc.index import import_jsonl, write_index

FIXTURES = Path(__file__).parent / "fixtures"
SCRIPTED = FIXTURES / "scripted"
GOLDEN_QUESTION = "What is the total revenue across 2022 and 2023?"
UNRELATED_QUESTION = "Who won the 1998 World Cup?"


@pytest.fixture
def scripted(tmp_path) -> Path:
    """Copy of the scripted fixture with its binary index built."""
    work = tmp_path / "scripted"
    shutil.copytree(SCRIPTED, work, ignore=shutil.ignore_patterns("expected"))
    write_index(import_jsonl(work / "pages.jsonl"), work / "annual-report.mvix")
    return work


@pytest.fixture
def scripted_config(scripted):
    return load_config(scripted / "config.yaml")


@pytest.fixture
def scripted_gateway(scripted_config) -> Gateway:
    return build_gateway(scripted_config)


def mock_gateway(*, rules=None, sequence=None, default=None, **kwargs) -> tuple[Gateway, MockBackend]:
    backend = MockBackend.from_script({"rules": rules or [], "sequence": sequence or [],
                                       **({"default": default} if default is not None else {})})
    gw = Gateway({ModelClass.ORDINARY: backend, ModelClass.REASONING: backend}, sleep=lambda s: None, **kwargs)
    return gw, backend


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
