import pytest

from evidoc.config import build_gateway, load_config, parse_config
from evidoc.errors import ConfigurationError
from evidoc.gateway import HTTPBackend, MockBackend, ModelClass

BASE = {
    "retriever": {"index_path": "idx/{doc_id}.mvix", "query_embeddings": "q.jsonl"},
    "backends": {
        "ordinary": {"endpoint": "http://localhost:8000/v1", "model": "small"},
        "reasoning": {"endpoint": "http://localhost:8001/v1", "model": "big", "api_key_env": "KEY"},
    },
}


def with_(**over):
    import copy

    d = copy.deepcopy(BASE)
    d.update(over)
    return d


def test_defaults_and_relative_paths(tmp_path):
    c = parse_config(BASE, tmp_path)
    assert c.retriever.k == 5 and c.temperature == 0.1 and c.retries == 2 and c.max_output == 2048
    assert c.retriever.index_file("doc") == tmp_path / "idx" / "doc.mvix"
    assert c.retriever.query_embeddings == tmp_path / "q.jsonl"
    assert c.eval.tolerance == 0.01


@pytest.mark.parametrize("bad", [
    with_(extra=1),
    with_(retriever={"index_path": "x", "kk": 3}),
    with_(backends={"ordinary": {"mock": "m.json", "colour": 1}, "reasoning": {"alias": "ordinary"}}),
    with_(eval={"tolerence": 0.1}),
    with_(pages={"roots": "x"}),
])
def test_unknown_keys_rejected(bad):
    with pytest.raises(ConfigurationError, match="unknown keys"):
        parse_config(bad)


@pytest.mark.parametrize("bad, msg", [
    (with_(retriever={"index_path": "x", "k": 0}), "k must be"),
    (with_(temperature=3), "temperature"),
    (with_(concurrency=0), "concurrency"),
    (with_(backends={"ordinary": {"model": "m"}, "reasoning": {"alias": "ordinary"}}), "endpoint"),
    ({"backends": BASE["backends"]}, "missing keys"),
])
def test_invalid_values(bad, msg):
    with pytest.raises(ConfigurationError, match=msg):
        parse_config(bad)


def test_env_interpolation(monkeypatch):
    monkeypatch.setenv("EVIDOC_TEST_URL", "http://gpu:9000/v1")
    monkeypatch.delenv("EVIDOC_TEST_MISSING", raising=False)
    d = with_()
    d["backends"]["ordinary"]["endpoint"] = "${EVIDOC_TEST_URL}"
    d["backends"]["ordinary"]["model"] = "${EVIDOC_TEST_MISSING:-fallback}"
    c = parse_config(d)
    assert c.backends[ModelClass.ORDINARY].endpoint == "http://gpu:9000/v1"
    assert c.backends[ModelClass.ORDINARY].model == "fallback"
    assert c.raw["backends"]["ordinary"]["endpoint"] == "${EVIDOC_TEST_URL}"
    d["backends"]["ordinary"]["model"] = "${EVIDOC_TEST_MISSING}"
    with pytest.raises(ConfigurationError, match="EVIDOC_TEST_MISSING"):
        parse_config(d)


def test_alias_shares_one_backend(tmp_path):
    (tmp_path / "m.json").write_text('{"default": "ok"}', encoding="utf-8")
    d = with_(backends={"ordinary": {"mock": "m.json"}, "reasoning": {"alias": "ordinary"}})
    gw = build_gateway(parse_config(d, tmp_path))
    assert isinstance(gw.backends[ModelClass.ORDINARY], MockBackend)
    assert gw.backends[ModelClass.ORDINARY] is gw.backends[ModelClass.REASONING]


def test_http_backends_built(tmp_path):
    gw = build_gateway(parse_config(BASE, tmp_path))
    ordinary, reasoning = gw.backends[ModelClass.ORDINARY], gw.backends[ModelClass.REASONING]
    assert isinstance(ordinary, HTTPBackend) and ordinary.model == "small"
    assert reasoning.model == "big" and reasoning is not ordinary


def test_with_k_updates_snapshot():
    c = parse_config(BASE).with_k(3)
    assert c.retriever.k == 3 and c.raw["retriever"]["k"] == 3
    assert "k" not in BASE["retriever"]


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read"):
        load_config(tmp_path / "absent.yaml")
    (tmp_path / "empty.yaml").write_text("", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="empty"):
        load_config(tmp_path / "empty.yaml")
    (tmp_path / "bad.yaml").write_text("a: [", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="invalid config"):
        load_config(tmp_path / "bad.yaml")
