"""Pipeline configuration loaded from a single YAML (or JSON) file.

String values may reference environment variables as ``${NAME}`` or
``${NAME:-default}``.  Relative paths resolve against the config file's
directory.  Unknown keys are rejected at every level.
"""

from __future__ import annotations

import copy
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigurationError
from .gateway import DEFAULT_MAX_OUTPUT, DEFAULT_RETRIES, DEFAULT_TEMPERATURE, Gateway, HTTPBackend, MockBackend, ModelClass
from .prompts import SENTINEL

_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)(?::-([^}]*))?\}")


@dataclass(frozen=True)
class RetrieverConfig:
    index_path: str
    k: int = 5
    query_embeddings: Path | None = None
    encoder_url: str | None = None

    def index_file(self, doc_id: str) -> Path:
        return Path(self.index_path.replace("{doc_id}", doc_id))


@dataclass(frozen=True)
class PagesConfig:
    root: Path | None = None
    pattern: str = "{doc_id}/page_{page}.png"

    def ref(self, doc_id: str, page: int) -> str:
        return self.pattern.format(doc_id=doc_id, page=page)


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str | None = None
    timeout: float = 120.0
    mock: Path | None = None


@dataclass(frozen=True)
class EvalConfig:
    tolerance: float = 0.01
    unanswerable_markers: tuple[str, ...] = (SENTINEL,)
    judge: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    retriever: RetrieverConfig
    backends: Mapping[ModelClass, BackendConfig]
    pages: PagesConfig = field(default_factory=PagesConfig)
    prompts: Path | None = None
    temperature: float = DEFAULT_TEMPERATURE
    max_output: int = DEFAULT_MAX_OUTPUT
    concurrency: int = 4
    retries: int = DEFAULT_RETRIES
    backoff: float = 0.5
    run_dir: Path = Path("runs")
    eval: EvalConfig = field(default_factory=EvalConfig)
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def with_k(self, k: int) -> "PipelineConfig":
        if k < 1:
            raise ConfigurationError(f"k must be >= 1, got {k}")
        raw = copy.deepcopy(dict(self.raw))
        raw.setdefault("retriever", {})["k"] = k
        return replace(self, retriever=replace(self.retriever, k=k), raw=raw)


def interpolate(value: Any) -> Any:
    if isinstance(value, str):
        def sub(m: re.Match) -> str:
            name, default = m.group(1), m.group(2)
            if name in os.environ:
                return os.environ[name]
            if default is not None:
                return default
            raise ConfigurationError(f"environment variable {name} is not set")
        return _ENV_RE.sub(sub, value)
    if isinstance(value, dict):
        return {k: interpolate(v) for k, v in value.items()}
    if isinstance(value, list):
        return [interpolate(v) for v in value]
    return value


def _check_keys(section: str, data: Any, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(data, dict):
        raise ConfigurationError(f"{section}: expected a mapping")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigurationError(f"{section}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(data)
    if missing:
        raise ConfigurationError(f"{section}: missing keys {sorted(missing)}")
    return data


def _path(value: Any, base: Path) -> Path | None:
    if value is None:
        return None
    p = Path(str(value)).expanduser()
    return p if p.is_absolute() else base / p


def _backend(name: str, data: Any, base: Path) -> BackendConfig:
    data = _check_keys(f"backends.{name}", data, {"endpoint", "model", "api_key_env", "timeout", "mock"})
    if data.get("mock") is not None:
        return BackendConfig(mock=_path(data["mock"], base))
    if not data.get("endpoint") or not data.get("model"):
        raise ConfigurationError(f"backends.{name}: needs 'endpoint' and 'model' (or 'mock')")
    return BackendConfig(endpoint=data["endpoint"], model=data["model"],
                         api_key_env=data.get("api_key_env"), timeout=float(data.get("timeout", 120.0)))


def parse_config(raw: Mapping[str, Any], base_dir: str | os.PathLike = ".") -> PipelineConfig:
    base = Path(base_dir)
    data = interpolate(copy.deepcopy(dict(raw)))
    _check_keys("config", data, {"retriever", "backends", "pages", "prompts", "temperature", "max_output",
                                 "concurrency", "retries", "backoff", "run_dir", "eval"},
                {"retriever", "backends"})

    r = _check_keys("retriever", data["retriever"], {"index_path", "k", "query_embeddings", "encoder_url"},
                    {"index_path"})
    k = int(r.get("k", 5))
    if k < 1:
        raise ConfigurationError(f"retriever.k must be >= 1, got {k}")
    retriever = RetrieverConfig(
        index_path=str(_path(r["index_path"], base)),
        k=k,
        query_embeddings=_path(r.get("query_embeddings"), base),
        encoder_url=r.get("encoder_url"),
    )

    b = _check_keys("backends", data["backends"], {"ordinary", "reasoning"}, {"ordinary", "reasoning"})
    ordinary = _backend("ordinary", b["ordinary"], base)
    if b["reasoning"] == {"alias": "ordinary"} or b["reasoning"] == "ordinary":
        reasoning = ordinary
    else:
        reasoning = _backend("reasoning", b["reasoning"], base)

    p = _check_keys("pages", data.get("pages", {}), {"root", "pattern"})
    pages = PagesConfig(root=_path(p.get("root"), base), pattern=p.get("pattern", PagesConfig.pattern))

    e = _check_keys("eval", data.get("eval", {}), {"tolerance", "unanswerable_markers", "judge"})
    markers = tuple(e.get("unanswerable_markers", (SENTINEL,)))
    ev = EvalConfig(tolerance=float(e.get("tolerance", 0.01)), unanswerable_markers=markers,
                    judge=bool(e.get("judge", False)))

    temperature = float(data.get("temperature", DEFAULT_TEMPERATURE))
    if not 0.0 <= temperature <= 2.0:
        raise ConfigurationError(f"temperature must be in [0, 2], got {temperature}")
    concurrency = int(data.get("concurrency", 4))
    if concurrency < 1:
        raise ConfigurationError("concurrency must be >= 1")
    return PipelineConfig(
        retriever=retriever,
        backends={ModelClass.ORDINARY: ordinary, ModelClass.REASONING: reasoning},
        pages=pages,
        prompts=_path(data.get("prompts"), base),
        temperature=temperature,
        max_output=int(data.get("max_output", DEFAULT_MAX_OUTPUT)),
        concurrency=concurrency,
        retries=int(data.get("retries", DEFAULT_RETRIES)),
        backoff=float(data.get("backoff", 0.5)),
        run_dir=_path(data.get("run_dir", "runs"), base),
        eval=ev,
        raw=copy.deepcopy(dict(raw)),
    )


def load_config(path: str | os.PathLike) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid config {path}: {exc}") from exc
    if raw is None:
        raise ConfigurationError(f"config {path} is empty")
    return parse_config(raw, base_dir=path.parent)


def build_gateway(config: PipelineConfig, mock_script: str | os.PathLike | None = None) -> Gateway:
    """Instantiate backends; ``mock_script`` replaces both classes with one scripted mock."""
    backends: dict[ModelClass, Any] = {}
    if mock_script is not None:
        mock = MockBackend.from_file(mock_script)
        backends = {ModelClass.ORDINARY: mock, ModelClass.REASONING: mock}
    else:
        built: dict[int, Any] = {}
        for cls, bc in config.backends.items():
            if id(bc) not in built:
                if bc.mock is not None:
                    built[id(bc)] = MockBackend.from_file(bc.mock)
                else:
                    built[id(bc)] = HTTPBackend(endpoint=bc.endpoint, model=bc.model, api_key_env=bc.api_key_env,
                                                image_root=config.pages.root, timeout=bc.timeout)
            backends[cls] = built[id(bc)]
    return Gateway(backends, retries=config.retries, backoff_base=config.backoff, concurrency=config.concurrency,
                   temperature=config.temperature, max_output=config.max_output)
