"""Multi-vector page index with late-interaction (MaxSim) scoring.

Each page keeps one embedding per visual patch and each query one embedding
per token.  A page's relevance is the sum, over query vectors, of the best
inner product against any of the page's vectors.  Vectors are used exactly as
supplied; no normalization happens here.

Binary layout (all integers little-endian)::

    magic      4s   b"MVIX"
    version    u16  FORMAT_VERSION
    flags      u16  bit0: unit-norm status known, bit1: vectors are unit-norm
    dim        u32
    n_pages    u32
    id_len     u32  followed by id_len bytes of UTF-8 doc_id
    n_pages x (page_index u32, n_vectors u32, n_vectors*dim float32 row-major)
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CorruptHeaderError,
    CorruptPayloadError,
    DimensionMismatchError,
    EmptyIndexError,
    ImportFormatError,
    IndexInvariantError,
    IndexNotFoundError,
    IndexVersionError,
    NotAnIndexFileError,
    TruncatedIndexError,
)

__all__ = [
    "PageEmbedding",
    "QueryEmbedding",
    "MultiVectorIndex",
    "RelevanceScore",
    "score_page",
    "score_pages",
    "retrieve_top_k",
    "write_index",
    "read_index",
    "import_jsonl",
    "export_jsonl",
    "MAGIC",
    "FORMAT_VERSION",
]

MAGIC = b"MVIX"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHIII")
_PAGE_HEADER = struct.Struct("<II")
_F32 = np.dtype("<f4")

_FLAG_NORM_KNOWN = 0x1
_FLAG_UNIT_NORM = 0x2
_KNOWN_FLAGS = _FLAG_NORM_KNOWN | _FLAG_UNIT_NORM


def _as_matrix(vectors, what: str) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise IndexInvariantError(f"{what} must be a nonempty (count, dim) matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise IndexInvariantError(f"{what} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class PageEmbedding:
    page_index: int
    vectors: np.ndarray

    def __post_init__(self) -> None:
        if self.page_index < 1:
            raise IndexInvariantError(f"page_index must be >= 1, got {self.page_index}")
        object.__setattr__(self, "vectors", _as_matrix(self.vectors, f"page {self.page_index} vectors"))

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PageEmbedding):
            return NotImplemented
        return (
            self.page_index == other.page_index
            and self.vectors.shape == other.vectors.shape
            and self.vectors.tobytes() == other.vectors.tobytes()
        )


@dataclass(frozen=True, eq=False)
class QueryEmbedding:
    vectors: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "vectors", _as_matrix(self.vectors, "query vectors"))

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


@dataclass(frozen=True)
class RelevanceScore:
    page_index: int
    score: float


@dataclass(frozen=True, eq=False)
class MultiVectorIndex:
    """Immutable per-document page index.

    ``unit_norm`` records whether the imported vectors were observed to be
    L2-normalized (None when unknown).  It is provenance only.
    """

    doc_id: str
    dim: int
    pages: tuple[PageEmbedding, ...] = field(default_factory=tuple)
    unit_norm: bool | None = None

    def __post_init__(self) -> None:
        pages = tuple(self.pages)
        object.__setattr__(self, "pages", pages)
        if self.dim < 1:
            raise IndexInvariantError(f"dim must be positive, got {self.dim}")
        prev = 0
        for page in pages:
            if page.dim != self.dim:
                raise IndexInvariantError(
                    f"page {page.page_index} has dim {page.dim}, index dim is {self.dim}"
                )
            if page.page_index <= prev:
                raise IndexInvariantError("pages must be sorted by unique ascending page_index")
            prev = page.page_index

    def __len__(self) -> int:
        return len(self.pages)

    def page(self, page_index: int) -> PageEmbedding:
        for p in self.pages:
            if p.page_index == page_index:
                return p
        raise KeyError(page_index)

    @property
    def vector_count(self) -> int:
        return sum(p.vectors.shape[0] for p in self.pages)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiVectorIndex):
            return NotImplemented
        return (
            self.doc_id == other.doc_id
            and self.dim == other.dim
            and self.unit_norm == other.unit_norm
            and self.pages == other.pages
        )


# -- scoring -------------------------------------------------------------

def score_page(query: QueryEmbedding, page: PageEmbedding) -> RelevanceScore:
    if query.dim != page.dim:
        raise DimensionMismatchError(query.dim, page.dim)
    sims = query.vectors.astype(np.float64) @ page.vectors.astype(np.float64).T
    return RelevanceScore(page.page_index, float(sims.max(axis=1).sum()))


def score_pages(index: MultiVectorIndex, query: QueryEmbedding) -> list[RelevanceScore]:
    """Score every page of ``index``, in page order."""
    if query.dim != index.dim:
        raise DimensionMismatchError(query.dim, index.dim)
    return [score_page(query, page) for page in index.pages]


def retrieve_top_k(index: MultiVectorIndex, query: QueryEmbedding, k: int = 5) -> list[RelevanceScore]:
    """Return the ``k`` best pages, highest score first, ties by lower page index."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not index.pages:
        raise EmptyIndexError()
    scores = score_pages(index, query)
    scores.sort(key=lambda s: (-s.score, s.page_index))
    return scores[:k]


# -- binary codec --------------------------------------------------------

def _flags_for(unit_norm: bool | None) -> int:
    if unit_norm is None:
        return 0
    return _FLAG_NORM_KNOWN | (_FLAG_UNIT_NORM if unit_norm else 0)


def write_index(index: MultiVectorIndex, path: str | PathLike) -> None:
    if not index.pages:
        raise IndexInvariantError("cannot write an index with 0 pages")
    doc_id = index.doc_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, _flags_for(index.unit_norm),
                              index.dim, len(index.pages), len(doc_id)))
        fh.write(doc_id)
        for page in index.pages:
            fh.write(_PAGE_HEADER.pack(page.page_index, page.vectors.shape[0]))
            fh.write(np.ascontiguousarray(page.vectors, dtype=_F32).tobytes())


def read_index(path: str | PathLike) -> MultiVectorIndex:
    path = Path(path)
    if not path.is_file():
        raise IndexNotFoundError(path)
    data = path.read_bytes()
    return decode_index(data, source=str(path))


def decode_index(data: bytes, source: str = "<bytes>") -> MultiVectorIndex:
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise NotAnIndexFileError(f"not an index file: {source}")
    if len(data) < _HEADER.size:
        raise CorruptHeaderError(f"{source}: header is {len(data)} bytes, need {_HEADER.size}")
    _, version, flags, dim, n_pages, id_len = _HEADER.unpack_from(data, 0)
    if version != FORMAT_VERSION:
        raise IndexVersionError(f"{source}: unsupported index version {version} (expected {FORMAT_VERSION})")
    if flags & ~_KNOWN_FLAGS:
        raise CorruptHeaderError(f"{source}: unknown flag bits {flags:#x}")
    if dim == 0 or n_pages == 0:
        raise CorruptHeaderError(f"{source}: dim={dim} n_pages={n_pages}")
    offset = _HEADER.size
    if offset + id_len > len(data):
        raise CorruptHeaderError(f"{source}: doc_id length {id_len} exceeds file size")
    try:
        doc_id = data[offset: offset + id_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptHeaderError(f"{source}: doc_id is not UTF-8") from exc
    offset += id_len

    unit_norm = bool(flags & _FLAG_UNIT_NORM) if flags & _FLAG_NORM_KNOWN else None
    pages = []
    prev = 0
    for n in range(n_pages):
        if offset + _PAGE_HEADER.size > len(data):
            raise TruncatedIndexError(f"{source}: truncated at page record {n + 1}/{n_pages}")
        page_index, count = _PAGE_HEADER.unpack_from(data, offset)
        offset += _PAGE_HEADER.size
        if count == 0 or page_index <= prev:
            raise CorruptPayloadError(f"{source}: bad page record {n + 1} (page {page_index}, {count} vectors)")
        nbytes = count * dim * _F32.itemsize
        if offset + nbytes > len(data):
            raise TruncatedIndexError(f"{source}: truncated payload for page {page_index}")
        vectors = np.frombuffer(data, dtype=_F32, count=count * dim, offset=offset).reshape(count, dim)
        offset += nbytes
        if not np.isfinite(vectors).all():
            raise CorruptPayloadError(f"{source}: non-finite values on page {page_index}")
        pages.append(PageEmbedding(page_index, vectors.astype(np.float32)))
        prev = page_index
    if offset != len(data):
        raise CorruptPayloadError(f"{source}: {len(data) - offset} trailing bytes")
    return MultiVectorIndex(doc_id=doc_id, dim=dim, pages=tuple(pages), unit_norm=unit_norm)


# -- JSON-lines interchange ----------------------------------------------

def _is_unit_norm(vectors: Iterable[np.ndarray], tol: float = 1e-3) -> bool:
    return all(np.all(np.abs(np.linalg.norm(v, axis=1) - 1.0) <= tol) for v in vectors)


def import_jsonl(path: str | PathLike, doc_id: str | None = None) -> MultiVectorIndex:
    """Build an index from one-page-per-line JSON (``page_index``, ``vectors``).

    Lines may also carry ``doc_id``; an explicit ``doc_id`` argument wins,
    then the first line's value, then the file stem.
    """
    path = Path(path)
    pages: list[PageEmbedding] = []
    dim: int | None = None
    seen: set[int] = set()
    file_doc_id = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ImportFormatError(lineno, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ImportFormatError(lineno, "expected a JSON object")
            unknown = set(obj) - {"page_index", "vectors", "doc_id"}
            if unknown:
                raise ImportFormatError(lineno, f"unknown keys {sorted(unknown)}")
            page_index = obj.get("page_index")
            if not isinstance(page_index, int) or isinstance(page_index, bool) or page_index < 1:
                raise ImportFormatError(lineno, f"page_index must be a positive integer, got {page_index!r}")
            if page_index in seen:
                raise ImportFormatError(lineno, f"duplicate page_index {page_index}")
            vectors = obj.get("vectors")
            if not isinstance(vectors, list) or not vectors or not all(isinstance(v, list) for v in vectors):
                raise ImportFormatError(lineno, "vectors must be a nonempty list of float arrays")
            lengths = {len(v) for v in vectors}
            if len(lengths) != 1:
                raise ImportFormatError(lineno, f"ragged vectors (lengths {sorted(lengths)})")
            line_dim = lengths.pop()
            if dim is None:
                dim = line_dim
            elif line_dim != dim:
                raise ImportFormatError(lineno, f"dim mismatch: expected {dim}, got {line_dim}")
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)
                       for v in vectors for x in v):
                raise ImportFormatError(lineno, "vectors must contain finite numbers only")
            if file_doc_id is None and isinstance(obj.get("doc_id"), str):
                file_doc_id = obj["doc_id"]
            try:
                pages.append(PageEmbedding(page_index, vectors))
            except IndexInvariantError as exc:
                raise ImportFormatError(lineno, str(exc)) from exc
            seen.add(page_index)
    if not pages:
        raise ImportFormatError(0, "no pages in import file")
    pages.sort(key=lambda p: p.page_index)
    return MultiVectorIndex(
        doc_id=doc_id or file_doc_id or path.stem,
        dim=dim,
        pages=tuple(pages),
        unit_norm=_is_unit_norm(p.vectors for p in pages),
    )


def export_jsonl(index: MultiVectorIndex, path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for page in index.pages:
            # float32 -> float keeps the exact value, so re-import is lossless
            row = {"doc_id": index.doc_id, "page_index": page.page_index,
                   "vectors": [[float(x) for x in v] for v in page.vectors]}
            fh.write(json.dumps(row) + "\n")


def load_query_vectors(rows: Sequence[Sequence[float]]) -> QueryEmbedding:
    return QueryEmbedding(np.asarray(rows, dtype=np.float32))
