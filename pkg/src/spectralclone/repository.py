"""Preprocessing, the on-disk repository and the clone-search query.

On disk a repository is a directory holding

``manifest.json``
    ``{"schema_version": 1, "k_mode": {...}, "count": N}``; the count is the
    commit point, so a torn append past it is ignored on load.
``records.ndjson``
    one canonical-JSON record per line.
"""
from __future__ import annotations

import json
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np
from filelock import FileLock

from . import metrics as M
from .errors import (
    CloneSearchError,
    DuplicateId,
    EmptyRepository,
    InvalidParameter,
    ModeMismatch,
    SchemaViolation,
    UnknownMetric,
)
from .features import ProgramFeatures
from .graph import cfg_edge_vector, laplacian, undirected_call_graph
from .spectral import full_spectrum, normalize, top_k_spectrum

SCHEMA_VERSION = 1
MANIFEST = "manifest.json"
RECORDS = "records.ndjson"


def k_mode_label(k: Optional[int]) -> str:
    return "full" if k is None else f"top_k({k})"


@dataclass(frozen=True, eq=False)
class RepositoryRecord:
    program_id: str
    signature: M.SpectralSignature
    baseline: M.BaselineFeatures
    preprocess_wall_time: float = 0.0

    def to_json(self) -> str:
        b = self.baseline
        doc = {
            "program_id": self.program_id,
            "k": self.signature.k,
            "v": self.signature.v.tolist(),
            "w": self.signature.w.tolist(),
            "baseline": {
                "file_size_bytes": b.file_size_bytes,
                "disasm_size_bytes": b.disasm_size_bytes,
                "cg_n_vertices": b.cg_n_vertices,
                "cg_n_edges": b.cg_n_edges,
                "ngram_vector": b.ngram_vector.tolist(),
                "string_set": sorted(b.string_set),
                "external_name_set": sorted(b.external_name_set),
            },
            "preprocess_wall_time": self.preprocess_wall_time,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "RepositoryRecord":
        try:
            doc = json.loads(line)
            b = doc["baseline"]
            baseline = M.BaselineFeatures(
                file_size_bytes=b["file_size_bytes"],
                disasm_size_bytes=b["disasm_size_bytes"],
                cg_n_vertices=b["cg_n_vertices"],
                cg_n_edges=b["cg_n_edges"],
                ngram_vector=np.asarray(b["ngram_vector"], dtype=float),
                string_set=frozenset(b["string_set"]),
                external_name_set=frozenset(b["external_name_set"]),
            )
            signature = M.SpectralSignature(
                np.asarray(doc["v"], dtype=float), np.asarray(doc["w"], dtype=float), doc["k"]
            )
            return cls(doc["program_id"], signature, baseline, doc["preprocess_wall_time"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation("records.ndjson", f"bad record: {exc}") from exc


def preprocess(p: ProgramFeatures, k: Optional[int] = None) -> RepositoryRecord:
    """Compute the stored features of one program.

    ``k=None`` uses the full call-graph spectrum; an integer keeps only the
    ``k`` largest eigenvalues.
    """
    if k is not None and k < 1:
        raise InvalidParameter(f"K must be >= 1, got {k}")
    start = time.perf_counter()
    graph = undirected_call_graph(p)
    lap = laplacian(graph)
    spectrum = full_spectrum(lap) if k is None else top_k_spectrum(lap, k)
    signature = M.SpectralSignature(
        normalize(spectrum.eigenvalues), normalize(cfg_edge_vector(p).astype(float)), k
    )
    baseline = M.BaselineFeatures(
        file_size_bytes=p.file_size_bytes,
        disasm_size_bytes=p.disasm_size_bytes,
        cg_n_vertices=graph.n_vertices,
        cg_n_edges=graph.n_edges,
        ngram_vector=M.mutantxs_embed(p.mnemonics or ()),
        string_set=p.strings or frozenset(),
        external_name_set=p.resolved_external_names(),
    )
    return RepositoryRecord(p.program_id, signature, baseline, time.perf_counter() - start)


def _preprocess_args(args):
    return preprocess(*args)


def preprocess_many(programs: Iterable[ProgramFeatures], k: Optional[int] = None, workers: int = 1) -> list[RepositoryRecord]:
    programs = list(programs)
    if workers <= 1 or len(programs) < 2:
        return [preprocess(p, k) for p in programs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_preprocess_args, [(p, k) for p in programs]))


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Repository:
    """Records keyed by program id, all sharing one spectrum mode.

    With ``path=None`` the repository lives in memory only.
    """

    def __init__(self, k: Optional[int] = None, path: Optional[str | Path] = None):
        self.k = k
        self.path = Path(path) if path is not None else None
        self._records: list[RepositoryRecord] = []
        self._index: dict[str, int] = {}
        self._offset = 0

    # -- persistence -------------------------------------------------------
    @staticmethod
    def _manifest_doc(k: Optional[int], count: int) -> dict:
        mode = {"kind": "full"} if k is None else {"kind": "top_k", "k": k}
        return {"schema_version": SCHEMA_VERSION, "k_mode": mode, "count": count}

    @classmethod
    def create(cls, path: str | Path, k: Optional[int] = None) -> "Repository":
        path = Path(path)
        if (path / MANIFEST).exists():
            raise CloneSearchError(f"repository already exists at {path}")
        path.mkdir(parents=True, exist_ok=True)
        (path / RECORDS).write_bytes(b"")
        _write_atomic(path / MANIFEST, json.dumps(cls._manifest_doc(k, 0), sort_keys=True))
        return cls(k, path)

    @staticmethod
    def is_repository(path: str | Path) -> bool:
        return (Path(path) / MANIFEST).is_file()

    @classmethod
    def open(cls, path: str | Path) -> "Repository":
        path = Path(path)
        try:
            manifest = json.loads((path / MANIFEST).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise CloneSearchError(f"no repository at {path}") from exc
        except json.JSONDecodeError as exc:
            raise SchemaViolation(MANIFEST, str(exc)) from exc
        if manifest.get("schema_version") != SCHEMA_VERSION:
            raise SchemaViolation(f"{MANIFEST}.schema_version", "unsupported version")
        mode = manifest.get("k_mode", {})
        if mode.get("kind") == "full":
            k = None
        elif mode.get("kind") == "top_k" and isinstance(mode.get("k"), int):
            k = mode["k"]
        else:
            raise SchemaViolation(f"{MANIFEST}.k_mode", f"bad mode {mode!r}")
        count = manifest.get("count")
        repo = cls(k, path)
        with open(path / RECORDS, "rb") as fh:
            for _ in range(count):
                line = fh.readline()
                if not line.endswith(b"\n"):
                    raise SchemaViolation(RECORDS, f"expected {count} records")
                repo._remember(RepositoryRecord.from_json(line.decode("utf-8")))
                repo._offset += len(line)
        return repo

    def _remember(self, record: RepositoryRecord) -> None:
        if record.signature.k != self.k:
            raise ModeMismatch(
                f"record {record.program_id} is {k_mode_label(record.signature.k)}, "
                f"repository is {k_mode_label(self.k)}"
            )
        if record.program_id in self._index:
            raise DuplicateId(record.program_id)
        self._index[record.program_id] = len(self._records)
        self._records.append(record)

    def add(self, record: RepositoryRecord) -> "Repository":
        return self.add_many([record])

    def add_many(self, records: Iterable[RepositoryRecord]) -> "Repository":
        records = list(records)
        seen = set()
        for r in records:
            if r.signature.k != self.k:
                raise ModeMismatch(
                    f"record {r.program_id} is {k_mode_label(r.signature.k)}, "
                    f"repository is {k_mode_label(self.k)}"
                )
            if r.program_id in self._index or r.program_id in seen:
                raise DuplicateId(r.program_id)
            seen.add(r.program_id)
        if self.path is not None:
            self._persist(records)
        for r in records:
            self._remember(r)
        return self

    def _persist(self, records: list[RepositoryRecord]) -> None:
        payload = "".join(r.to_json() + "\n" for r in records).encode("utf-8")
        with FileLock(str(self.path / ".lock")):
            on_disk = json.loads((self.path / MANIFEST).read_text(encoding="utf-8"))["count"]
            if on_disk != len(self._records):
                raise CloneSearchError("repository changed on disk since it was opened")
            with open(self.path / RECORDS, "r+b") as fh:
                fh.seek(self._offset)
                fh.truncate()
                fh.write(payload)
                fh.flush()
                os.fsync(fh.fileno())
            count = len(self._records) + len(records)
            _write_atomic(self.path / MANIFEST, json.dumps(self._manifest_doc(self.k, count), sort_keys=True))
        self._offset += len(payload)

    # -- access ------------------------------------------------------------
    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[RepositoryRecord]:
        return iter(self._records)

    def __contains__(self, program_id: str) -> bool:
        return program_id in self._index

    def get(self, program_id: str) -> RepositoryRecord:
        return self._records[self._index[program_id]]

    @property
    def records(self) -> tuple[RepositoryRecord, ...]:
        return tuple(self._records)


# ---------------------------------------------------------------------------
# query

@dataclass(frozen=True)
class Hit:
    program_id: str
    similarity: float
    degenerate: bool = False  # both literal sets empty (Jaccard 0/0 := 1)


@dataclass(frozen=True)
class RankedResult:
    target_id: str
    metric: str
    hits: tuple[Hit, ...]
    preprocess_wall_time: float
    query_wall_time: float

    def __len__(self) -> int:
        return len(self.hits)

    def to_dict(self) -> dict:
        return {
            "target": self.target_id,
            "metric": self.metric,
            "preprocess_wall_time": self.preprocess_wall_time,
            "query_wall_time": self.query_wall_time,
            "results": [
                {"rank": i + 1, "program_id": h.program_id, "similarity": h.similarity,
                 **({"degenerate": True} if h.degenerate else {})}
                for i, h in enumerate(self.hits)
            ],
        }


def check_metric(metric: str, k: Optional[int]) -> None:
    if metric not in M.METRICS:
        raise UnknownMetric(f"unknown metric {metric!r}; known: {', '.join(M.METRIC_IDS)}")
    if metric in M.REQUIRES_FULL and k is not None:
        raise ModeMismatch(f"metric {metric} needs a full-spectrum repository, got {k_mode_label(k)}")
    if metric in M.REQUIRES_TOP_K and k is None:
        raise ModeMismatch(f"metric {metric} needs a top-K repository, got full")


def _score_chunk(args) -> list[float]:
    metric, target, records = args
    fn = M.METRICS[metric]
    return [fn(target, r) for r in records]


def score_all(target: RepositoryRecord, records: list[RepositoryRecord], metric: str, workers: int = 1) -> list[float]:
    """Similarity of ``target`` to every record, in record order."""
    if workers <= 1 or len(records) < 2 * workers:
        return _score_chunk((metric, target, records))
    size = -(-len(records) // workers)
    chunks = [(metric, target, records[i:i + size]) for i in range(0, len(records), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [s for part in pool.map(_score_chunk, chunks) for s in part]


def rank(target: RepositoryRecord, records: list[RepositoryRecord], metric: str, workers: int = 1) -> list[Hit]:
    """All records ordered by descending similarity, ties by program id."""
    scores = score_all(target, records, metric, workers)
    flag = M.DEGENERATE.get(metric)
    hits = [
        Hit(r.program_id, s, bool(flag and flag(target, r)))
        for r, s in zip(records, scores)
    ]
    hits.sort(key=lambda h: (-h.similarity, h.program_id))
    return hits


def query(
    repo: Repository,
    target: ProgramFeatures,
    metric: str = "pss",
    top_n: int = 10,
    workers: int = 1,
) -> RankedResult:
    """Preprocess ``target`` once, check it against every record, rank."""
    check_metric(metric, repo.k)
    if len(repo) == 0:
        raise EmptyRepository("repository has no records")
    if top_n < 1:
        raise InvalidParameter("top_n must be >= 1")
    target_record = preprocess(target, repo.k)
    start = time.perf_counter()
    hits = rank(target_record, list(repo), metric, workers)
    elapsed = time.perf_counter() - start
    return RankedResult(target.program_id, metric, tuple(hits[:top_n]), target_record.preprocess_wall_time, elapsed)


def decide(result: RankedResult, clone_map: dict) -> int:
    """Precision@1 of one search: 1 if the best hit is a clone of the target."""
    if not result.hits:
        raise InvalidParameter("empty result")
    clones = clone_map.get(result.target_id) or ()
    return int(result.hits[0].program_id in clones)
