"""Program feature files: data model, parsing, canonical serialization and
synthetic program generation.

A feature file is the JSON document a disassembler front-end would emit for
one program. Only facts needed by the similarity metrics are kept: the call
graph, one CFG edge count per local function, sizes, and optional literal
identifiers (mnemonics, constant strings, external names).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np

from .errors import DanglingReference, InvalidParameter, MalformedJson, SchemaViolation

SCHEMA_VERSION = 1

LOCAL = "local"
EXTERNAL = "external"

_TOP_KEYS = {
    "schema_version", "program_id", "file_size_bytes", "disasm_size_bytes",
    "call_graph", "functions", "mnemonics", "strings", "external_names",
}
_REQUIRED_TOP = _TOP_KEYS - {"mnemonics", "strings", "external_names"}


@dataclass(frozen=True)
class Node:
    id: int
    kind: str
    name: Optional[str] = None


@dataclass(frozen=True)
class CallGraphSpec:
    nodes: tuple[Node, ...]
    edges: tuple[tuple[int, int], ...]

    def local_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind == LOCAL]


@dataclass(frozen=True)
class FunctionSpec:
    node_id: int
    cfg_edge_count: int


@dataclass(frozen=True)
class ProgramFeatures:
    program_id: str
    file_size_bytes: int
    disasm_size_bytes: int
    call_graph: CallGraphSpec
    functions: tuple[FunctionSpec, ...]
    mnemonics: Optional[tuple[str, ...]] = None
    strings: Optional[frozenset[str]] = None
    external_names: Optional[frozenset[str]] = field(default=None)

    def resolved_external_names(self) -> frozenset[str]:
        """Explicit external names, or the names of external call-graph nodes."""
        if self.external_names is not None:
            return self.external_names
        return frozenset(
            n.name for n in self.call_graph.nodes if n.kind == EXTERNAL and n.name
        )


# ---------------------------------------------------------------------------
# parsing

def _is_int(x: Any) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _int_field(obj: dict, key: str, path: str, minimum: Optional[int] = 0) -> int:
    value = obj.get(key)
    if not _is_int(value):
        raise SchemaViolation(f"{path}.{key}", "expected an integer")
    if minimum is not None and value < minimum:
        raise SchemaViolation(f"{path}.{key}", f"must be >= {minimum}")
    return value


def _pair(x: Any, path: str) -> tuple[int, int]:
    if not (isinstance(x, list) and len(x) == 2 and all(_is_int(v) for v in x)):
        raise SchemaViolation(path, "expected a pair of integers")
    return (x[0], x[1])


def _str_list(x: Any, path: str) -> list[str]:
    if not isinstance(x, list) or not all(isinstance(s, str) for s in x):
        raise SchemaViolation(path, "expected a list of strings")
    return x


def _check_keys(obj: Any, allowed: set, required: set, path: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaViolation(path, "expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaViolation(path, f"unknown key(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise SchemaViolation(path, f"missing key(s) {sorted(missing)}")


def _parse_call_graph(obj: Any) -> CallGraphSpec:
    _check_keys(obj, {"nodes", "edges"}, {"nodes", "edges"}, "call_graph")
    if not isinstance(obj["nodes"], list):
        raise SchemaViolation("call_graph.nodes", "expected a list")
    if not isinstance(obj["edges"], list):
        raise SchemaViolation("call_graph.edges", "expected a list")

    nodes = []
    kinds: dict[int, str] = {}
    for i, raw in enumerate(obj["nodes"]):
        path = f"call_graph.nodes[{i}]"
        _check_keys(raw, {"id", "kind", "name"}, {"id", "kind"}, path)
        node_id = _int_field(raw, "id", path, minimum=None)
        kind = raw["kind"]
        if kind not in (LOCAL, EXTERNAL):
            raise SchemaViolation(f"{path}.kind", "must be 'local' or 'external'")
        name = raw.get("name")
        if name is not None and not isinstance(name, str):
            raise SchemaViolation(f"{path}.name", "expected a string")
        if node_id in kinds:
            raise SchemaViolation(f"{path}.id", f"duplicate node id {node_id}")
        kinds[node_id] = kind
        nodes.append(Node(node_id, kind, name))

    edges = []
    for i, raw in enumerate(obj["edges"]):
        path = f"call_graph.edges[{i}]"
        src, dst = _pair(raw, path)
        for end in (src, dst):
            if end not in kinds:
                raise DanglingReference(end, path)
        if kinds[src] == EXTERNAL:
            raise SchemaViolation(path, f"external node {src} cannot have outgoing calls")
        edges.append((src, dst))
    return CallGraphSpec(tuple(nodes), tuple(edges))


def _parse_functions(raw_list: Any, cg: CallGraphSpec) -> tuple[FunctionSpec, ...]:
    if not isinstance(raw_list, list):
        raise SchemaViolation("functions", "expected a list")
    kinds = {n.id: n.kind for n in cg.nodes}
    seen = set()
    out = []
    for i, raw in enumerate(raw_list):
        path = f"functions[{i}]"
        _check_keys(raw, {"node_id", "cfg_edge_count", "cfg_edges"}, {"node_id"}, path)
        has_count = "cfg_edge_count" in raw
        has_edges = "cfg_edges" in raw
        if has_count == has_edges:
            raise SchemaViolation(path, "exactly one of cfg_edge_count / cfg_edges is required")
        node_id = _int_field(raw, "node_id", path, minimum=None)
        if node_id not in kinds:
            raise DanglingReference(node_id, path)
        if kinds[node_id] != LOCAL:
            raise SchemaViolation(f"{path}.node_id", f"node {node_id} is external")
        if node_id in seen:
            raise SchemaViolation(f"{path}.node_id", f"duplicate function for node {node_id}")
        seen.add(node_id)
        if has_count:
            count = _int_field(raw, "cfg_edge_count", path)
        else:
            if not isinstance(raw["cfg_edges"], list):
                raise SchemaViolation(f"{path}.cfg_edges", "expected a list")
            pairs = {_pair(e, f"{path}.cfg_edges[{j}]") for j, e in enumerate(raw["cfg_edges"])}
            count = len(pairs)
        out.append(FunctionSpec(node_id, count))
    return tuple(out)


def parse_features(doc: Any) -> ProgramFeatures:
    """Validate an already-decoded JSON document."""
    _check_keys(doc, _TOP_KEYS, _REQUIRED_TOP, "$")
    if doc["schema_version"] != SCHEMA_VERSION or not _is_int(doc["schema_version"]):
        raise SchemaViolation("schema_version", f"unsupported version {doc['schema_version']!r}")
    program_id = doc["program_id"]
    if not isinstance(program_id, str) or not program_id:
        raise SchemaViolation("program_id", "expected a non-empty string")

    cg = _parse_call_graph(doc["call_graph"])
    functions = _parse_functions(doc["functions"], cg)

    mnemonics = strings = names = None
    if "mnemonics" in doc:
        mnemonics = tuple(_str_list(doc["mnemonics"], "mnemonics"))
    if "strings" in doc:
        strings = frozenset(_str_list(doc["strings"], "strings"))
    if "external_names" in doc:
        names = frozenset(_str_list(doc["external_names"], "external_names"))

    return ProgramFeatures(
        program_id=program_id,
        file_size_bytes=_int_field(doc, "file_size_bytes", "$"),
        disasm_size_bytes=_int_field(doc, "disasm_size_bytes", "$"),
        call_graph=cg,
        functions=functions,
        mnemonics=mnemonics,
        strings=strings,
        external_names=names,
    )


def parse_feature_file(data: bytes) -> ProgramFeatures:
    """Parse and validate the bytes of a program feature file (schema v1)."""
    try:
        doc = json.loads(data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedJson(str(exc)) from exc
    return parse_features(doc)


def load_feature_file(path: str | Path) -> ProgramFeatures:
    return parse_feature_file(Path(path).read_bytes())


def to_document(p: ProgramFeatures) -> dict:
    doc: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "program_id": p.program_id,
        "file_size_bytes": p.file_size_bytes,
        "disasm_size_bytes": p.disasm_size_bytes,
        "call_graph": {
            "nodes": [
                {"id": n.id, "kind": n.kind, **({"name": n.name} if n.name is not None else {})}
                for n in p.call_graph.nodes
            ],
            "edges": [list(e) for e in p.call_graph.edges],
        },
        "functions": [{"node_id": f.node_id, "cfg_edge_count": f.cfg_edge_count} for f in p.functions],
    }
    if p.mnemonics is not None:
        doc["mnemonics"] = list(p.mnemonics)
    if p.strings is not None:
        doc["strings"] = sorted(p.strings)
    if p.external_names is not None:
        doc["external_names"] = sorted(p.external_names)
    return doc


def serialize_features(p: ProgramFeatures) -> bytes:
    """Canonical encoding: sorted keys, compact separators, UTF-8."""
    return json.dumps(to_document(p), sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def write_feature_file(p: ProgramFeatures, path: str | Path) -> None:
    Path(path).write_bytes(serialize_features(p) + b"\n")


# ---------------------------------------------------------------------------
# synthetic programs

MNEMONICS = (
    "mov", "push", "pop", "lea", "add", "sub", "imul", "idiv", "and", "or",
    "xor", "not", "shl", "shr", "sar", "cmp", "test", "jmp", "je", "jne",
    "jg", "jge", "jl", "jle", "ja", "jb", "call", "ret", "nop", "movzx",
    "movsx", "cmove", "cmovne", "sete", "setne", "inc", "dec", "neg", "leave", "cdq",
)

_LIBC = (
    "printf", "fprintf", "sprintf", "snprintf", "puts", "fputs", "putchar",
    "malloc", "calloc", "realloc", "free", "memcpy", "mempcpy", "memmove",
    "memset", "memcmp", "strlen", "strcmp", "strncmp", "strcpy", "strncpy",
    "strchr", "strrchr", "strstr", "strdup", "strtol", "strtoul", "atoi",
    "fopen", "fclose", "fread", "fwrite", "fseek", "ftell", "fflush", "open",
    "close", "read", "write", "lseek", "stat", "fstat", "lstat", "mmap",
    "munmap", "exit", "abort", "getenv", "setlocale", "bindtextdomain",
    "textdomain", "getopt_long", "error", "qsort", "bsearch", "time",
    "localtime", "strftime", "isatty", "ioctl", "signal", "sigaction",
    "pthread_create", "pthread_join", "pthread_mutex_lock",
    "pthread_mutex_unlock", "dlopen", "dlsym", "socket", "connect", "bind",
    "listen", "accept", "send", "recv", "select", "poll", "fork", "execve",
    "waitpid", "pipe", "dup2", "getpid", "kill", "opendir", "readdir",
    "closedir", "mkdir", "rmdir", "unlink", "rename", "chmod", "chown",
    "umask", "realpath", "getcwd", "chdir", "__stack_chk_fail",
    "__libc_start_main", "__cxa_finalize", "__errno_location", "strerror",
)
EXTERNAL_VOCABULARY = _LIBC + tuple(f"api_{i:04d}" for i in range(4096))

_WORDS = (
    "usage", "error", "file", "cannot", "open", "read", "write", "invalid",
    "option", "missing", "argument", "directory", "permission", "denied",
    "memory", "exhausted", "version", "help", "output", "input", "line",
    "format", "number", "value", "too", "many", "few", "unknown", "warning",
    "failed", "to", "allocate", "close", "stream", "path", "name", "size",
    "buffer", "overflow", "config", "default", "mode", "debug", "verbose",
    "quiet", "table", "entry", "record", "header", "checksum", "key", "index",
)


def _synthetic_strings(rng: np.random.Generator, n: int) -> frozenset[str]:
    out = set()
    for _ in range(n):
        length = int(rng.integers(2, 6))
        words = rng.choice(len(_WORDS), size=length)
        out.add(" ".join(_WORDS[i] for i in words))
    return frozenset(out)


def generate_synthetic_program(
    seed: int,
    n_functions: int,
    avg_degree: float,
    program_id: Optional[str] = None,
) -> ProgramFeatures:
    """Build a random program whose call graph is a directed Erdős–Rényi graph.

    Local nodes are ``0..n_functions-1`` with node 0 acting as the entry point;
    external nodes follow. ``avg_degree`` is the expected number of calls made
    by a local function. The result depends only on the arguments.
    """
    if not _is_int(n_functions) or n_functions < 1:
        raise InvalidParameter(f"n_functions must be >= 1, got {n_functions!r}")
    if not (avg_degree > 0 and math.isfinite(avg_degree)):
        raise InvalidParameter(f"avg_degree must be > 0, got {avg_degree!r}")

    rng = np.random.default_rng(seed)
    n = n_functions
    n_ext = min(len(EXTERNAL_VOCABULARY), max(1, int(round(n * rng.uniform(0.1, 0.3)))))
    ext_names = [EXTERNAL_VOCABULARY[i] for i in np.sort(rng.choice(len(EXTERNAL_VOCABULARY), n_ext, replace=False))]
    total = n + n_ext

    nodes = [Node(i, LOCAL, "main" if i == 0 else f"sub_{0x401000 + 0x40 * i:X}") for i in range(n)]
    nodes += [Node(n + j, EXTERNAL, name) for j, name in enumerate(ext_names)]

    edges: set[tuple[int, int]] = set()
    if total > 1:
        p = min(1.0, avg_degree / (total - 1))
        m = int(rng.binomial(n * (total - 1), p))
        src = rng.integers(0, n, size=m)
        dst = rng.integers(0, total - 1, size=m)
        dst = dst + (dst >= src)  # skip self-loops while keeping dst uniform
        edges.update(zip(src.tolist(), dst.tolist()))
        fanout = rng.choice(np.arange(1, total), size=min(3, total - 1), replace=False)
        edges.update((0, int(d)) for d in fanout)

    counts = np.rint(rng.lognormal(mean=2.0, sigma=1.0, size=n)).astype(int)
    functions = tuple(FunctionSpec(i, int(c)) for i, c in enumerate(counts))

    weights = rng.dirichlet(np.full(len(MNEMONICS), 0.5))
    n_mnemonics = int(np.sum(3 + 2 * counts))
    mnemonics = tuple(MNEMONICS[i] for i in rng.choice(len(MNEMONICS), size=n_mnemonics, p=weights))
    strings = _synthetic_strings(rng, int(rng.integers(5, 40)))

    disasm = 24 * n_mnemonics + 48 * n + int(rng.integers(0, 4096))
    file_size = int(disasm * rng.uniform(0.25, 0.35)) + 4096 + sum(len(s) + 1 for s in strings)

    return ProgramFeatures(
        program_id=program_id or f"syn-{seed}",
        file_size_bytes=file_size,
        disasm_size_bytes=disasm,
        call_graph=CallGraphSpec(tuple(nodes), tuple(sorted(edges))),
        functions=functions,
        mnemonics=mnemonics,
        strings=strings,
        external_names=None,
    )


def _jitter(rng: np.random.Generator, value: int, amount: float) -> int:
    return max(0, int(round(value * rng.uniform(1 - amount, 1 + amount))))


def perturb_program(
    p: ProgramFeatures,
    seed: int,
    edge_edit_rate: float,
    cfg_jitter: float,
    clone_tag: Optional[str] = None,
) -> ProgramFeatures:
    """Simulate a recompilation of ``p``.

    Applies up to ``ceil(edge_edit_rate * |edges|)`` random call-edge
    insertions/deletions, scales every CFG edge count and both sizes by a
    factor drawn from ``[1 - cfg_jitter, 1 + cfg_jitter]``, and rewrites a
    ``cfg_jitter / 2`` fraction of mnemonics. With both rates at zero only the
    program id changes.
    """
    for name, rate in (("edge_edit_rate", edge_edit_rate), ("cfg_jitter", cfg_jitter)):
        if not (0.0 <= rate <= 1.0):
            raise InvalidParameter(f"{name} must lie in [0, 1], got {rate!r}")

    rng = np.random.default_rng(seed)
    cg = p.call_graph
    edges = list(cg.edges)
    present = set(edges)
    locals_ = cg.local_ids()
    all_ids = [n.id for n in cg.nodes]

    n_edits = math.ceil(edge_edit_rate * len(edges))
    for _ in range(n_edits):
        if edges and rng.random() < 0.5:
            victim = edges.pop(int(rng.integers(len(edges))))
            present.discard(victim)
        elif len(all_ids) > 1:
            u = locals_[int(rng.integers(len(locals_)))]
            v = all_ids[int(rng.integers(len(all_ids)))]
            if u != v and (u, v) not in present:
                edges.append((u, v))
                present.add((u, v))

    functions = tuple(replace(f, cfg_edge_count=_jitter(rng, f.cfg_edge_count, cfg_jitter)) for f in p.functions)
    file_size = _jitter(rng, p.file_size_bytes, cfg_jitter)
    disasm_size = _jitter(rng, p.disasm_size_bytes, cfg_jitter)

    mnemonics = p.mnemonics
    if mnemonics and cfg_jitter > 0:
        seq = list(mnemonics)
        n_sub = int(len(seq) * cfg_jitter / 2)
        for pos in rng.choice(len(seq), size=n_sub, replace=False):
            seq[pos] = MNEMONICS[int(rng.integers(len(MNEMONICS)))]
        mnemonics = tuple(seq)

    tag = clone_tag if clone_tag is not None else f"clone{seed}"
    return replace(
        p,
        program_id=f"{p.program_id}.{tag}",
        file_size_bytes=file_size,
        disasm_size_bytes=disasm_size,
        call_graph=CallGraphSpec(cg.nodes, tuple(edges)),
        functions=functions,
        mnemonics=mnemonics,
    )


def iter_feature_files(paths: Iterable[str | Path]) -> list[Path]:
    """Expand files and directories (``*.json``, sorted) into a file list."""
    out: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            out.extend(sorted(path.glob("*.json")))
        else:
            out.append(path)
    return out
