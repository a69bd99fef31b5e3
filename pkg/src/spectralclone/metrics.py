"""Similarity metrics between preprocessed programs.

Every metric returns a similarity index where larger means more similar.
``METRICS`` maps the stable metric identifiers used by the CLI and the
evaluation harness to functions over two repository records (anything with
``signature`` and ``baseline`` attributes).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .spectral import Spectrum

SQRT2 = math.sqrt(2.0)
NGRAM = 4
NGRAM_DIM = 4096

_FNV_OFFSET = 0x811C9DC5
_FNV_PRIME = 0x01000193
_SEPARATOR = b"\x00"


@dataclass(frozen=True, eq=False)
class SpectralSignature:
    """Normalized call-graph spectrum ``v`` and CFG edge counts ``w``."""

    v: np.ndarray
    w: np.ndarray
    k: Optional[int] = None  # None: full spectrum, else top-K

    @property
    def k_mode(self) -> str:
        return "full" if self.k is None else f"top_k({self.k})"


@dataclass(frozen=True, eq=False)
class BaselineFeatures:
    file_size_bytes: int
    disasm_size_bytes: int
    cg_n_vertices: int
    cg_n_edges: int
    ngram_vector: np.ndarray
    string_set: frozenset
    external_name_set: frozenset


def _truncated_distance(a, b) -> float:
    m = min(len(a), len(b))
    if m == 0:
        return 0.0
    diff = np.asarray(a[:m], dtype=float) - np.asarray(b[:m], dtype=float)
    return math.sqrt(float(diff @ diff))


def sim_cg(v0, v1) -> float:
    """sqrt(2) minus the Euclidean distance over the common prefix of ``v0``, ``v1``."""
    return max(0.0, SQRT2 - _truncated_distance(v0, v1))


def sim_cfg(w0, w1) -> float:
    return max(0.0, SQRT2 - _truncated_distance(w0, w1))


def pss(s0: SpectralSignature, s1: SpectralSignature) -> float:
    """Mean of the call-graph and CFG similarities, scaled to [0, 1]."""
    return (sim_cg(s0.v, s1.v) + sim_cfg(s0.w, s1.w)) / (2 * SQRT2)


def spectral_distance(a, b) -> float:
    a = a.eigenvalues if isinstance(a, Spectrum) else a
    b = b.eigenvalues if isinstance(b, Spectrum) else b
    return _truncated_distance(a, b)


def _leading_normalized(x) -> np.ndarray:
    x = np.asarray(x.eigenvalues if isinstance(x, Spectrum) else x, dtype=float)
    if len(x) == 0 or x[0] == 0:
        return np.zeros_like(x)
    return x / x[0]


def ascg(x, y) -> float:
    """Negative L1 distance between spectra scaled by their leading eigenvalue.

    Scaling is invariant to any positive factor, so a normalized spectrum
    ``v`` gives the same result as the raw eigenvalues.
    """
    xs, ys = _leading_normalized(x), _leading_normalized(y)
    m = min(len(xs), len(ys))
    return -float(np.abs(xs[:m] - ys[:m]).sum())


def b_size(a: BaselineFeatures, b: BaselineFeatures) -> float:
    return -float(abs(a.file_size_bytes - b.file_size_bytes))


def d_size(a: BaselineFeatures, b: BaselineFeatures) -> float:
    return -float(abs(a.disasm_size_bytes - b.disasm_size_bytes))


def _ratio(x: int, y: int) -> float:
    hi = max(x, y)
    return 1.0 if hi == 0 else min(x, y) / hi


def shape(a: BaselineFeatures, b: BaselineFeatures) -> float:
    return _ratio(a.cg_n_vertices, b.cg_n_vertices) * _ratio(a.cg_n_edges, b.cg_n_edges)


def fnv1a_32(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFF
    return h


def ngram_bucket(gram: Sequence[str]) -> int:
    return fnv1a_32(_SEPARATOR.join(m.encode("utf-8") for m in gram)) % NGRAM_DIM


def mutantxs_embed(mnemonics: Sequence[str]) -> np.ndarray:
    """Hash 4-gram frequencies of an opcode sequence into 4096 buckets."""
    vec = np.zeros(NGRAM_DIM)
    total = len(mnemonics) - NGRAM + 1
    if total <= 0:
        return vec
    counts: dict[tuple, int] = {}
    for i in range(total):
        gram = tuple(mnemonics[i:i + NGRAM])
        counts[gram] = counts.get(gram, 0) + 1
    for gram, c in counts.items():
        vec[ngram_bucket(gram)] += c / total
    return vec


def mutantxs_sim(x, y) -> float:
    return -float(np.linalg.norm(np.asarray(x) - np.asarray(y)))


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    union = len(a | b)
    if union == 0:
        return 1.0
    return len(a & b) / union


def string_set_sim(a, b) -> float:
    return jaccard(a, b)


def function_set_sim(a, b) -> float:
    return jaccard(a, b)


# ---------------------------------------------------------------------------
# registry over records

MetricFn = Callable[[object, object], float]

METRICS: dict[str, MetricFn] = {
    "pss": lambda a, b: pss(a.signature, b.signature),
    "psso": lambda a, b: pss(a.signature, b.signature),
    "simcg": lambda a, b: sim_cg(a.signature.v, b.signature.v),
    "simcfg": lambda a, b: sim_cfg(a.signature.w, b.signature.w),
    "bsize": lambda a, b: b_size(a.baseline, b.baseline),
    "dsize": lambda a, b: d_size(a.baseline, b.baseline),
    "shape": lambda a, b: shape(a.baseline, b.baseline),
    "ascg": lambda a, b: ascg(a.signature.v, b.signature.v),
    "mutantxs": lambda a, b: mutantxs_sim(a.baseline.ngram_vector, b.baseline.ngram_vector),
    "stringset": lambda a, b: string_set_sim(a.baseline.string_set, b.baseline.string_set),
    "functionset": lambda a, b: function_set_sim(a.baseline.external_name_set, b.baseline.external_name_set),
}
METRIC_IDS = tuple(METRICS)

# metrics whose signatures must come from a specific spectrum mode
REQUIRES_FULL = {"pss"}
REQUIRES_TOP_K = {"psso"}

# (a, b) -> True when the score rests on the both-empty Jaccard convention
DEGENERATE: dict[str, Callable[[object, object], bool]] = {
    "stringset": lambda a, b: not a.baseline.string_set and not b.baseline.string_set,
    "functionset": lambda a, b: not a.baseline.external_name_set and not b.baseline.external_name_set,
}
