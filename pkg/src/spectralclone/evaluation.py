"""Test fields, precision@1 scoring, rank-biserial correlation and K sweeps."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from . import metrics as M
from .errors import DegenerateGroups, InvalidParameter, MissingProgram, UnknownMetric
from .features import ProgramFeatures, generate_synthetic_program, iter_feature_files, load_feature_file, perturb_program
from .repository import Repository, RepositoryRecord, check_metric, preprocess, score_all
from .spectral import DEFAULT_K

RANDOM = "random"


@dataclass
class TestField:
    """Targets, a repository and the clone ground truth.

    ``repository`` is either raw programs (preprocessed on demand, in any
    mode) or an already-built :class:`Repository`. ``shared`` optionally maps
    a target id to the candidate ids sharing some side attribute with it
    (e.g. an optimization level), for the rank-biserial analysis.
    """

    __test__ = False  # not a pytest class

    name: str
    targets: list[ProgramFeatures]
    repository: list[ProgramFeatures] | Repository
    clone_map: dict[str, set[str]]
    shared: dict[str, set[str]] = field(default_factory=dict)

    def repository_ids(self) -> list[str]:
        if isinstance(self.repository, Repository):
            return [r.program_id for r in self.repository]
        return [p.program_id for p in self.repository]

    def validate(self) -> None:
        ids = set(self.repository_ids())
        for t in self.targets:
            if t.program_id in ids:
                raise InvalidParameter(f"target {t.program_id} is literally present in the repository")
            clones = self.clone_map.get(t.program_id, set())
            if not clones & ids:
                raise MissingProgram(f"no clone of target {t.program_id} in the repository")


@dataclass
class MetricRow:
    metric: str
    precision: float
    n_targets: int
    repo_preprocess_s: float
    target_preprocess_s: float
    check_s: float
    rank_biserial: Optional[float] = None

    @property
    def per_search_s(self) -> float:
        """Query preprocessing plus similarity checks, per target."""
        return (self.target_preprocess_s + self.check_s) / max(1, self.n_targets)

    @property
    def total_s(self) -> float:
        return self.repo_preprocess_s + self.target_preprocess_s + self.check_s


@dataclass
class KSweepPoint:
    k: int
    precision: float
    mean_preprocess_s: float


@dataclass
class EvalReport:
    test_field: str
    n_targets: int
    repository_size: int
    rows: dict[str, MetricRow]
    k_sweep: list[KSweepPoint] = field(default_factory=list)

    def precision(self, metric: str) -> float:
        return self.rows[metric].precision

    def to_dict(self) -> dict:
        return {
            "test_field": self.test_field,
            "n_targets": self.n_targets,
            "repository_size": self.repository_size,
            "metrics": {
                m: {
                    "precision": r.precision,
                    "repo_preprocess_s": r.repo_preprocess_s,
                    "target_preprocess_s": r.target_preprocess_s,
                    "check_s": r.check_s,
                    "per_search_s": r.per_search_s,
                    "total_s": r.total_s,
                    "rank_biserial": r.rank_biserial,
                }
                for m, r in self.rows.items()
            },
            "k_sweep": [{"k": p.k, "precision": p.precision, "mean_preprocess_s": p.mean_preprocess_s} for p in self.k_sweep],
        }

    def format_table(self) -> str:
        lines = [f"test field {self.test_field}: {self.n_targets} targets, {self.repository_size} programs"]
        if self.rows:
            has_rb = any(r.rank_biserial is not None for r in self.rows.values())
            header = f"{'metric':<12} {'precision':>9} {'total(s)':>10} {'checks(s)':>10} {'per-search(s)':>14}"
            if has_rb:
                header += f" {'rank-biserial':>13}"
            lines += [header, "-" * len(header)]
            for r in self.rows.values():
                line = f"{r.metric:<12} {r.precision:>9.3f} {r.total_s:>10.3f} {r.check_s:>10.4f} {r.per_search_s:>14.4f}"
                if has_rb:
                    line += f" {r.rank_biserial:>13.3f}" if r.rank_biserial is not None else f" {'-':>13}"
                lines.append(line)
        if self.k_sweep:
            lines += ["", f"{'K':>6} {'precision':>9} {'preprocess(s)':>14}"]
            lines += [f"{p.k:>6} {p.precision:>9.3f} {p.mean_preprocess_s:>14.4f}" for p in self.k_sweep]
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# loading

def load_test_field(config_path: str | Path) -> TestField:
    """Read a test-field config; relative paths resolve against its directory.

    ``repository`` may point at a built repository or at a directory (or list)
    of feature files.
    """
    config_path = Path(config_path)
    try:
        doc = json.loads(config_path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise MissingProgram(f"test-field config not found: {config_path}") from exc
    base = config_path.parent

    def resolve(p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else base / path

    def load(path: Path) -> ProgramFeatures:
        if not path.exists():
            raise MissingProgram(f"missing feature file {path}")
        return load_feature_file(path)

    targets = [load(p) for p in iter_feature_files(resolve(t) for t in doc["targets"])]
    repo_spec = doc["repository"]
    repo_paths = [repo_spec] if isinstance(repo_spec, str) else list(repo_spec)
    if len(repo_paths) == 1 and Repository.is_repository(resolve(repo_paths[0])):
        repository: list[ProgramFeatures] | Repository = Repository.open(resolve(repo_paths[0]))
    else:
        for p in repo_paths:
            if not resolve(p).exists():
                raise MissingProgram(f"missing repository path {resolve(p)}")
        repository = [load(p) for p in iter_feature_files(resolve(p) for p in repo_paths)]
    tf = TestField(
        name=doc.get("name", config_path.stem),
        targets=targets,
        repository=repository,
        clone_map={k: set(v) for k, v in doc["clone_map"].items()},
        shared={k: set(v) for k, v in doc.get("shared", {}).items()},
    )
    tf.validate()
    return tf


def synthetic_test_field(
    n_programs: int,
    seed: int,
    edge_edit_rate: float = 0.05,
    cfg_jitter: float = 0.10,
    min_functions: int = 50,
    max_functions: int = 300,
    avg_degree: float = 3.0,
    name: Optional[str] = None,
) -> TestField:
    """Unrelated random base programs as the repository, one clone of each as targets."""
    rng = np.random.default_rng(seed)
    sizes = rng.integers(min_functions, max_functions + 1, size=n_programs)
    seeds = rng.integers(0, 2**31 - 1, size=(n_programs, 2))
    bases, targets, clone_map = [], [], {}
    for i in range(n_programs):
        base = generate_synthetic_program(int(seeds[i, 0]), int(sizes[i]), avg_degree, program_id=f"prog{i:04d}")
        clone = perturb_program(base, int(seeds[i, 1]), edge_edit_rate, cfg_jitter, clone_tag="clone")
        bases.append(base)
        targets.append(clone)
        clone_map[clone.program_id] = {base.program_id}
    return TestField(name or f"synthetic-{seed}", targets, bases, clone_map)


# ---------------------------------------------------------------------------
# scoring

def precision_at_1(order: Sequence[str], clones: Iterable[str]) -> int:
    return int(bool(order) and order[0] in set(clones))


def _best(ids: list[str], scores) -> str:
    return min(zip(ids, scores), key=lambda t: (-t[1], t[0]))[0]


def _ranks(scores) -> np.ndarray:
    # rank 1 is the most similar; tied scores share their midrank
    return rankdata(-np.asarray(scores, dtype=float), method="average")


def rank_biserial(group_flags: Sequence[bool], ranks: Sequence[float]) -> float:
    """``1 - 2U / (n1 n2)`` with ``U`` the Mann-Whitney statistic of the flagged group.

    Lower ranks are better, so a flagged group holding all the best ranks
    gives 1 and the reverse gives -1. Ties use midranks.
    """
    flags = np.asarray(group_flags, dtype=bool)
    values = np.asarray(ranks, dtype=float)
    if flags.shape != values.shape or flags.size < 2:
        raise InvalidParameter("need two equal-length sequences of length >= 2")
    n1 = int(flags.sum())
    n2 = flags.size - n1
    if n1 == 0 or n2 == 0:
        raise DegenerateGroups("both groups must be non-empty")
    midranks = rankdata(values, method="average")
    u = midranks[flags].sum() - n1 * (n1 + 1) / 2
    pairs = n1 * n2
    # the numerator is an exact integer, so the result is one rounding away
    return float((pairs - 2 * u) / pairs)


def _records(programs: list[ProgramFeatures], k: Optional[int]) -> tuple[list[RepositoryRecord], float]:
    start = time.perf_counter()
    recs = [preprocess(p, k) for p in programs]
    return recs, time.perf_counter() - start


def run_test_field(
    tf: TestField,
    metrics: Sequence[str],
    *,
    k: int = DEFAULT_K,
    seed: int = 0,
    extra_metrics: Optional[dict[str, Callable]] = None,
) -> EvalReport:
    """Score every requested metric on one test field.

    ``"random"`` ranks the repository uniformly at random (seeded) as a
    control. ``extra_metrics`` maps names to ``f(target_id, repo_ids) ->
    scores`` for harness-only rankers. Reported times are single-worker wall
    times, with preprocessing kept apart from similarity checks.
    """
    extra_metrics = extra_metrics or {}
    for m in metrics:
        if m not in M.METRICS and m != RANDOM and m not in extra_metrics:
            raise UnknownMetric(f"unknown metric {m!r}")
    tf.validate()
    rng = np.random.default_rng(seed)
    repo_ids = tf.repository_ids()

    # one preprocessing pass per spectrum mode
    cache: dict[Optional[int], tuple] = {}

    def records_for(mode: Optional[int]):
        if mode not in cache:
            if isinstance(tf.repository, Repository):
                repo_recs, repo_time = list(tf.repository), 0.0
            else:
                repo_recs, repo_time = _records(tf.repository, mode)
            target_recs, target_time = _records(tf.targets, mode)
            cache[mode] = (repo_recs, repo_time, target_recs, target_time)
        return cache[mode]

    def mode_of(metric: str) -> Optional[int]:
        if isinstance(tf.repository, Repository):
            check_metric(metric, tf.repository.k)
            return tf.repository.k
        return k if metric in M.REQUIRES_TOP_K else None

    rows: dict[str, MetricRow] = {}
    for metric in metrics:
        hits = 0
        rb_values = []
        repo_time = target_time = 0.0
        check_time = 0.0
        for i, target in enumerate(tf.targets):
            t0 = time.perf_counter()
            if metric == RANDOM:
                scores = rng.random(len(repo_ids))
            elif metric in extra_metrics:
                scores = extra_metrics[metric](target.program_id, repo_ids)
            else:
                repo_recs, repo_time, target_recs, target_time = records_for(mode_of(metric))
                t0 = time.perf_counter()
                scores = score_all(target_recs[i], repo_recs, metric)
            check_time += time.perf_counter() - t0
            best = _best(repo_ids, scores)
            hits += int(best in tf.clone_map.get(target.program_id, ()))
            shared = tf.shared.get(target.program_id)
            if shared is not None:
                flags = [rid in shared for rid in repo_ids]
                if any(flags) and not all(flags):
                    rb_values.append(rank_biserial(flags, _ranks(scores)))
        rows[metric] = MetricRow(
            metric=metric,
            precision=hits / len(tf.targets) if tf.targets else 0.0,
            n_targets=len(tf.targets),
            repo_preprocess_s=repo_time,
            target_preprocess_s=target_time,
            check_s=check_time,
            rank_biserial=float(np.mean(rb_values)) if rb_values else None,
        )
    return EvalReport(tf.name, len(tf.targets), len(repo_ids), rows)


def k_sweep(
    dataset: Sequence[ProgramFeatures],
    clone_map: dict[str, set[str]],
    k_values: Sequence[int],
) -> list[KSweepPoint]:
    """PSS_O precision and mean preprocessing time for each K.

    Programs whose id is a key of ``clone_map`` are the targets; all other
    programs form the repository.
    """
    if not k_values:
        raise InvalidParameter("k_values must not be empty")
    if any(kv < 1 for kv in k_values):
        raise InvalidParameter("every K must be >= 1")
    targets = [p for p in dataset if p.program_id in clone_map]
    repository = [p for p in dataset if p.program_id not in clone_map]
    tf = TestField("k-sweep", targets, repository, clone_map)
    tf.validate()
    curve = []
    for kv in k_values:
        report = run_test_field(tf, ["psso"], k=int(kv))
        row = report.rows["psso"]
        mean_pre = (row.repo_preprocess_s + row.target_preprocess_s) / len(dataset)
        curve.append(KSweepPoint(int(kv), row.precision, mean_pre))
    return curve
