"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 eigensolver failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import metrics as M
from .errors import CloneSearchError, ConvergenceFailure, ModeMismatch
from .evaluation import RANDOM, k_sweep, load_test_field, run_test_field, synthetic_test_field
from .features import iter_feature_files, load_feature_file, write_feature_file
from .repository import Repository, preprocess_many, query
from .spectral import DEFAULT_K

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CONVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spectralclone", description="Program clone search by call-graph spectra.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic dataset, its clones and a test-field config")
    g.add_argument("--programs", type=_positive, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--min-functions", type=_positive, default=50)
    g.add_argument("--max-functions", type=_positive, default=300)
    g.add_argument("--avg-degree", type=float, default=3.0)
    g.add_argument("--edge-edit-rate", type=float, default=0.05)
    g.add_argument("--cfg-jitter", type=float, default=0.10)

    p = sub.add_parser("preprocess", help="build or extend a repository from feature files")
    p.add_argument("--input", nargs="+", required=True, help="feature files or directories of *.json")
    p.add_argument("--repo", required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--k", type=_positive, help="keep only the K largest eigenvalues (for psso)")
    mode.add_argument("--full", action="store_true", help="full spectrum (default)")
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--format", choices=("json", "table"), default="table")

    q = sub.add_parser("query", help="rank a repository against one target")
    q.add_argument("--repo", required=True)
    q.add_argument("--target", required=True)
    q.add_argument("--metric", choices=M.METRIC_IDS, default="pss")
    q.add_argument("--top", type=_positive, default=10)
    q.add_argument("--workers", type=_positive, default=1)
    q.add_argument("--format", choices=("json", "table"), default="table")

    e = sub.add_parser("eval", help="precision@1 and timings on a test field")
    e.add_argument("--config", required=True)
    e.add_argument("--metrics", nargs="+", choices=M.METRIC_IDS + (RANDOM,), default=["pss"])
    e.add_argument("--k", type=_positive, default=DEFAULT_K, help="K used by psso on raw repositories")
    e.add_argument("--seed", type=int, default=0, help="seed of the random control ranking")
    e.add_argument("--format", choices=("json", "table"), default="table")

    s = sub.add_parser("ksweep", help="PSS_O precision and preprocessing time as K varies")
    s.add_argument("--config", required=True)
    s.add_argument("--k-values", nargs="+", type=_positive, required=True)
    s.add_argument("--format", choices=("json", "table"), default="table")
    return parser


def _emit(fmt: str, payload: dict, table: str) -> None:
    if fmt == "json":
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print(table)


def cmd_gen(args) -> int:
    tf = synthetic_test_field(
        args.programs, args.seed,
        edge_edit_rate=args.edge_edit_rate, cfg_jitter=args.cfg_jitter,
        min_functions=args.min_functions, max_functions=args.max_functions,
        avg_degree=args.avg_degree, name=f"synthetic-{args.seed}",
    )
    out = Path(args.out)
    (out / "repository").mkdir(parents=True, exist_ok=True)
    (out / "targets").mkdir(parents=True, exist_ok=True)
    for p in tf.repository:
        write_feature_file(p, out / "repository" / f"{p.program_id}.json")
    target_paths = []
    for p in tf.targets:
        write_feature_file(p, out / "targets" / f"{p.program_id}.json")
        target_paths.append(f"targets/{p.program_id}.json")
    clone_map = {t: sorted(c) for t, c in sorted(tf.clone_map.items())}
    (out / "clone_map.json").write_text(json.dumps(clone_map, sort_keys=True, indent=2) + "\n")
    config = {"name": tf.name, "targets": target_paths, "repository": "repository", "clone_map": clone_map}
    (out / "testfield.json").write_text(json.dumps(config, sort_keys=True, indent=2) + "\n")
    print(f"wrote {len(tf.repository)} programs and {len(tf.targets)} clones to {out}", file=sys.stderr)
    return 0


def cmd_preprocess(args) -> int:
    k: Optional[int] = args.k
    if Repository.is_repository(args.repo):
        repo = Repository.open(args.repo)
        if repo.k != k:
            raise ModeMismatch(f"repository at {args.repo} uses a different spectrum mode")
    else:
        repo = Repository.create(args.repo, k)
    programs = [load_feature_file(f) for f in iter_feature_files(args.input)]
    records = preprocess_many(programs, k, args.workers)
    repo.add_many(records)
    total = sum(r.preprocess_wall_time for r in records)
    payload = {"repository": str(args.repo), "added": len(records), "count": len(repo),
               "k_mode": "full" if k is None else {"top_k": k}, "preprocess_wall_time": total}
    _emit(args.format, payload, f"added {len(records)} programs ({len(repo)} total) in {total:.3f}s")
    return 0


def cmd_query(args) -> int:
    repo = Repository.open(args.repo)
    target = load_feature_file(args.target)
    result = query(repo, target, args.metric, args.top, args.workers)
    table = "\n".join(
        f"{i + 1:>4}  {h.similarity:>14.6f}  {h.program_id}{'  *' if h.degenerate else ''}"
        for i, h in enumerate(result.hits)
    )
    _emit(args.format, result.to_dict(), table)
    return 0


def cmd_eval(args) -> int:
    tf = load_test_field(args.config)
    report = run_test_field(tf, args.metrics, k=args.k, seed=args.seed)
    _emit(args.format, report.to_dict(), report.format_table())
    return 0


def cmd_ksweep(args) -> int:
    tf = load_test_field(args.config)
    if isinstance(tf.repository, Repository):
        raise CloneSearchError("ksweep needs raw feature files, not a built repository")
    curve = k_sweep(list(tf.targets) + list(tf.repository), tf.clone_map, args.k_values)
    payload = {"test_field": tf.name, "k_sweep": [p.__dict__ for p in curve]}
    table = "\n".join([f"{'K':>6} {'precision':>9} {'preprocess(s)':>14}"] +
                      [f"{p.k:>6} {p.precision:>9.3f} {p.mean_preprocess_s:>14.4f}" for p in curve])
    _emit(args.format, payload, table)
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "preprocess": cmd_preprocess,
    "query": cmd_query,
    "eval": cmd_eval,
    "ksweep": cmd_ksweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConvergenceFailure as exc:
        print(f"error: eigensolver did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (CloneSearchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
