"""Command-line entry point: gen, explore, analyze, compare.

Exit codes: 2 configuration error, 3 I/O error, 4 exhaustive-search guard
refusal, 5 malformed dataset line.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .cost import MachineConfig
from .dataset import DatasetFormatError, atomic_write_lines, read_datapoints, run_exploration
from .ir import ConfigError, EmptyCorpusError, GeneratorConfig, generate_corpus, read_corpus, write_corpus
from .search import MODES, RuleSet, SearchConfig, SearchSpaceTooLarge, beam_search
from .stats import REPORTS, build_report, dump_json, emit_csv

log = logging.getLogger("schedlab")

EXIT_CONFIG, EXIT_IO, EXIT_GUARD, EXIT_FORMAT = 2, 3, 4, 5


class CommandError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _read_json(path, what: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot read {what} {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CommandError(EXIT_CONFIG, f"{what} {path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise CommandError(EXIT_CONFIG, f"{what} {path} must hold a JSON object")
    return obj


def _load(cls, path, what: str):
    if path is None:
        return cls()
    try:
        return cls.from_json(_read_json(path, what))
    except (ConfigError, TypeError) as exc:
        raise CommandError(EXIT_CONFIG, f"{what}: {exc}") from exc


def _load_corpus(path):
    try:
        return read_corpus(path)
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot read corpus {path}: {exc}") from exc
    except ValueError as exc:
        raise CommandError(EXIT_CONFIG, str(exc)) from exc


# -- compare ----------------------------------------------------------------

@dataclass
class CompareSummary:
    rows: list[dict] = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"programs": self.rows, "aggregate": self.aggregate}


def compare(programs, sc: SearchConfig, rules: RuleSet, mc: MachineConfig) -> CompareSummary:
    """Beam search each program with and without the rule set."""
    if sc.mode not in ("fixed_order_beam", "arbitrary_order_beam"):
        raise ConfigError("mode", "compare needs a beam search mode")
    rows = []
    for p in programs:
        base = beam_search(p, sc, RuleSet(), mc)
        ruled = beam_search(p, sc, rules, mc)
        rows.append(
            {
                "program_id": p.id,
                "best_rules": ruled.best_speedup,
                "best_baseline": base.best_speedup,
                "speedup_ratio": ruled.best_speedup / base.best_speedup,
                "evals_rules": ruled.evaluations,
                "evals_baseline": base.evaluations,
                "evals_ratio": base.evaluations / ruled.evaluations,
            }
        )
    ratios = [r["speedup_ratio"] for r in rows]
    agg = {
        "programs": len(rows),
        "geomean_speedup_ratio": math.exp(math.fsum(math.log(r) for r in ratios) / len(ratios)) if ratios else None,
        "mean_evals_ratio": math.fsum(r["evals_ratio"] for r in rows) / len(rows) if rows else None,
        "frac_ratio_ge_1": sum(r >= 1.0 for r in ratios) / len(ratios) if ratios else None,
        "frac_ratio_ge_0_95": sum(r >= 0.95 for r in ratios) / len(ratios) if ratios else None,
    }
    return CompareSummary(rows, agg)


# -- commands ---------------------------------------------------------------

def cmd_gen(args) -> int:
    cfg = _load(GeneratorConfig, args.config, "generator config")
    try:
        corpus = generate_corpus(args.seed, args.count, cfg)
    except (EmptyCorpusError, ConfigError) as exc:
        raise CommandError(EXIT_CONFIG, str(exc)) from exc
    try:
        write_corpus(corpus, args.out)
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot write {args.out}: {exc}") from exc
    print(f"generated {len(corpus)} programs")
    return 0


def cmd_explore(args) -> int:
    try:
        sc = SearchConfig(mode=args.mode, beam_k=args.beam, max_len=args.max_len, walk_seed=args.seed)
    except ConfigError as exc:
        raise CommandError(EXIT_CONFIG, str(exc)) from exc
    rules = _load(RuleSet, args.rules, "rule set")
    mc = _load(MachineConfig, args.machine, "machine config")
    corpus = _load_corpus(args.programs)
    if not corpus:
        raise CommandError(EXIT_CONFIG, "corpus is empty")
    try:
        summary = run_exploration(corpus, sc, rules, mc, args.out)
    except SearchSpaceTooLarge as exc:
        raise CommandError(EXIT_GUARD, str(exc)) from exc
    except ConfigError as exc:
        raise CommandError(EXIT_CONFIG, str(exc)) from exc
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot write {args.out}: {exc}") from exc
    print(json.dumps(summary.to_json(), separators=(",", ":")))
    return 0


def cmd_analyze(args) -> int:
    try:
        points = read_datapoints(args.dataset)
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot read dataset {args.dataset}: {exc}") from exc
    except DatasetFormatError as exc:
        raise CommandError(EXIT_FORMAT, str(exc)) from exc
    report = build_report(points, args.report)
    try:
        if args.out_json:
            dump_json(report, args.out_json)
        if args.csv_dir:
            emit_csv(report, args.csv_dir)
    except OSError as exc:
        raise CommandError(EXIT_IO, str(exc)) from exc
    if not args.out_json and not args.csv_dir:
        print(json.dumps(report.to_json(), indent=2))
    return 0


def cmd_compare(args) -> int:
    sc = _load(SearchConfig, args.baseline_config, "search config")
    rules = _load(RuleSet, args.rules_config, "rule set")
    mc = _load(MachineConfig, args.machine, "machine config")
    corpus = _load_corpus(args.programs)
    try:
        summary = compare(corpus, sc, rules, mc)
    except ConfigError as exc:
        raise CommandError(EXIT_CONFIG, str(exc)) from exc
    text = json.dumps(summary.to_json(), indent=2)
    if args.out:
        try:
            atomic_write_lines(args.out, [text])
        except OSError as exc:
            raise CommandError(EXIT_IO, str(exc)) from exc
    agg = summary.aggregate
    print(
        f"programs={agg['programs']} geomean_speedup_ratio={agg['geomean_speedup_ratio']:.4f} "
        f"mean_evals_ratio={agg['mean_evals_ratio']:.4f}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="schedlab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random program corpus")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--config", help="generator config JSON")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("explore", help="explore schedules and write a dataset")
    e.add_argument("--programs", required=True, help="corpus JSON Lines file")
    e.add_argument("--mode", choices=MODES, default="fixed_order_beam")
    e.add_argument("--beam", type=int, default=4)
    e.add_argument("--max-len", type=int, default=6)
    e.add_argument("--rules", help="rule set JSON; omitted means no pruning")
    e.add_argument("--machine", help="machine config JSON")
    e.add_argument("--seed", type=int, default=0, help="random-walk seed")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_explore)

    a = sub.add_parser("analyze", help="compute statistics over a dataset")
    a.add_argument("--dataset", required=True)
    a.add_argument("--report", choices=REPORTS, default="all")
    a.add_argument("--out-json")
    a.add_argument("--csv-dir")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("compare", help="beam search with vs without the rule set")
    c.add_argument("--programs", required=True)
    c.add_argument("--baseline-config", help="search config JSON")
    c.add_argument("--rules-config", help="rule set JSON")
    c.add_argument("--machine", help="machine config JSON")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
