"""Dataset analyses: parallel depth, skewing, unrolling, schedule length and
transformation transitions, with CSV/JSON emitters for the figure tables.

Every analysis is a fold over datapoints; means use ``math.fsum`` so input
order never changes a reported value.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .dataset import DataPoint, atomic_write_lines
from .ir import depths_from_id
from .search import serialize_steps
from .transforms import KINDS

N_BINS = 10


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def _best(points: Iterable[DataPoint]) -> DataPoint:
    return min(points, key=lambda p: (-p.speedup, len(p.schedule), serialize_steps(p.schedule)))


def _by_program(points: Iterable[DataPoint]) -> dict[str, list[DataPoint]]:
    groups: dict[str, list[DataPoint]] = defaultdict(list)
    for p in points:
        groups[p.program_id].append(p)
    return groups


# -- parallel depth ---------------------------------------------------------

@dataclass(frozen=True)
class DepthBin:
    bin: float  # bin centre
    mean: float
    n: int


def parallel_relative_level(point: DataPoint, depths: Sequence[int]) -> Fraction | None:
    """Relative level of the parallelized loop in the transformed nest."""
    par = next((t for t in point.schedule if t.kind == "parallelization"), None)
    if par is None:
        return None
    depth = depths[par.nest]
    for t in point.schedule:
        if t.kind == "tiling" and t.nest == par.nest:
            depth += len(t.params["band"])
    if depth == 1:
        return Fraction(0)
    return Fraction(par.params["loop"], depth - 1)


def _bin_index(level: Fraction) -> int:
    return min(int(level * N_BINS), N_BINS - 1)


def analyze_parallel_depth(
    points: Iterable[DataPoint], depths: Mapping[str, Sequence[int]] | None = None
) -> list[DepthBin]:
    """Mean of each program's best parallel speedup, binned by relative level.

    Nest depths come from ``depths`` or, failing that, from the program id.
    Programs whose depths cannot be resolved are skipped.
    """
    bins: dict[int, list[float]] = defaultdict(list)
    for pid, pts in sorted(_by_program(points).items()):
        par_pts = [p for p in pts if any(t.kind == "parallelization" for t in p.schedule)]
        if not par_pts:
            continue
        nest_depths = (depths or {}).get(pid) or depths_from_id(pid)
        if nest_depths is None:
            continue
        best = _best(par_pts)
        bins[_bin_index(parallel_relative_level(best, nest_depths))].append(best.speedup)
    return [DepthBin((b + 0.5) / N_BINS, _mean(v), len(v)) for b, v in sorted(bins.items())]


# -- skewing ----------------------------------------------------------------

@dataclass(frozen=True)
class SkewReport:
    mean_skew_with_parallel: float | None = None
    mean_skew_without_parallel: float | None = None
    ratio: float | None = None
    mean_parallel_with_prior_skew: float | None = None
    mean_parallel_without_prior_skew: float | None = None
    n_skew_with_parallel: int = 0
    n_skew_without_parallel: int = 0
    n_parallel_with_prior_skew: int = 0
    n_parallel_without_prior_skew: int = 0

    def to_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def _skew_then_parallel(kinds: Sequence[str]) -> bool:
    if "skewing" not in kinds:
        return False
    first = kinds.index("skewing")
    return "parallelization" in kinds[first + 1:]


def analyze_skewing(points: Iterable[DataPoint]) -> SkewReport:
    with_par, without_par, par_skew, par_plain = [], [], [], []
    for p in points:
        kinds = p.kinds
        if "skewing" in kinds:
            (with_par if _skew_then_parallel(kinds) else without_par).append(p.speedup)
        if "parallelization" in kinds:
            before = kinds[: kinds.index("parallelization")]
            (par_skew if "skewing" in before else par_plain).append(p.speedup)
    m_with = _mean(with_par) if with_par else None
    m_without = _mean(without_par) if without_par else None
    return SkewReport(
        mean_skew_with_parallel=m_with,
        mean_skew_without_parallel=m_without,
        ratio=m_with / m_without if m_with is not None and m_without is not None else None,
        mean_parallel_with_prior_skew=_mean(par_skew) if par_skew else None,
        mean_parallel_without_prior_skew=_mean(par_plain) if par_plain else None,
        n_skew_with_parallel=len(with_par),
        n_skew_without_parallel=len(without_par),
        n_parallel_with_prior_skew=len(par_skew),
        n_parallel_without_prior_skew=len(par_plain),
    )


# -- unrolling --------------------------------------------------------------

def analyze_unrolling(points: Iterable[DataPoint]) -> dict[int, tuple[float, int]]:
    groups: dict[int, list[float]] = defaultdict(list)
    for p in points:
        factors = [t.params["factor"] for t in p.schedule if t.kind == "unrolling"]
        for f in sorted(set(factors)):
            groups[f].append(p.speedup)
    return {f: (_mean(v), len(v)) for f, v in sorted(groups.items())}


def best_unroll_factor(table: Mapping[int, tuple[float, int]]) -> int | None:
    if not table:
        return None
    return max(table, key=lambda f: (table[f][0], -f))


# -- schedule length --------------------------------------------------------

@dataclass(frozen=True)
class LengthReport:
    histogram: dict[int, int]
    per_length: dict[int, tuple[float, float]]  # length -> (mean, max)

    def to_json(self) -> dict:
        return {
            "histogram": {str(k): v for k, v in self.histogram.items()},
            "per_length": {str(k): {"mean": m, "max": x} for k, (m, x) in self.per_length.items()},
        }


def analyze_schedule_length(points: Iterable[DataPoint]) -> LengthReport:
    points = list(points)
    hist: dict[int, int] = defaultdict(int)
    for pts in _by_program(points).values():
        hist[len(_best(pts).schedule)] += 1
    by_len: dict[int, list[float]] = defaultdict(list)
    for p in points:
        by_len[len(p.schedule)].append(p.speedup)
    per = {k: (_mean(v), max(v)) for k, v in sorted(by_len.items())}
    return LengthReport(dict(sorted(hist.items())), per)


# -- transitions ------------------------------------------------------------

@dataclass(frozen=True)
class TransitionMatrix:
    kinds: tuple[str, ...]
    raw: tuple[tuple[float, ...], ...]
    prob: tuple[tuple[float, ...], ...]
    counts: tuple[tuple[int, ...], ...]

    @property
    def empty_rows(self) -> tuple[str, ...]:
        return tuple(k for k, row in zip(self.kinds, self.counts) if not any(row))

    def to_json(self) -> dict:
        return {
            "kinds": list(self.kinds),
            "raw": [list(r) for r in self.raw],
            "prob": [list(r) for r in self.prob],
            "counts": [list(r) for r in self.counts],
            "empty_rows": list(self.empty_rows),
        }


def transition_matrix(points: Iterable[DataPoint]) -> TransitionMatrix:
    n = len(KINDS)
    index = {k: i for i, k in enumerate(KINDS)}
    contrib: list[list[list[float]]] = [[[] for _ in range(n)] for _ in range(n)]
    for p in points:
        kinds = p.kinds
        pairs = {(index[a], index[b]) for a, b in zip(kinds, kinds[1:])}
        for i, j in pairs:
            contrib[i][j].append(p.speedup)
    raw = [[_mean(c) if c else 0.0 for c in row] for row in contrib]
    prob = []
    for row in raw:
        total = math.fsum(row)
        prob.append(tuple(v / total if total > 0 else 0.0 for v in row))
    counts = tuple(tuple(len(c) for c in row) for row in contrib)
    return TransitionMatrix(KINDS, tuple(tuple(r) for r in raw), tuple(prob), counts)


@dataclass(frozen=True)
class DerivedOrder:
    kinds: tuple[str, ...]
    repeatable: tuple[bool, ...]

    def __str__(self) -> str:
        return ", ".join(k + ("*" if r else "") for k, r in zip(self.kinds, self.repeatable))

    def to_json(self) -> dict:
        return {"kinds": list(self.kinds), "repeatable": list(self.repeatable), "text": str(self)}


def derive_order(T: TransitionMatrix) -> DerivedOrder:
    """Greedy reading of the transition heatmap into a fixed exploration order.

    Start at the kind whose best transition to another kind is strongest,
    then keep stepping to the unvisited kind it most likely transitions to.
    Parallelization always closes the order.
    """
    kinds = list(T.kinds)
    par = kinds.index("parallelization")
    P = T.prob

    def repeatable(i: int) -> bool:
        row = P[i]
        return row[i] > 0 and row[i] >= max(row)

    flags = {k: repeatable(i) for i, k in enumerate(kinds)}
    if not any(any(row) for row in P):
        order = [k for k in kinds if k != "parallelization"] + ["parallelization"]
        return DerivedOrder(tuple(order), tuple(flags[k] for k in order))

    candidates = [i for i in range(len(kinds)) if i != par]
    off_max = {i: max(P[i][j] for j in range(len(kinds)) if j != i) for i in candidates}
    cur = max(candidates, key=lambda i: (off_max[i], -i))
    order = [cur]
    while len(order) < len(candidates):
        rest = [j for j in candidates if j not in order]
        cur = max(rest, key=lambda j: (P[cur][j], -j))
        order.append(cur)
    order.append(par)
    names = tuple(kinds[i] for i in order)
    return DerivedOrder(names, tuple(flags[k] for k in names))


# -- report -----------------------------------------------------------------

REPORTS = ("parallel-depth", "skewing", "unrolling", "length", "transitions", "all")


@dataclass
class StatsReport:
    parallel_depth: list[DepthBin] = field(default_factory=list)
    skew: SkewReport = field(default_factory=SkewReport)
    unroll: dict[int, tuple[float, int]] = field(default_factory=dict)
    length: LengthReport = field(default_factory=lambda: LengthReport({}, {}))
    transitions: TransitionMatrix | None = None
    derived_order: DerivedOrder | None = None

    def to_json(self) -> dict:
        return {
            "parallel_depth": [{"bin": b.bin, "mean": b.mean, "n": b.n} for b in self.parallel_depth],
            "skew": self.skew.to_json(),
            "unroll": {str(f): {"mean": m, "n": n} for f, (m, n) in self.unroll.items()},
            "length": self.length.to_json(),
            "transitions": self.transitions.to_json() if self.transitions else None,
            "derived_order": self.derived_order.to_json() if self.derived_order else None,
        }


def build_report(
    points: Sequence[DataPoint],
    which: str = "all",
    depths: Mapping[str, Sequence[int]] | None = None,
) -> StatsReport:
    if which not in REPORTS:
        raise ValueError(f"unknown report {which!r}")
    rep = StatsReport()
    every = which == "all"
    if every or which == "parallel-depth":
        rep.parallel_depth = analyze_parallel_depth(points, depths)
    if every or which == "skewing":
        rep.skew = analyze_skewing(points)
    if every or which == "unrolling":
        rep.unroll = analyze_unrolling(points)
    if every or which == "length":
        rep.length = analyze_schedule_length(points)
    if every or which == "transitions":
        rep.transitions = transition_matrix(points)
        rep.derived_order = derive_order(rep.transitions)
    return rep


def _csv_lines(header: Sequence[str], rows: Iterable[Sequence]) -> list[str]:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue().splitlines()


SKEW_FIELDS = (
    "mean_skew_with_parallel",
    "mean_skew_without_parallel",
    "ratio",
    "mean_parallel_with_prior_skew",
    "mean_parallel_without_prior_skew",
)


def emit_csv(report: StatsReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables = {
        "fig1.csv": _csv_lines(("bin", "mean", "n"), ((b.bin, b.mean, b.n) for b in report.parallel_depth)),
        "fig3.csv": _csv_lines(("factor", "mean", "n"), ((f, m, n) for f, (m, n) in report.unroll.items())),
        "fig5.csv": _csv_lines(("length", "count"), report.length.histogram.items()),
        "fig6.csv": _csv_lines(("length", "mean", "max"), ((k, m, x) for k, (m, x) in report.length.per_length.items())),
    }
    T = report.transitions
    rows = []
    if T is not None and any(any(r) for r in T.counts):
        rows = [(k,) + tuple(row) for k, row in zip(T.kinds, T.prob)]
    tables["fig7.csv"] = _csv_lines(("kind",) + KINDS, rows)
    skew_rows = [(k, getattr(report.skew, k)) for k in SKEW_FIELDS if getattr(report.skew, k) is not None]
    tables["skew.csv"] = _csv_lines(("metric", "value"), skew_rows)

    paths = []
    for name, lines in tables.items():
        path = out / name
        atomic_write_lines(path, lines)
        paths.append(path)
    return paths


def dump_json(report: StatsReport, path) -> None:
    atomic_write_lines(path, [json.dumps(report.to_json(), indent=2, sort_keys=False)])
