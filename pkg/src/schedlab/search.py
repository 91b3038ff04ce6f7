"""Schedule-space explorers: beam search, exhaustive enumeration, random walks,
plus the statistical pruning rules applied as candidate filters."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .cost import MachineConfig, baseline_time, evaluate_time
from .dependence import DependenceSet, compute_dependences
from .ir import ConfigError, Program
from .transforms import (
    KINDS,
    ScheduleState,
    Transformation,
    TransformSpaceConfig,
    apply,
    enumerate_candidates,
    parallelizable,
    signature,
)

MODES = ("fixed_order_beam", "arbitrary_order_beam", "exhaustive", "random_walk")
DEFAULT_ORDER = ("skewing", "interchange", "reversal", "unrolling", "tiling", "parallelization")
EXHAUSTIVE_GUARD = 100_000


class SearchSpaceTooLarge(RuntimeError):
    def __init__(self, count: int, guard: int):
        super().__init__(f"schedule space exceeds guard: {count} states > {guard}")
        self.count = count
        self.guard = guard


def _load_flat(cls, path):
    return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class SearchConfig:
    mode: str = "fixed_order_beam"
    beam_k: int = 4
    fixed_order: tuple[str, ...] = DEFAULT_ORDER
    max_len: int = 6
    walks_per_program: int = 4
    walk_seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError("mode", f"unknown mode {self.mode!r}")
        if self.beam_k < 1:
            raise ConfigError("beam_k", "must be >= 1")
        if self.max_len < 0:
            raise ConfigError("max_len", "must be >= 0")
        order = list(self.fixed_order)
        if len(set(order)) != len(order) or any(k not in KINDS for k in order):
            raise ConfigError("fixed_order", "must be a permutation of a subset of the six kinds")
        if "parallelization" in order and order[-1] != "parallelization":
            raise ConfigError("fixed_order", "parallelization must come last")
        if self.walks_per_program < 1:
            raise ConfigError("walks_per_program", "must be >= 1")

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "beam_k": self.beam_k,
            "fixed_order": list(self.fixed_order),
            "max_len": self.max_len,
            "walks_per_program": self.walks_per_program,
            "walk_seed": self.walk_seed,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "SearchConfig":
        allowed = {"mode", "beam_k", "fixed_order", "max_len", "walks_per_program", "walk_seed"}
        for k in obj:
            if k not in allowed:
                raise ConfigError(k, "unknown search config key")
        kw = dict(obj)
        if "fixed_order" in kw:
            kw["fixed_order"] = tuple(kw["fixed_order"])
        for k in ("beam_k", "max_len", "walks_per_program", "walk_seed"):
            if k in kw and (isinstance(kw[k], bool) or not isinstance(kw[k], int)):
                raise ConfigError(k, "must be an integer")
        return cls(**kw)

    load = classmethod(_load_flat)


@dataclass(frozen=True)
class RuleSet:
    parallel_depth_cutoff: float | None = None
    skew_gate: bool = False
    fixed_unroll: tuple[int, ...] | None = None
    max_schedule_len: int | None = None

    def __post_init__(self):
        rho = self.parallel_depth_cutoff
        if rho is not None and not 0 <= rho <= 1:
            raise ConfigError("parallel_depth_cutoff", "must lie in [0, 1]")
        if self.max_schedule_len is not None and self.max_schedule_len < 0:
            raise ConfigError("max_schedule_len", "must be >= 0")

    @classmethod
    def recommended(cls) -> "RuleSet":
        """All four pruning rules at their data-derived settings."""
        return cls(parallel_depth_cutoff=0.3, skew_gate=True, fixed_unroll=(16,), max_schedule_len=8)

    @property
    def empty(self) -> bool:
        return self == RuleSet()

    def check(self, space: TransformSpaceConfig) -> None:
        if self.fixed_unroll is not None and not set(self.fixed_unroll) <= set(space.unroll_choices):
            raise ConfigError("fixed_unroll", "factors must be among the unroll choices")

    def to_json(self) -> dict:
        return {
            "parallel_depth_cutoff": self.parallel_depth_cutoff,
            "skew_gate": self.skew_gate,
            "fixed_unroll": None if self.fixed_unroll is None else list(self.fixed_unroll),
            "max_schedule_len": self.max_schedule_len,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "RuleSet":
        allowed = {"parallel_depth_cutoff", "skew_gate", "fixed_unroll", "max_schedule_len"}
        for k in obj:
            if k not in allowed:
                raise ConfigError(k, "unknown rule set key")
        kw = dict(obj)
        if kw.get("fixed_unroll") is not None:
            kw["fixed_unroll"] = tuple(kw["fixed_unroll"])
        if "skew_gate" in kw and not isinstance(kw["skew_gate"], bool):
            raise ConfigError("skew_gate", "must be a boolean")
        return cls(**kw)

    load = classmethod(_load_flat)


def relative_level(level: int, depth: int) -> float:
    if not 0 <= level < depth:
        raise ValueError(f"loop level {level} outside nest of depth {depth}")
    if depth == 1:
        return 0.0
    return level / (depth - 1)


def filter_candidates(
    cands: Sequence[Transformation],
    state: ScheduleState,
    rules: RuleSet,
    deps: Sequence[DependenceSet],
) -> list[Transformation]:
    """Drop candidates the rule set prunes. ``deps`` is indexed by nest."""
    if rules.max_schedule_len is not None and len(state.steps) >= rules.max_schedule_len:
        return []
    gated: dict[int, bool] = {}
    out = []
    for t in cands:
        ns = state.nests[t.nest]
        if t.kind == "parallelization" and rules.parallel_depth_cutoff is not None:
            # exact comparison so a level of exactly the cutoff survives
            if Fraction(t.params["loop"], max(ns.loop_depth - 1, 1)) > Fraction(str(rules.parallel_depth_cutoff)):
                continue
        if t.kind == "skewing" and rules.skew_gate:
            if t.nest not in gated:
                gated[t.nest] = parallelizable(state, t.nest, deps[t.nest])
            if gated[t.nest]:
                continue
        if t.kind == "unrolling" and rules.fixed_unroll is not None:
            if t.params["factor"] not in rules.fixed_unroll:
                continue
        out.append(t)
    return out


def serialize_steps(steps: Iterable[Transformation]) -> str:
    return json.dumps([t.to_json() for t in steps], separators=(",", ":"))


@dataclass
class SearchResult:
    best: list[tuple[ScheduleState, float]]
    evaluations: int
    explored_signatures: int
    points: list[tuple[ScheduleState, float]] = field(default_factory=list)

    @property
    def best_speedup(self) -> float:
        return self.best[0][1]


def _rank_key(item: tuple[ScheduleState, float]):
    state, speed = item
    return (-speed, len(state.steps), serialize_steps(state.steps))


class _Explorer:
    """Per-program search context: dependences, candidate expansion, and a
    signature-keyed evaluation log that guarantees one cost call per state."""

    def __init__(self, program: Program, mc: MachineConfig, rules: RuleSet, space: TransformSpaceConfig):
        self.program = program
        self.mc = mc
        self.rules = rules
        self.space = space
        rules.check(space)
        self.deps = [compute_dependences(n) for n in program.nests]
        self.base = baseline_time(program, mc)
        self.seen: dict[str, float] = {}
        self.points: list[tuple[ScheduleState, float]] = []
        self.evaluations = 0

    def evaluate(self, state: ScheduleState) -> float:
        sig = signature(state)
        assert sig not in self.seen, f"signature evaluated twice: {sig}"
        self.evaluations += 1
        speed = self.base / evaluate_time(self.program, state, self.mc, check=False)
        self.seen[sig] = speed
        self.points.append((state, speed))
        return speed

    def expand(self, state: ScheduleState, kinds: Sequence[str]) -> list[Transformation]:
        if state.parallelized:
            return []
        cands: list[Transformation] = []
        for i, nest in enumerate(self.program.nests):
            for kind in kinds:
                cands += enumerate_candidates(i, nest, state, kind, self.space, self.deps[i])
        return filter_candidates(cands, state, self.rules, self.deps)

    def step_cap(self, sc: SearchConfig) -> int:
        cap = sc.max_len
        if self.rules.max_schedule_len is not None:
            cap = min(cap, self.rules.max_schedule_len)
        return cap


def _levels(sc: SearchConfig, cap: int) -> list[Sequence[str]]:
    if sc.mode == "fixed_order_beam":
        return [(k,) for k in sc.fixed_order]
    return [KINDS] * cap


def beam_search(
    p: Program,
    sc: SearchConfig,
    rules: RuleSet | None = None,
    mc: MachineConfig | None = None,
    space: TransformSpaceConfig | None = None,
) -> SearchResult:
    ex = _Explorer(p, mc or MachineConfig(), rules or RuleSet(), space or TransformSpaceConfig())
    cap = ex.step_cap(sc)
    fixed = sc.mode == "fixed_order_beam"
    root = ScheduleState.initial(p)
    beam = [(root, ex.evaluate(root))]

    for kinds in _levels(sc, cap):
        children = []
        for state, _ in beam:
            if len(state.steps) >= cap:
                continue
            for t in ex.expand(state, kinds):
                child = apply(state, t)
                if signature(child) in ex.seen:
                    continue
                children.append((child, ex.evaluate(child)))
        if not children:
            if fixed:
                continue
            break
        # keeping the parents is the "apply nothing at this level" option
        beam = sorted(children + beam, key=_rank_key)[: sc.beam_k]

    best = sorted(ex.points, key=_rank_key)[: sc.beam_k]
    return SearchResult(best, ex.evaluations, len(ex.seen), ex.points)


def exhaustive_search(
    p: Program,
    sc: SearchConfig,
    mc: MachineConfig | None = None,
    rules: RuleSet | None = None,
    space: TransformSpaceConfig | None = None,
    guard: int | None = None,
) -> SearchResult:
    """Enumerate every signature-distinct schedule reachable under the mode.

    Fixed-order mode walks the order once, each kind applied or skipped; any
    other mode allows any kind at any position. Parallelization ends a path.
    """
    guard = EXHAUSTIVE_GUARD if guard is None else guard
    ex = _Explorer(p, mc or MachineConfig(), rules or RuleSet(), space or TransformSpaceConfig())
    cap = ex.step_cap(sc)
    order = list(sc.fixed_order) if sc.mode == "fixed_order_beam" else None
    found: dict[str, tuple[ScheduleState, float]] = {}
    visited: set = set()

    def record(state: ScheduleState) -> None:
        sig = signature(state)
        prev = found.get(sig)
        if prev is None:
            if len(found) >= guard:
                raise SearchSpaceTooLarge(len(found) + 1, guard)
            found[sig] = (state, ex.base / evaluate_time(p, state, ex.mc, check=False))
        elif len(state.steps) < len(prev[0].steps):
            found[sig] = (state, prev[1])

    stack = [(ScheduleState.initial(p), 0)]
    while stack:
        state, pos = stack.pop()
        key = (signature(state), pos, len(state.steps))
        if key in visited:
            continue
        visited.add(key)
        record(state)
        if len(visited) > 20 * guard:
            raise SearchSpaceTooLarge(len(visited), guard)
        if len(state.steps) >= cap or state.parallelized:
            continue
        if order is None:
            for t in ex.expand(state, KINDS):
                stack.append((apply(state, t), 0))
        elif pos < len(order):
            stack.append((state, pos + 1))
            for t in ex.expand(state, (order[pos],)):
                stack.append((apply(state, t), pos + 1))

    ranked = sorted(found.values(), key=_rank_key)
    return SearchResult(ranked, len(found), len(found), ranked)


def _walk_rng(sc: SearchConfig, p: Program, walk: int) -> random.Random:
    return random.Random(f"{sc.walk_seed}:{p.seed}:{p.id}:{walk}")


def random_walks(
    p: Program,
    sc: SearchConfig,
    mc: MachineConfig | None = None,
    rules: RuleSet | None = None,
    space: TransformSpaceConfig | None = None,
) -> list:
    """Seeded walks picking uniformly among legal, rule-filtered candidates."""
    from .dataset import DataPoint

    mc = mc or MachineConfig()
    ex = _Explorer(p, mc, rules or RuleSet(), space or TransformSpaceConfig())
    cap = ex.step_cap(sc)
    speeds: dict[str, float] = {}

    def speed_of(state: ScheduleState) -> float:
        sig = signature(state)
        if sig not in speeds:
            speeds[sig] = ex.base / evaluate_time(p, state, mc, check=False)
        return speeds[sig]

    out = []
    for w in range(sc.walks_per_program):
        rng = _walk_rng(sc, p, w)
        state = ScheduleState.initial(p)
        out.append(DataPoint.from_state(p.id, state, speed_of(state)))
        while len(state.steps) < cap:
            cands = ex.expand(state, KINDS)
            if not cands:
                break
            state = apply(state, rng.choice(cands))
            out.append(DataPoint.from_state(p.id, state, speed_of(state)))
            if state.parallelized:
                break
    return out
