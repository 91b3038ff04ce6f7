"""Loop-nest program representation and the seeded random program generator.

A program is a short sequence of perfect affine loop nests. Every array in a
nest has rank equal to the nest depth and is indexed by the iteration vector
plus a constant offset, so all dependences are uniform.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

PATTERNS = ("elementwise", "stencil", "reduction")

MAX_DEPTH = 4
MAX_NESTS = 4

# Abstract ops per iteration drawn for generated statements.
STATEMENT_COSTS = (1, 2, 3, 4)

Vector = tuple[int, ...]


class ConfigError(ValueError):
    """Invalid generator/search/machine configuration; names the bad field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class AccessPattern:
    array: str
    offsets: tuple[Vector, ...]
    is_write: bool = False

    def to_json(self) -> dict:
        return {
            "array": self.array,
            "offsets": [list(o) for o in self.offsets],
            "is_write": self.is_write,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "AccessPattern":
        return cls(
            array=str(obj["array"]),
            offsets=tuple(tuple(int(c) for c in o) for o in obj["offsets"]),
            is_write=bool(obj["is_write"]),
        )


@dataclass(frozen=True)
class LoopNest:
    depth: int
    extents: tuple[int, ...]
    pattern: str
    statement_cost: int
    accesses: tuple[AccessPattern, ...]

    @property
    def write(self) -> AccessPattern:
        return next(a for a in self.accesses if a.is_write)

    @property
    def arrays(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for a in self.accesses:
            seen.setdefault(a.array, None)
        return tuple(seen)

    def access_instances(self) -> list[tuple[str, Vector, bool]]:
        """Flatten patterns into distinct (array, offset, is_write) references."""
        out: dict[tuple[str, Vector, bool], None] = {}
        for a in self.accesses:
            for o in a.offsets:
                out.setdefault((a.array, o, a.is_write), None)
        return list(out)

    @property
    def iterations(self) -> int:
        return int(np.prod(self.extents))

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "extents": list(self.extents),
            "pattern": self.pattern,
            "statement_cost": self.statement_cost,
            "accesses": [a.to_json() for a in self.accesses],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "LoopNest":
        return cls(
            depth=int(obj["depth"]),
            extents=tuple(int(e) for e in obj["extents"]),
            pattern=str(obj["pattern"]),
            statement_cost=int(obj["statement_cost"]),
            accesses=tuple(AccessPattern.from_json(a) for a in obj["accesses"]),
        )


@dataclass(frozen=True)
class Program:
    id: str
    seed: int
    nests: tuple[LoopNest, ...]

    @property
    def depths(self) -> tuple[int, ...]:
        return tuple(n.depth for n in self.nests)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "seed": self.seed,
            "nests": [n.to_json() for n in self.nests],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Program":
        if set(obj) != {"id", "seed", "nests"}:
            raise ValueError(f"program record fields {sorted(obj)}")
        return cls(
            id=str(obj["id"]),
            seed=int(obj["seed"]),
            nests=tuple(LoopNest.from_json(n) for n in obj["nests"]),
        )


def default_stencil_catalog() -> list[list[Vector]]:
    one = [(-1,)]
    two = [
        [(-1, 0)],
        [(0, -1)],
        [(-1, -1)],
        [(-1, 0), (0, -1)],
        [(-1, 0), (-1, -1)],
        [(0, -1), (-1, -1)],
        [(-1, 0), (0, -1), (-1, -1)],
    ]
    three = [
        [(-1, 0, 0)],
        [(0, 0, -1)],
        [(-1, 0, 0), (0, -1, 0)],
        [(0, -1, 0), (0, 0, -1)],
        [(-1, 0, 0), (0, -1, 0), (0, 0, -1)],
    ]
    return [one] + two + three


@dataclass(frozen=True)
class GeneratorConfig:
    max_nests: int = 3
    max_depth: int = 4
    extent_choices: tuple[int, ...] = (16, 32, 64, 128)
    pattern_weights: Mapping[str, float] = field(
        default_factory=lambda: {"elementwise": 1.0, "stencil": 1.0, "reduction": 1.0}
    )
    stencil_offset_catalog: tuple[tuple[Vector, ...], ...] = field(
        default_factory=lambda: tuple(tuple(s) for s in default_stencil_catalog())
    )

    def validate(self) -> None:
        if not 1 <= self.max_nests <= MAX_NESTS:
            raise ConfigError("max_nests", f"must be in [1, {MAX_NESTS}], got {self.max_nests}")
        if not 1 <= self.max_depth <= MAX_DEPTH:
            raise ConfigError("max_depth", f"must be in [1, {MAX_DEPTH}], got {self.max_depth}")
        if not self.extent_choices or any(e < 2 for e in self.extent_choices):
            raise ConfigError("extent_choices", "needs at least one extent, all >= 2")
        unknown = set(self.pattern_weights) - set(PATTERNS)
        if unknown:
            raise ConfigError("pattern_weights", f"unknown patterns {sorted(unknown)}")
        weights = [self.pattern_weights.get(p, 0.0) for p in PATTERNS]
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ConfigError("pattern_weights", "weights must be non-negative and not all zero")
        for i, offs in enumerate(self.stencil_offset_catalog):
            if not offs:
                raise ConfigError("stencil_offset_catalog", f"entry {i} is empty")
            if len({len(o) for o in offs}) != 1:
                raise ConfigError("stencil_offset_catalog", f"entry {i} mixes vector lengths")
            for o in offs:
                if not _lex_nonpositive(o) or not any(o):
                    raise ConfigError(
                        "stencil_offset_catalog",
                        f"entry {i} offset {o} is not a lexicographically negative read",
                    )

    def to_json(self) -> dict:
        return {
            "max_nests": self.max_nests,
            "max_depth": self.max_depth,
            "extent_choices": list(self.extent_choices),
            "pattern_weights": dict(self.pattern_weights),
            "stencil_offset_catalog": [[list(o) for o in s] for s in self.stencil_offset_catalog],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "GeneratorConfig":
        known = {"max_nests", "max_depth", "extent_choices", "pattern_weights", "stencil_offset_catalog"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown generator config key")
        kwargs: dict = {}
        try:
            if "max_nests" in obj:
                kwargs["max_nests"] = int(obj["max_nests"])
            if "max_depth" in obj:
                kwargs["max_depth"] = int(obj["max_depth"])
            if "extent_choices" in obj:
                kwargs["extent_choices"] = tuple(int(e) for e in obj["extent_choices"])
            if "pattern_weights" in obj:
                kwargs["pattern_weights"] = {str(k): float(v) for k, v in obj["pattern_weights"].items()}
            if "stencil_offset_catalog" in obj:
                kwargs["stencil_offset_catalog"] = tuple(
                    tuple(tuple(int(c) for c in o) for o in s) for s in obj["stencil_offset_catalog"]
                )
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError("generator", f"malformed value: {exc}") from exc
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


def _lex_nonpositive(v: Sequence[int]) -> bool:
    for c in v:
        if c != 0:
            return c < 0
    return True


def program_id(seed: int, depths: Iterable[int]) -> str:
    # Nest depths ride along in the id so dataset-only analyses can recover them.
    return f"p{seed & 0xFFFFFFFFFFFFFFFF:016x}-d" + ".".join(str(d) for d in depths)


def depths_from_id(pid: str) -> tuple[int, ...] | None:
    head, sep, tail = pid.rpartition("-d")
    if not sep or not tail:
        return None
    try:
        return tuple(int(t) for t in tail.split("."))
    except ValueError:
        return None


def _weighted_choice(rng: random.Random, weights: Mapping[str, float]) -> str:
    items = [(p, weights.get(p, 0.0)) for p in PATTERNS]
    total = sum(w for _, w in items)
    r = rng.random() * total
    acc = 0.0
    for p, w in items:
        acc += w
        if w > 0 and r < acc:
            return p
    return next(p for p, w in reversed(items) if w > 0)


def _generate_nest(rng: random.Random, index: int, cfg: GeneratorConfig) -> LoopNest:
    depth = rng.randint(1, cfg.max_depth)
    extents = tuple(rng.choice(cfg.extent_choices) for _ in range(depth))
    pattern = _weighted_choice(rng, cfg.pattern_weights)
    cost = rng.choice(STATEMENT_COSTS)
    zero = (0,) * depth
    out = f"A{index}"
    n_inputs = rng.randint(0, 2)
    accesses = [AccessPattern(out, (zero,), True)]

    if pattern == "stencil":
        fitting = [s for s in cfg.stencil_offset_catalog if len(s[0]) <= depth]
        if not fitting:
            # no catalog entry fits this depth; fall back to a plain map
            pattern = "elementwise"
        else:
            chosen = rng.choice(fitting)
            pad = (0,) * (depth - len(chosen[0]))
            accesses.append(AccessPattern(out, tuple(pad + tuple(o) for o in chosen)))
    elif pattern == "reduction":
        level = rng.randrange(depth)
        unit = tuple(-1 if k == level else 0 for k in range(depth))
        accesses.append(AccessPattern(out, (unit,)))
        n_inputs = max(n_inputs, 1)

    for k in range(n_inputs):
        # inputs are never written, so their offsets carry no dependences
        offs = [zero]
        if rng.random() < 0.5:
            lvl = rng.randrange(depth)
            offs.append(tuple(rng.choice((-1, 1)) if j == lvl else 0 for j in range(depth)))
        accesses.append(AccessPattern(f"B{index}_{k}", tuple(offs)))

    return LoopNest(depth, extents, pattern, cost, tuple(accesses))


def generate_program(seed: int, cfg: GeneratorConfig | None = None) -> Program:
    cfg = cfg or GeneratorConfig()
    cfg.validate()
    rng = random.Random(seed)
    n = rng.randint(1, cfg.max_nests)
    nests = tuple(_generate_nest(rng, i, cfg) for i in range(n))
    return Program(program_id(seed, (x.depth for x in nests)), seed, nests)


def corpus_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=seed & 0xFFFFFFFFFFFFFFFF, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class EmptyCorpusError(ValueError):
    pass


def generate_corpus(seed: int, n: int, cfg: GeneratorConfig | None = None) -> list[Program]:
    if n < 1:
        raise EmptyCorpusError(f"corpus size must be >= 1, got {n}")
    cfg = cfg or GeneratorConfig()
    programs = [generate_program(corpus_seed(seed, i), cfg) for i in range(n)]
    ids = [p.id for p in programs]
    if len(set(ids)) != len(ids):
        raise RuntimeError("program id collision in corpus")
    return programs


def validate_program(p: Program) -> list[str]:
    """Return a list of invariant violations, each prefixed with its field path."""
    # Local import: the pattern invariants are phrased in terms of dependences.
    from .dependence import raw_distances

    errs: list[str] = []
    if not 1 <= len(p.nests) <= MAX_NESTS:
        errs.append(f"nests: count {len(p.nests)} outside [1, {MAX_NESTS}]")
    for i, nest in enumerate(p.nests):
        where = f"nests[{i}]"
        if not 1 <= nest.depth <= MAX_DEPTH:
            errs.append(f"{where}.depth: {nest.depth} outside [1, {MAX_DEPTH}]")
        if len(nest.extents) != nest.depth:
            errs.append(f"{where}.extents: length {len(nest.extents)} != depth {nest.depth}")
        for k, e in enumerate(nest.extents):
            if e < 2:
                errs.append(f"{where}.extents[{k}]: extent {e} < 2")
        if nest.pattern not in PATTERNS:
            errs.append(f"{where}.pattern: unknown pattern {nest.pattern!r}")
        if nest.statement_cost < 1:
            errs.append(f"{where}.statement_cost: {nest.statement_cost} < 1")
        writes = [a for a in nest.accesses if a.is_write]
        if len(writes) != 1:
            errs.append(f"{where}.accesses: {len(writes)} write patterns, expected 1")
        shape_ok = True
        for j, a in enumerate(nest.accesses):
            if not a.offsets:
                errs.append(f"{where}.accesses[{j}].offsets: empty")
            for k, o in enumerate(a.offsets):
                if len(o) != nest.depth:
                    shape_ok = False
                    errs.append(
                        f"{where}.accesses[{j}].offsets[{k}]: length {len(o)} != depth {nest.depth}"
                    )
        if not shape_ok or len(writes) != 1:
            continue
        out = writes[0].array
        if nest.pattern == "elementwise" and raw_distances(nest):
            errs.append(f"{where}.pattern: elementwise nest has dependences")
        if nest.pattern == "stencil":
            for j, a in enumerate(nest.accesses):
                if a.array == out and not a.is_write:
                    for k, o in enumerate(a.offsets):
                        if not _lex_nonpositive(o):
                            errs.append(
                                f"{where}.accesses[{j}].offsets[{k}]: stencil read {o} is lexicographically positive"
                            )
    return errs


def dumps_program(p: Program) -> str:
    return json.dumps(p.to_json(), separators=(",", ":"))


def write_corpus(programs: Sequence[Program], path) -> int:
    from .dataset import atomic_write_lines

    atomic_write_lines(path, (dumps_program(p) for p in programs))
    return len(programs)


def read_corpus(path) -> list[Program]:
    programs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                programs.append(Program.from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed program record: {exc}") from exc
    return programs
