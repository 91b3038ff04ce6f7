"""Schedule transformations, their legality, and the skew-factor solvers.

Interchange, reversal and skewing accumulate into a per-nest unimodular
matrix. Tiling, unrolling and parallelization are annotations on top of it.
Once a nest is tiled its unimodular part is frozen, and once it is
parallelized the nest is closed to further steps.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from . import _kernels
from .dependence import (
    DependenceSet,
    band_permutable,
    parallel_legal,
    tiled_distances,
    transform_distances,
)
from .ir import ConfigError, LoopNest, Program

KINDS = ("interchange", "reversal", "skewing", "tiling", "unrolling", "parallelization")
UNIMODULAR_KINDS = ("interchange", "reversal", "skewing")

Matrix = tuple[tuple[int, ...], ...]

_PARAM_KEYS = {
    "interchange": ("p", "q"),
    "reversal": ("p",),
    "skewing": ("p", "q", "factor"),
    "tiling": ("band", "sizes"),
    "unrolling": ("loop", "factor"),
    "parallelization": ("loop",),
}


class MalformedTransformation(ValueError):
    pass


class LegalityError(ValueError):
    def __init__(self, t: "Transformation", vector: tuple[int, ...] | None):
        super().__init__(f"{t.kind} on nest {t.nest} violates dependence {vector}")
        self.transformation = t
        self.vector = vector


@dataclass(frozen=True)
class Transformation:
    kind: str
    nest: int
    params: Mapping = field(hash=False)

    @classmethod
    def interchange(cls, nest: int, p: int, q: int) -> "Transformation":
        return cls("interchange", nest, {"p": p, "q": q})

    @classmethod
    def reversal(cls, nest: int, p: int) -> "Transformation":
        return cls("reversal", nest, {"p": p})

    @classmethod
    def skewing(cls, nest: int, p: int, q: int, factor: int) -> "Transformation":
        return cls("skewing", nest, {"p": p, "q": q, "factor": factor})

    @classmethod
    def tiling(cls, nest: int, band: Sequence[int], sizes: Sequence[int]) -> "Transformation":
        return cls("tiling", nest, {"band": list(band), "sizes": list(sizes)})

    @classmethod
    def unrolling(cls, nest: int, loop: int, factor: int) -> "Transformation":
        return cls("unrolling", nest, {"loop": loop, "factor": factor})

    @classmethod
    def parallelization(cls, nest: int, loop: int) -> "Transformation":
        return cls("parallelization", nest, {"loop": loop})

    def sort_key(self) -> tuple:
        vals = []
        for k in _PARAM_KEYS[self.kind]:
            v = self.params[k]
            vals.append(tuple(v) if isinstance(v, (list, tuple)) else (v,))
        return (self.nest, KINDS.index(self.kind), tuple(vals))

    def to_json(self) -> dict:
        return {"kind": self.kind, "nest": self.nest, "params": {k: self.params[k] for k in _PARAM_KEYS[self.kind]}}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Transformation":
        if not isinstance(obj, Mapping) or set(obj) != {"kind", "nest", "params"}:
            raise MalformedTransformation(f"step must have exactly kind/nest/params: {obj!r}")
        kind = obj["kind"]
        if kind not in KINDS:
            raise MalformedTransformation(f"unknown transformation kind {kind!r}")
        params = obj["params"]
        if not isinstance(params, Mapping) or set(params) != set(_PARAM_KEYS[kind]):
            raise MalformedTransformation(f"{kind} params must be {_PARAM_KEYS[kind]}, got {params!r}")
        nest = obj["nest"]
        if not isinstance(nest, int) or isinstance(nest, bool) or nest < 0:
            raise MalformedTransformation(f"bad nest index {nest!r}")
        clean = {}
        for k in _PARAM_KEYS[kind]:
            v = params[k]
            if k in ("band", "sizes"):
                if not isinstance(v, list) or not all(isinstance(c, int) and not isinstance(c, bool) for c in v):
                    raise MalformedTransformation(f"{kind}.{k} must be a list of integers")
                clean[k] = list(v)
            else:
                if not isinstance(v, int) or isinstance(v, bool):
                    raise MalformedTransformation(f"{kind}.{k} must be an integer")
                clean[k] = v
        return cls(kind, nest, clean)

    def __str__(self) -> str:
        args = ",".join(f"{k}={self.params[k]}" for k in _PARAM_KEYS[self.kind])
        return f"{self.kind}[{self.nest}]({args})"


@dataclass(frozen=True)
class Tiling:
    band: tuple[int, int]  # inclusive loop range in the unimodular loop order
    sizes: tuple[int, ...]

    @property
    def width(self) -> int:
        return self.band[1] - self.band[0] + 1


def identity(n: int) -> Matrix:
    return tuple(tuple(int(i == j) for j in range(n)) for i in range(n))


@dataclass(frozen=True)
class NestSchedule:
    U: Matrix
    tiling: Tiling | None = None
    unroll: int | None = None
    parallel: int | None = None

    @property
    def depth(self) -> int:
        return len(self.U)

    @property
    def loop_depth(self) -> int:
        """Number of loops after tiling (tile loops plus point loops)."""
        return self.depth + (self.tiling.width if self.tiling else 0)

    def key(self) -> str:
        parts = []
        k, block = _trim(self.U)
        if k:
            parts.append("U" + ";".join(",".join(map(str, r)) for r in block))
        if self.tiling:
            lo, hi = self.tiling.band
            parts.append(f"T{lo}-{hi}:" + ",".join(map(str, self.tiling.sizes)))
        if self.unroll:
            parts.append(f"R{self.unroll}")
        if self.parallel is not None:
            parts.append(f"P{self.parallel}")
        return "/".join(parts)


def _trim(U: Matrix) -> tuple[int, Matrix]:
    """Smallest leading block outside which U is the identity."""
    n = len(U)
    k = n
    while k > 0:
        i = k - 1
        row_ok = all(U[i][j] == (i == j) for j in range(n))
        col_ok = all(U[j][i] == (i == j) for j in range(n))
        if not (row_ok and col_ok):
            break
        k -= 1
    return k, tuple(tuple(r[:k]) for r in U[:k])


@dataclass(frozen=True)
class ScheduleState:
    nests: tuple[NestSchedule, ...]
    steps: tuple[Transformation, ...] = ()

    @classmethod
    def initial(cls, program_or_depths: Program | Iterable[int]) -> "ScheduleState":
        depths = program_or_depths.depths if isinstance(program_or_depths, Program) else program_or_depths
        return cls(tuple(NestSchedule(identity(d)) for d in depths))

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def parallelized(self) -> bool:
        return bool(self.steps) and self.steps[-1].kind == "parallelization"


def signature(state: ScheduleState) -> str:
    return "|".join(f"{i}:{k}" for i, n in enumerate(state.nests) if (k := n.key()))


@dataclass(frozen=True)
class TransformSpaceConfig:
    unroll_choices: tuple[int, ...] = (4, 8, 16)
    tile_choices: tuple[int, ...] = (32, 64)
    max_skew_factor: int = 4

    def __post_init__(self):
        for name in ("unroll_choices", "tile_choices"):
            vals = getattr(self, name)
            if not vals or any(v < 2 for v in vals):
                raise ConfigError(name, "all choices must be >= 2")
        if self.max_skew_factor < 1:
            raise ConfigError("max_skew_factor", "must be >= 1")


# -- matrix helpers ---------------------------------------------------------

def _swap_rows(U: Matrix, p: int, q: int) -> Matrix:
    rows = list(U)
    rows[p], rows[q] = rows[q], rows[p]
    return tuple(rows)


def _negate_row(U: Matrix, p: int) -> Matrix:
    return tuple(tuple(-c for c in r) if i == p else r for i, r in enumerate(U))


def _add_row(U: Matrix, p: int, q: int, f: int) -> Matrix:
    return tuple(tuple(a + f * b for a, b in zip(r, U[q])) if i == p else r for i, r in enumerate(U))


def determinant(U: Sequence[Sequence[int]]) -> int:
    n = len(U)
    if n == 1:
        return U[0][0]
    total = 0
    for j in range(n):
        if U[0][j]:
            minor = [row[:j] + row[j + 1:] for row in (tuple(r) for r in U[1:])]
            total += (-1) ** j * U[0][j] * determinant(minor)
    return total


def level_permutation(U: Matrix) -> tuple[int, ...]:
    """Original loop each transformed loop takes its trip count from.

    Chosen as the permutation maximizing the product of |U[k][perm[k]]|,
    ties going to the lexicographically smallest permutation.
    """
    n = len(U)
    best, best_score = None, -1
    for perm in itertools.permutations(range(n)):
        score = 1
        for k in range(n):
            score *= abs(U[k][perm[k]])
        if score > best_score:
            best, best_score = perm, score
    return best


def level_extents(U: Matrix, extents: Sequence[int]) -> tuple[int, ...]:
    return tuple(extents[j] for j in level_permutation(U))


# -- well-formedness and legality ------------------------------------------

def _check_well_formed(state: ScheduleState, t: Transformation) -> NestSchedule:
    if t.kind not in KINDS:
        raise MalformedTransformation(f"unknown kind {t.kind!r}")
    if not 0 <= t.nest < len(state.nests):
        raise MalformedTransformation(f"nest {t.nest} out of range")
    ns = state.nests[t.nest]
    d = ns.depth
    P = t.params
    if ns.parallel is not None:
        raise MalformedTransformation(f"nest {t.nest} is already parallelized")
    if t.kind in UNIMODULAR_KINDS and ns.tiling is not None:
        raise MalformedTransformation(f"nest {t.nest} is tiled; {t.kind} no longer applies")
    if t.kind == "interchange":
        if not 0 <= P["p"] < P["q"] < d:
            raise MalformedTransformation(f"interchange loops {P['p']},{P['q']} invalid for depth {d}")
    elif t.kind == "reversal":
        if not 0 <= P["p"] < d:
            raise MalformedTransformation(f"reversal loop {P['p']} invalid for depth {d}")
    elif t.kind == "skewing":
        if not (0 <= P["p"] and P["q"] == P["p"] + 1 and P["q"] < d):
            raise MalformedTransformation("skewing needs adjacent loops p, p+1")
        if P["factor"] < 1:
            raise MalformedTransformation("skew factor must be >= 1")
    elif t.kind == "tiling":
        band, sizes = list(P["band"]), list(P["sizes"])
        if ns.tiling is not None:
            raise MalformedTransformation(f"nest {t.nest} is already tiled")
        if len(band) not in (2, 3) or band != list(range(band[0], band[0] + len(band))):
            raise MalformedTransformation(f"tiling band {band} must be 2 or 3 contiguous loops")
        if band[0] < 0 or band[-1] >= d or len(sizes) != len(band) or any(s < 2 for s in sizes):
            raise MalformedTransformation(f"tiling band {band} / sizes {sizes} invalid for depth {d}")
    elif t.kind == "unrolling":
        if ns.unroll is not None:
            raise MalformedTransformation(f"nest {t.nest} is already unrolled")
        if P["loop"] != ns.loop_depth - 1:
            raise MalformedTransformation("unrolling targets the innermost loop only")
        if P["factor"] < 2:
            raise MalformedTransformation("unroll factor must be >= 2")
    elif t.kind == "parallelization":
        if not 0 <= P["loop"] < ns.loop_depth:
            raise MalformedTransformation(f"parallel loop {P['loop']} out of range")
    return ns


def _apply_nest(ns: NestSchedule, t: Transformation) -> NestSchedule:
    P = t.params
    if t.kind == "interchange":
        return replace(ns, U=_swap_rows(ns.U, P["p"], P["q"]))
    if t.kind == "reversal":
        return replace(ns, U=_negate_row(ns.U, P["p"]))
    if t.kind == "skewing":
        return replace(ns, U=_add_row(ns.U, P["p"], P["q"], P["factor"]))
    if t.kind == "tiling":
        band = P["band"]
        return replace(ns, tiling=Tiling((band[0], band[-1]), tuple(P["sizes"])))
    if t.kind == "unrolling":
        return replace(ns, unroll=P["factor"])
    return replace(ns, parallel=P["loop"])


def _distances(deps) -> list[tuple[int, ...]]:
    return deps.sorted() if isinstance(deps, DependenceSet) else sorted(deps)


def schedule_vectors(ns: NestSchedule, deps) -> set[tuple[int, ...]]:
    """Dependence distances expressed in the nest's final loop order."""
    vecs = transform_distances(_distances(deps), ns.U)
    if ns.tiling is not None:
        vecs = tiled_distances(vecs, ns.tiling.band, ns.tiling.sizes)
    return vecs


def violation(state: ScheduleState, t: Transformation, deps) -> tuple[bool, tuple[int, ...] | None]:
    """(legal, offending distance in the input space) for applying ``t``."""
    ns = _check_well_formed(state, t)
    dists = _distances(deps)
    if t.kind == "unrolling" or not dists:
        return True, None
    new = _apply_nest(ns, t)
    if t.kind in UNIMODULAR_KINDS:
        bad = _kernels.lex_violation(new.U, dists)
        return (bad < 0), (None if bad < 0 else dists[bad])
    vecs_by_src = {v: transform_distances([v], ns.U) for v in dists}
    if t.kind == "tiling":
        lo, hi = new.tiling.band
        for v, tv in vecs_by_src.items():
            if not band_permutable(tv, lo, hi):
                return False, v
        return True, None
    # parallelization
    for v, tv in vecs_by_src.items():
        if ns.tiling is not None:
            tv = tiled_distances(tv, ns.tiling.band, ns.tiling.sizes)
        if not parallel_legal(tv, t.params["loop"]):
            return False, v
    return True, None


def is_legal(state: ScheduleState, t: Transformation, deps) -> bool:
    return violation(state, t, deps)[0]


def apply(state: ScheduleState, t: Transformation, deps=None) -> ScheduleState:
    """Return the state after ``t``; when ``deps`` is given, legality is enforced."""
    if deps is not None:
        ok, vec = violation(state, t, deps)
        if not ok:
            raise LegalityError(t, vec)
    else:
        _check_well_formed(state, t)
    nests = list(state.nests)
    nests[t.nest] = _apply_nest(nests[t.nest], t)
    return ScheduleState(tuple(nests), state.steps + (t,))


def nest_legal(ns: NestSchedule, deps) -> bool:
    """Legality of a finished per-nest schedule, judged from its matrices alone."""
    dists = _distances(deps)
    if not dists:
        return True
    if _kernels.lex_violation(ns.U, dists) >= 0:
        return False
    tv = transform_distances(dists, ns.U)
    if ns.tiling is not None and not band_permutable(tv, *ns.tiling.band):
        return False
    if ns.parallel is not None:
        return parallel_legal(schedule_vectors(ns, dists), ns.parallel)
    return True


# -- skew solvers -----------------------------------------------------------

def _uncarried_before(vecs, p: int) -> list[tuple[int, ...]]:
    return [v for v in vecs if all(c == 0 for c in v[:p])]


def solve_skew_parallel(deps, p: int, q: int, max_f: int) -> int | None:
    """Smallest factor making loop p carry every dependence not carried outside it."""
    vecs = _uncarried_before(_distances(deps), p)
    for f in range(1, max_f + 1):
        if all(v[p] + f * v[q] > 0 for v in vecs):
            return f
    return None


def solve_skew_locality(deps, p: int, q: int, max_f: int) -> int:
    """Factor in [0, max_f] minimizing the summed reuse distance along loop p."""
    vecs = _distances(deps)
    best_f, best = 0, None
    for f in range(0, max_f + 1):
        score = sum(abs(v[p] + f * v[q]) for v in vecs)
        if best is None or score < best:
            best_f, best = f, score
    return best_f


# -- candidate enumeration --------------------------------------------------

def enumerate_candidates(
    nest_index: int,
    nest: LoopNest,
    state: ScheduleState,
    kind: str,
    cfg: TransformSpaceConfig,
    deps,
) -> list[Transformation]:
    ns = state.nests[nest_index]
    if ns.parallel is not None:
        return []
    if kind in UNIMODULAR_KINDS and ns.tiling is not None:
        return []
    d = ns.depth
    dists = _distances(deps)
    out: list[Transformation] = []

    if kind == "interchange":
        out = [Transformation.interchange(nest_index, p, q) for p in range(d) for q in range(p + 1, d)]
    elif kind == "reversal":
        out = [Transformation.reversal(nest_index, p) for p in range(d)]
    elif kind == "skewing":
        tv = transform_distances(dists, ns.U)
        for p in range(d - 1):
            q = p + 1
            if not _uncarried_before(tv, p):
                continue
            factors = []
            fp = solve_skew_parallel(tv, p, q, cfg.max_skew_factor)
            if fp is not None:
                factors.append(fp)
            fl = solve_skew_locality(tv, p, q, cfg.max_skew_factor)
            if fl >= 1 and fl not in factors:
                factors.append(fl)
            out += [Transformation.skewing(nest_index, p, q, f) for f in factors]
    elif kind == "tiling":
        if ns.tiling is None:
            ext = level_extents(ns.U, nest.extents)
            for width in (2, 3):
                for lo in range(d - width + 1):
                    band = list(range(lo, lo + width))
                    per_loop = [[s for s in cfg.tile_choices if s < ext[k]] for k in band]
                    for sizes in itertools.product(*per_loop):
                        out.append(Transformation.tiling(nest_index, band, sizes))
    elif kind == "unrolling":
        if ns.unroll is None:
            inner = level_extents(ns.U, nest.extents)[-1]
            out = [
                Transformation.unrolling(nest_index, ns.loop_depth - 1, u)
                for u in cfg.unroll_choices
                if u <= inner
            ]
    elif kind == "parallelization":
        out = [Transformation.parallelization(nest_index, p) for p in range(ns.loop_depth)]
    else:
        raise MalformedTransformation(f"unknown kind {kind!r}")

    legal = {}
    for t in out:
        if is_legal(state, t, dists):
            legal[str(t)] = t
    return sorted(legal.values(), key=Transformation.sort_key)


def parallelizable(state: ScheduleState, nest_index: int, deps) -> bool:
    """True when some loop of the nest can currently be parallelized."""
    ns = state.nests[nest_index]
    if ns.parallel is not None:
        return False
    vecs = schedule_vectors(ns, _distances(deps))
    return any(parallel_legal(vecs, p) for p in range(ns.loop_depth))


def replay(steps: Sequence[Transformation], depths: Sequence[int] | None = None) -> ScheduleState:
    """Rebuild a state from steps without legality checks.

    Without ``depths`` each nest's depth is inferred from the loop indices the
    steps touch; the resulting signature is the same as with the true depth
    because untouched trailing loops stay at identity.
    """
    if depths is None:
        need: dict[int, int] = {}
        for t in steps:
            P = t.params
            if t.kind in ("interchange", "skewing"):
                m = P["q"]
            elif t.kind == "reversal":
                m = P["p"]
            elif t.kind == "tiling":
                m = max(P["band"])
            else:
                m = 0
            need[t.nest] = max(need.get(t.nest, 0), m + 1)
        n = max(need, default=-1) + 1
        depths = [need.get(i, 1) for i in range(n)]
    state = ScheduleState.initial(depths)
    nests = list(state.nests)
    for t in steps:
        if t.nest >= len(nests):
            raise MalformedTransformation(f"step targets nest {t.nest}; program has {len(nests)}")
        nests[t.nest] = _apply_nest(nests[t.nest], t)
    return ScheduleState(tuple(nests), tuple(steps))


def schedule_signature(steps: Sequence[Transformation]) -> str:
    return signature(replay(steps))


def is_signed_permutation(U: Matrix) -> bool:
    return all(sum(1 for c in row if c) == 1 for row in U)
