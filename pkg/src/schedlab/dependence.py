"""Uniform dependence analysis and the legality primitives built on it."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .ir import LoopNest

Vector = tuple[int, ...]


def is_lex_positive(v: Sequence[int]) -> bool:
    for c in v:
        if c != 0:
            return c > 0
    return False


def raw_distances(nest: LoopNest) -> set[Vector]:
    """Distance vectors between every write/read and write/write reference pair.

    A pair whose write-minus-read difference is lexicographically negative is
    an anti-dependence; it is recorded with its sign flipped so that every
    returned vector runs from the earlier iteration to the later one.
    """
    refs = nest.access_instances()
    out: set[Vector] = set()
    for (arr_a, off_a, w_a), (arr_b, off_b, w_b) in itertools.product(refs, refs):
        if arr_a != arr_b or not w_a:
            continue
        if len(off_a) != len(off_b):
            continue
        v = tuple(a - b for a, b in zip(off_a, off_b))
        if not any(v):
            continue
        out.add(v if is_lex_positive(v) else tuple(-c for c in v))
    return out


@dataclass(frozen=True)
class DependenceSet:
    depth: int
    distances: frozenset[Vector]

    def __post_init__(self):
        for v in self.distances:
            if len(v) != self.depth:
                raise ValueError(f"distance {v} has length {len(v)}, depth is {self.depth}")
            if not is_lex_positive(v):
                raise ValueError(f"distance {v} is not lexicographically positive")

    def __iter__(self):
        return iter(self.sorted())

    def __len__(self):
        return len(self.distances)

    def sorted(self) -> list[Vector]:
        return sorted(self.distances)


def compute_dependences(nest: LoopNest) -> DependenceSet:
    return DependenceSet(nest.depth, frozenset(raw_distances(nest)))


def transform_distances(d: DependenceSet | Iterable[Vector], U: Sequence[Sequence[int]]) -> set[Vector]:
    vecs = d.distances if isinstance(d, DependenceSet) else set(d)
    n = len(U)
    if any(len(row) != n for row in U):
        raise ValueError("transformation matrix is not square")
    out = set()
    for v in vecs:
        if len(v) != n:
            raise ValueError(f"dimension mismatch: matrix {n}x{n}, vector {v}")
        out.add(tuple(sum(U[i][j] * v[j] for j in range(n)) for i in range(n)))
    return out


def carried_level(v: Sequence[int]) -> int | None:
    for i, c in enumerate(v):
        if c != 0:
            return i
    return None


def parallel_legal(vecs: Iterable[Sequence[int]], p: int) -> bool:
    return all(carried_level(v) != p for v in vecs)


def band_permutable(vecs: Iterable[Sequence[int]], p: int, q: int) -> bool:
    for v in vecs:
        lvl = carried_level(v)
        if lvl is not None and lvl < p and v[lvl] > 0:
            continue
        if any(v[k] < 0 for k in range(p, q + 1)):
            return False
    return True


def _tile_deltas(c: int, size: int) -> tuple[int, ...]:
    if c % size == 0:
        return (c // size,)
    lo = c // size
    return (lo, lo + 1)


def tiled_distances(vecs: Iterable[Sequence[int]], band: tuple[int, int], sizes: Sequence[int]) -> set[Vector]:
    """Map distances into the post-tiling loop space.

    The tile-loop component of a band member can take either neighbouring
    value of ``c / size`` depending on where the source sits inside its tile,
    so each input vector expands to every combination.
    """
    lo, hi = band
    out: set[Vector] = set()
    for v in vecs:
        choices = [_tile_deltas(v[k], s) for k, s in zip(range(lo, hi + 1), sizes)]
        for tiles in itertools.product(*choices):
            out.add(tuple(v[:lo]) + tiles + tuple(v[lo:]))
    return out


def _schedule_vector(y: Sequence[int], tiling, mins: Sequence[int]) -> tuple[int, ...]:
    if tiling is None:
        return tuple(y)
    lo, hi = tiling.band
    tiles = tuple((y[k] - mins[k]) // s for k, s in zip(range(lo, hi + 1), tiling.sizes))
    return tuple(y[:lo]) + tiles + tuple(y[lo:])


def oracle_legal(nest: LoopNest, sched, cap: int = 5) -> bool:
    """Brute-force legality: execute the clamped iteration space in schedule order.

    ``sched`` is a per-nest schedule exposing ``U``, ``tiling`` and
    ``parallel``. Every pair of iterations touching the same array element
    with at least one write must keep its original order; a parallel loop
    must not separate any such pair that agrees on all enclosing loops.
    A tiled band must keep that order under every tile shape with sizes in
    ``2..cap-1`` as well as its own, since blocking is only safe when it
    does not depend on the size picked.
    """
    U = sched.U
    d = nest.depth
    if len(U) != d:
        raise ValueError(f"schedule dimension {len(U)} != nest depth {d}")
    ext = [min(e, cap) for e in nest.extents]
    points = list(itertools.product(*(range(e) for e in ext)))
    image = {x: tuple(sum(U[i][j] * x[j] for j in range(d)) for i in range(d)) for x in points}
    mins = [min(y[i] for y in image.values()) for i in range(d)]
    tiling = sched.tiling
    shapes = [tiling]
    if tiling is not None:
        width = tiling.band[1] - tiling.band[0] + 1
        shapes += [
            _Shape(tiling.band, sizes)
            for sizes in itertools.product(range(2, cap), repeat=width)
            if sizes != tuple(tiling.sizes)
        ]
    pairs = list(_conflicting_pairs(nest, points))
    par = sched.parallel
    for k, shape in enumerate(shapes):
        when = {x: _schedule_vector(y, shape, mins) for x, y in image.items()}
        for src, dst in pairs:
            ts, td = when[src], when[dst]
            if not ts < td:
                return False
            # parallel semantics only for the schedule's own tile sizes
            if k == 0 and par is not None and ts[:par] == td[:par] and ts[par] != td[par]:
                return False
    return True


@dataclass(frozen=True)
class _Shape:
    band: tuple[int, int]
    sizes: tuple[int, ...]


def _conflicting_pairs(nest: LoopNest, points):
    """(earlier, later) iteration pairs touching one element, at least one writing."""
    inside = set(points)
    refs = nest.access_instances()
    seen = set()
    for (arr_a, off_a, w_a), (arr_b, off_b, w_b) in itertools.product(refs, refs):
        if arr_a != arr_b or not (w_a or w_b):
            continue
        # iteration x via ref a touches the element iteration y touches via ref b
        for x in points:
            y = tuple(xi + oa - ob for xi, oa, ob in zip(x, off_a, off_b))
            if y == x or y not in inside:
                continue
            pair = (x, y) if x < y else (y, x)
            if pair not in seen:
                seen.add(pair)
                yield pair
