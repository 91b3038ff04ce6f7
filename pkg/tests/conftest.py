from __future__ import annotations

import pytest

from schedlab.dataset import DataPoint
from schedlab.ir import AccessPattern, LoopNest, Program, program_id
from schedlab.transforms import Transformation as T


def make_nest(extents, reads=(), pattern="stencil", cost=1, out="A"):
    """Nest writing ``out[x]`` and reading ``out[x + o]`` for each offset in ``reads``."""
    d = len(extents)
    acc = [AccessPattern(out, ((0,) * d,), True)]
    if reads:
        acc.append(AccessPattern(out, tuple(tuple(r) for r in reads), False))
    return LoopNest(d, tuple(extents), pattern, cost, tuple(acc))


def make_program(*nests, seed=0):
    return Program(program_id(seed, [n.depth for n in nests]), seed, tuple(nests))


@pytest.fixture
def transition_points():
    """The three-schedule fixture used by the transition and derived-order oracles."""
    pid = program_id(1, [2])
    s1 = (T.interchange(0, 0, 1), T.parallelization(0, 0))
    s2 = (T.skewing(0, 0, 1, 1), T.interchange(0, 0, 1), T.parallelization(0, 0))
    s3 = (T.skewing(0, 0, 1, 1), T.parallelization(0, 0))
    return [DataPoint(pid, s1, 4.0), DataPoint(pid, s2, 6.0), DataPoint(pid, s3, 2.0)]


SMALL_GEN = dict(max_nests=1, max_depth=3, extent_choices=(2, 3, 4, 5))


def random_small_step(rng, state, nest):
    """A well-formed (not necessarily legal) step on nest 0, or None.

    Tile sizes stay below the clamped level extent, as the candidate
    enumerator requires.
    """
    from schedlab.transforms import level_extents

    ns = state.nests[0]
    d = nest.depth
    kind = rng.choice(["interchange", "reversal", "skewing", "tiling", "unrolling", "parallelization"])
    if kind == "interchange" and d >= 2:
        p, q = sorted(rng.sample(range(d), 2))
        return T.interchange(0, p, q)
    if kind == "reversal":
        return T.reversal(0, rng.randrange(d))
    if kind == "skewing" and d >= 2:
        p = rng.randrange(d - 1)
        return T.skewing(0, p, p + 1, rng.randint(1, 2))
    if kind == "tiling" and d >= 2:
        w = rng.choice([2, 3]) if d == 3 else 2
        lo = rng.randrange(d - w + 1)
        le = [min(e, 5) for e in level_extents(ns.U, nest.extents)]
        if any(le[k] < 3 for k in range(lo, lo + w)):
            return None
        return T.tiling(0, list(range(lo, lo + w)), [rng.randint(2, le[k] - 1) for k in range(lo, lo + w)])
    if kind == "unrolling":
        return T.unrolling(0, ns.loop_depth - 1, 2)
    if kind == "parallelization":
        return T.parallelization(0, rng.randrange(ns.loop_depth))
    return None


def random_small_pairs(n, seed):
    """``n`` seeded (nest, per-nest schedule) pairs with depth <= 3, extents <= 5
    and at most 3 steps."""
    import random

    from schedlab.ir import GeneratorConfig, generate_program
    from schedlab.transforms import MalformedTransformation, ScheduleState, apply

    rng = random.Random(seed)
    cfg = GeneratorConfig(**SMALL_GEN)
    out = []
    while len(out) < n:
        p = generate_program(rng.randrange(1 << 30), cfg)
        nest = p.nests[0]
        st = ScheduleState.initial(p)
        for _ in range(rng.randint(1, 3)):
            t = random_small_step(rng, st, nest)
            if t is None:
                continue
            try:
                st = apply(st, t)
            except MalformedTransformation:
                pass
        out.append((nest, st))
    return out
