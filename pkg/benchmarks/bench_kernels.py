"""Time the compiled kernels against the pure-Python fallback.

Both backends are fed identical argument tuples drawn from random legal
schedules, and their outputs are checked for bitwise equality first.
"""
from __future__ import annotations

import argparse
import random
import sys
import timeit

from schedlab.cost import MachineConfig
from schedlab.dependence import compute_dependences
from schedlab.ir import generate_program
from schedlab.transforms import KINDS, ScheduleState, TransformSpaceConfig, apply, enumerate_candidates
from schedlab._kernels import _pure

try:
    from schedlab._kernels import _fast
except ImportError:
    _fast = None


def sample_args(n: int, seed: int):
    rng = random.Random(seed)
    space = TransformSpaceConfig()
    mc = MachineConfig().as_tuple()
    terms, lex = [], []
    while len(terms) < n:
        p = generate_program(rng.randrange(1 << 30))
        s = ScheduleState.initial(p)
        deps = [compute_dependences(x) for x in p.nests]
        for _ in range(rng.randint(0, 5)):
            i = rng.randrange(len(p.nests))
            cands = enumerate_candidates(i, p.nests[i], s, rng.choice(KINDS), space, deps[i])
            if cands:
                s = apply(s, rng.choice(cands), deps[i])
        for nest, ns, d in zip(p.nests, s.nests, deps):
            refs = nest.access_instances()
            lo, hi, sizes = (ns.tiling.band + (ns.tiling.sizes,)) if ns.tiling else (-1, -1, ())
            terms.append((
                ns.U, nest.extents, lo, hi, sizes, ns.unroll or 1,
                -1 if ns.parallel is None else ns.parallel,
                nest.statement_cost, len(refs), len(nest.arrays), mc,
            ))
            lex.append((ns.U, d.sorted()))
    return terms[:n], lex[:n]


def bench(mod, terms, lex, repeat: int) -> tuple[float, float]:
    t_terms = min(timeit.repeat(lambda: [mod.nest_terms(*a) for a in terms], number=1, repeat=repeat))
    t_lex = min(timeit.repeat(lambda: [mod.lex_violation(*a) for a in lex], number=1, repeat=repeat))
    return t_terms, t_lex


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--calls", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _fast is None:
        print("compiled backend not built; only the pure backend is available", file=sys.stderr)
        return 1
    terms, lex = sample_args(args.calls, args.seed)
    for a in terms:
        assert _fast.nest_terms(*a) == _pure.nest_terms(*a), a
    for a in lex:
        assert _fast.lex_violation(*a) == _pure.lex_violation(*a), a

    pure = bench(_pure, terms, lex, args.repeat)
    fast = bench(_fast, terms, lex, args.repeat)
    print(f"{'kernel':<14}{'pure (ms)':>12}{'compiled (ms)':>16}{'speedup':>10}")
    for name, tp, tf in zip(("nest_terms", "lex_violation"), pure, fast):
        print(f"{name:<14}{tp * 1e3:>12.2f}{tf * 1e3:>16.2f}{tp / tf:>9.1f}x")
    print(f"{len(terms)} calls per kernel, best of {args.repeat}; outputs bitwise identical")
    return 0


if __name__ == "__main__":
    sys.exit(main())
