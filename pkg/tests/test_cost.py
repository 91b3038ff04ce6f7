from __future__ import annotations

import random

import pytest

from schedlab import _kernels
from schedlab._kernels import _pure
from schedlab.cost import (
    TERMS,
    CostBreakdown,
    IllegalScheduleError,
    MachineConfig,
    evaluate_breakdown,
    evaluate_time,
    speedup,
)
from schedlab.dependence import compute_dependences
from schedlab.ir import AccessPattern, ConfigError, LoopNest, generate_program
from schedlab.transforms import KINDS, ScheduleState, Transformation as T, TransformSpaceConfig, apply, enumerate_candidates

from conftest import make_program


def _write_only(extents, cost):
    d = len(extents)
    return LoopNest(d, tuple(extents), "elementwise", cost, (AccessPattern("A", ((0,) * d,), True),))


def test_golden_single_loop():
    # 100 iterations x (2 work + 1 miss-rate-weighted access at 8/8 + 1 loop overhead)
    p = make_program(_write_only((100,), 2))
    b = evaluate_breakdown(p, ScheduleState.initial(p))
    assert (b.work, b.memory, b.loop_overhead, b.spawn, b.skew, b.spill) == (200.0, 100.0, 100.0, 0.0, 0.0, 0.0)
    assert b.total == 400.0


def test_identical_inputs_identical_times():
    p = generate_program(5)
    s = ScheduleState.initial(p)
    assert evaluate_time(p, s) == evaluate_time(p, s)
    assert speedup(p, s) == 1.0


def test_parallel_divides_by_cores():
    p = make_program(_write_only((256,), 2))
    mc = MachineConfig(spawn_cost=0)
    seq = evaluate_time(p, ScheduleState.initial(p), mc)
    par = evaluate_time(p, apply(ScheduleState.initial(p), T.parallelization(0, 0)), mc)
    assert par == seq / 16


def test_spawn_term_and_empty_schedule_terms():
    p = make_program(_write_only((64, 32), 1))
    s0 = ScheduleState.initial(p)
    b = evaluate_breakdown(p, s0)
    assert b.spawn == b.skew == b.spill == 0.0
    inner = evaluate_breakdown(p, apply(s0, T.parallelization(0, 1)))
    assert inner.spawn == MachineConfig().spawn_cost * 64  # entered once per outer iteration
    outer = evaluate_breakdown(p, apply(s0, T.parallelization(0, 0)))
    assert outer.spawn == MachineConfig().spawn_cost


def test_unroll_16_beats_4_when_overhead_dominates():
    p = make_program(_write_only((8, 256), 1))
    s0 = ScheduleState.initial(p)
    u4 = speedup(p, apply(s0, T.unrolling(0, 1, 4)))
    u16 = speedup(p, apply(s0, T.unrolling(0, 1, 16)))
    assert u16 > u4 > 1.0


def test_breakdown_sums_to_total():
    for seed in range(20):
        p = generate_program(seed)
        b = evaluate_breakdown(p, ScheduleState.initial(p))
        assert b.total == sum(getattr(b, t) for t in TERMS)
        assert b.total > 0


def test_illegal_schedule_rejected():
    nest = LoopNest(2, (8, 8), "reduction", 1, (AccessPattern("A", ((0, 0),), True), AccessPattern("A", ((0, -1),))))
    p = make_program(nest)
    bad = ScheduleState.initial(p)
    bad = apply(bad, T.reversal(0, 1))
    with pytest.raises(IllegalScheduleError):
        evaluate_time(p, bad)
    with pytest.raises(IllegalScheduleError):
        evaluate_time(p, ScheduleState.initial([2, 2]))


def test_machine_config_validation():
    with pytest.raises(ConfigError) as exc:
        MachineConfig(cores=0)
    assert exc.value.field == "cores"
    with pytest.raises(ConfigError):
        MachineConfig(ilp_gain_cap=1.0)
    with pytest.raises(ConfigError):
        MachineConfig.from_json({"cpus": 4})
    assert MachineConfig.from_json({"registers": 32}).registers == 32
    assert MachineConfig.from_json(MachineConfig().to_json()) == MachineConfig()


def test_more_spawn_cost_never_speeds_up():
    p = make_program(_write_only((64, 64), 1))
    s = apply(ScheduleState.initial(p), T.parallelization(0, 1))
    times = [evaluate_time(p, s, MachineConfig(spawn_cost=c)) for c in (0, 10, 100, 1000)]
    assert times == sorted(times)


def _random_states(n, seed):
    rng = random.Random(seed)
    space = TransformSpaceConfig()
    out = []
    for _ in range(n):
        p = generate_program(rng.randrange(1 << 30))
        s = ScheduleState.initial(p)
        deps = [compute_dependences(x) for x in p.nests]
        for _ in range(rng.randint(0, 5)):
            i = rng.randrange(len(p.nests))
            cands = enumerate_candidates(i, p.nests[i], s, rng.choice(KINDS), space, deps[i])
            if cands:
                s = apply(s, rng.choice(cands), deps[i])
        out.append((p, s))
    return out


@pytest.mark.skipif(_kernels.BACKEND != "compiled", reason="compiled kernels not built")
def test_backend_parity_bitwise():
    from schedlab._kernels import _fast

    mc = MachineConfig().as_tuple()
    for p, s in _random_states(300, seed=9):
        for nest, ns in zip(p.nests, s.nests):
            refs = nest.access_instances()
            lo, hi, sizes = (ns.tiling.band + (ns.tiling.sizes,)) if ns.tiling else (-1, -1, ())
            args = (
                ns.U, nest.extents, lo, hi, sizes, ns.unroll or 1,
                -1 if ns.parallel is None else ns.parallel,
                nest.statement_cost, len(refs), len(nest.arrays), mc,
            )
            assert _fast.nest_terms(*args) == _pure.nest_terms(*args)
            assert _fast.lex_violation(ns.U, compute_dependences(nest).sorted()) == _pure.lex_violation(
                ns.U, compute_dependences(nest).sorted()
            )


def test_breakdown_addition():
    a = CostBreakdown(1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    assert (a + a).total == 42.0
