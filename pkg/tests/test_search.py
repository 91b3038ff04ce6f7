from __future__ import annotations

import pytest

from schedlab.dependence import compute_dependences
from schedlab.ir import AccessPattern, ConfigError, GeneratorConfig, LoopNest, generate_corpus, generate_program
from schedlab.search import (
    RuleSet,
    SearchConfig,
    SearchSpaceTooLarge,
    beam_search,
    exhaustive_search,
    filter_candidates,
    random_walks,
    relative_level,
)
from schedlab.transforms import ScheduleState, Transformation as T, TransformSpaceConfig, enumerate_candidates

from conftest import make_nest, make_program


def _elementwise(extents):
    d = len(extents)
    return LoopNest(d, tuple(extents), "elementwise", 2, (AccessPattern("A", ((0,) * d,), True), AccessPattern("B", ((0,) * d,))))


@pytest.mark.parametrize("level, depth, expected", [(0, 4, 0.0), (3, 4, 1.0), (1, 3, 0.5), (0, 1, 0.0)])
def test_relative_level(level, depth, expected):
    assert relative_level(level, depth) == expected


def test_depth_cutoff_keeps_only_outer_loop():
    nest = _elementwise((16, 16, 16, 16))
    s = ScheduleState.initial([4])
    deps = [compute_dependences(nest)]
    cands = enumerate_candidates(0, nest, s, "parallelization", TransformSpaceConfig(), deps[0])
    assert len(cands) == 4
    kept = filter_candidates(cands, s, RuleSet(parallel_depth_cutoff=0.3), deps)
    assert kept == [T.parallelization(0, 0)]


def test_cutoff_is_inclusive():
    s = ScheduleState.initial([2])
    cands = [T.parallelization(0, 0), T.parallelization(0, 1)]
    deps = [compute_dependences(_elementwise((8, 8)))]
    assert filter_candidates(cands, s, RuleSet(parallel_depth_cutoff=1.0), deps) == cands


def test_skew_gate_drops_skews_when_parallel_is_legal():
    s = ScheduleState.initial([2])
    cands = [T.skewing(0, 0, 1, 1), T.parallelization(0, 0)]
    ew = [compute_dependences(_elementwise((8, 8)))]
    assert filter_candidates(cands, s, RuleSet(skew_gate=True), ew) == [T.parallelization(0, 0)]
    # wavefront stencil: no loop is parallel, so the skew stays
    st = [compute_dependences(make_nest((8, 8), [(-1, 0), (0, -1)]))]
    assert filter_candidates(cands, s, RuleSet(skew_gate=True), st) == cands


def test_unroll_and_length_rules():
    s = ScheduleState.initial([2])
    deps = [compute_dependences(_elementwise((64, 64)))]
    cands = [T.unrolling(0, 1, u) for u in (4, 8, 16)]
    assert filter_candidates(cands, s, RuleSet(fixed_unroll=(16,)), deps) == [T.unrolling(0, 1, 16)]
    assert filter_candidates(cands, s, RuleSet(max_schedule_len=0), deps) == []
    assert filter_candidates(cands, s, RuleSet(), deps) == cands


def test_config_validation():
    with pytest.raises(ConfigError):
        SearchConfig(mode="simulated_annealing")
    with pytest.raises(ConfigError):
        SearchConfig(beam_k=0)
    with pytest.raises(ConfigError):
        SearchConfig(fixed_order=("parallelization", "tiling"))
    with pytest.raises(ConfigError):
        RuleSet(parallel_depth_cutoff=1.5)
    with pytest.raises(ConfigError):
        RuleSet.from_json({"cutoff": 0.3})
    assert RuleSet.from_json(RuleSet.recommended().to_json()) == RuleSet.recommended()
    assert SearchConfig.from_json(SearchConfig().to_json()) == SearchConfig()


def test_elementwise_best_schedule_parallelizes_outer_loop():
    p = make_program(_elementwise((64, 64)))
    best_state, _ = beam_search(p, SearchConfig(beam_k=8)).best[0]
    assert T.parallelization(0, 0) in best_state.steps
    ex = exhaustive_search(p, SearchConfig())
    assert T.parallelization(0, 0) in ex.best[0][0].steps


def test_max_len_zero_is_empty_schedule():
    p = generate_program(3)
    res = exhaustive_search(p, SearchConfig(mode="exhaustive", max_len=0))
    assert res.evaluations == 1
    assert res.best[0][0].steps == () and res.best_speedup == 1.0


def test_depth2_stencil_exhaustive_matches_wide_beam():
    p = make_program(make_nest((64, 64), [(-1, 0), (0, -1)], cost=2))
    ex = exhaustive_search(p, SearchConfig(mode="exhaustive", max_len=2))
    beam = beam_search(p, SearchConfig(mode="arbitrary_order_beam", beam_k=ex.evaluations, max_len=2))
    assert beam.best_speedup == ex.best_speedup


def test_wide_beam_matches_exhaustive_small_corpus():
    cfg = GeneratorConfig(max_nests=1, max_depth=3)
    for p in generate_corpus(21, 6, cfg):
        for mode, exmode, max_len in (("fixed_order_beam", "fixed_order_beam", 6), ("arbitrary_order_beam", "exhaustive", 3)):
            ex = exhaustive_search(p, SearchConfig(mode=exmode, max_len=max_len))
            beam = beam_search(p, SearchConfig(mode=mode, beam_k=ex.evaluations, max_len=max_len))
            assert beam.best_speedup == ex.best_speedup


def test_guard_refuses_large_space():
    p = generate_program(next(s for s in range(100) if 4 in generate_program(s).depths))
    with pytest.raises(SearchSpaceTooLarge) as exc:
        exhaustive_search(p, SearchConfig(mode="exhaustive", max_len=5), guard=2000)
    assert exc.value.count > 2000


def test_beam_evaluates_each_signature_once():
    for p in generate_corpus(8, 10):
        res = beam_search(p, SearchConfig(mode="arbitrary_order_beam", beam_k=4, max_len=4))
        assert res.evaluations == res.explored_signatures == len(res.points)


def test_rules_never_add_evaluations():
    for p in generate_corpus(5, 15):
        base = beam_search(p, SearchConfig())
        ruled = beam_search(p, SearchConfig(), RuleSet.recommended())
        assert ruled.evaluations <= base.evaluations


def test_random_walks_deterministic():
    p = generate_program(11)
    sc = SearchConfig(mode="random_walk", walks_per_program=5, walk_seed=3)
    a = random_walks(p, sc)
    assert a == random_walks(p, sc)
    assert a != random_walks(p, SearchConfig(mode="random_walk", walks_per_program=5, walk_seed=4))
    assert all(pt.program_id == p.id for pt in a)
