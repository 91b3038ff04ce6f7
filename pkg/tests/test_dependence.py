from __future__ import annotations

import pytest

from schedlab.dependence import (
    DependenceSet,
    band_permutable,
    compute_dependences,
    is_lex_positive,
    oracle_legal,
    parallel_legal,
    tiled_distances,
    transform_distances,
)
from schedlab.ir import AccessPattern, LoopNest
from schedlab.transforms import NestSchedule, Tiling, identity, nest_legal

from conftest import make_nest, random_small_pairs


def test_elementwise_has_no_dependences():
    nest = LoopNest(2, (8, 8), "elementwise", 1, (AccessPattern("A", ((0, 0),), True), AccessPattern("B", ((0, 0),))))
    assert len(compute_dependences(nest)) == 0


def test_stencil_distances():
    nest = make_nest((8, 8), [(-1, 0), (0, -1)])
    assert compute_dependences(nest).sorted() == [(0, 1), (1, 0)]


def test_reduction_distance():
    nest = make_nest((8, 8), [(0, -1)], pattern="reduction")
    assert compute_dependences(nest).sorted() == [(0, 1)]


def test_anti_dependence_is_flipped():
    # reading A[i+1] before it is overwritten at the next iteration
    nest = make_nest((8,), [(1,)])
    assert compute_dependences(nest).sorted() == [(1,)]


def test_dependence_set_rejects_non_positive():
    with pytest.raises(ValueError):
        DependenceSet(2, frozenset({(0, -1)}))


def test_transform_distances():
    assert transform_distances({(1, 2)}, identity(2)) == {(1, 2)}
    assert transform_distances({(1, -1)}, ((0, 1), (1, 0))) == {(-1, 1)}
    assert transform_distances({(0, 1)}, ((1, 1), (0, 1))) == {(1, 1)}
    with pytest.raises(ValueError):
        transform_distances({(1, 0, 0)}, identity(2))


@pytest.mark.parametrize("v, expected", [((0, 1), True), ((-1, 5), False), ((0, 0), False)])
def test_lex_positive(v, expected):
    assert is_lex_positive(v) is expected


def test_parallel_legal():
    assert parallel_legal({(0, 1)}, 0)
    assert not parallel_legal({(0, 1)}, 1)
    assert parallel_legal({(1, -1)}, 1)


def test_band_permutable():
    assert band_permutable({(1, 0), (0, 1)}, 0, 1)
    assert not band_permutable({(1, -1)}, 0, 1)
    assert band_permutable(set(), 0, 1)
    # carried outside the band: anything goes inside it
    assert band_permutable({(1, -1, 2)}, 1, 2)


def test_tiled_distances_expand_non_divisible():
    assert tiled_distances({(1, 0)}, (0, 1), (4, 4)) == {(0, 0, 1, 0), (1, 0, 1, 0)}
    assert tiled_distances({(4, 0)}, (0, 1), (4, 4)) == {(1, 0, 4, 0)}


def test_oracle_identity_legal():
    nest = make_nest((4, 4), [(-1, 0), (0, -1)])
    assert oracle_legal(nest, NestSchedule(identity(2)))


def test_oracle_reversal_of_carried_loop_illegal():
    nest = make_nest((4, 4), [(0, -1)], pattern="reduction")
    ns = NestSchedule(((1, 0), (0, -1)))
    assert not oracle_legal(nest, ns)
    assert not nest_legal(ns, compute_dependences(nest))


def test_oracle_parallel_and_tiling():
    nest = make_nest((5, 5), [(-1, 0)])
    deps = compute_dependences(nest)
    for par, ok in ((0, False), (1, True)):
        ns = NestSchedule(identity(2), parallel=par)
        assert oracle_legal(nest, ns) is ok is nest_legal(ns, deps)
    skewed = make_nest((5, 5), [(-1, 1)])
    ns = NestSchedule(identity(2), tiling=Tiling((0, 1), (2, 2)))
    assert not oracle_legal(skewed, ns)
    assert not nest_legal(ns, compute_dependences(skewed))


def test_matrix_legality_matches_oracle():
    pairs = random_small_pairs(1000, seed=3)
    mismatches = [(n, s.steps) for n, s in pairs if nest_legal(s.nests[0], compute_dependences(n)) != oracle_legal(n, s.nests[0])]
    assert mismatches == []
    # the sample must exercise both outcomes
    assert 0 < sum(nest_legal(s.nests[0], compute_dependences(n)) for n, s in pairs) < len(pairs)
