from __future__ import annotations

import json

import pytest

from schedlab.dataset import (
    DataPoint,
    DatasetFormatError,
    dedupe,
    read_datapoints,
    run_exploration,
    write_datapoints,
)
from schedlab.dependence import compute_dependences
from schedlab.ir import generate_corpus, generate_program
from schedlab.search import SearchConfig
from schedlab.transforms import KINDS, ScheduleState, Transformation as T, TransformSpaceConfig, apply, enumerate_candidates, signature


def _points():
    return [
        DataPoint("p1-d2", (), 1.0),
        DataPoint("p1-d2", (T.interchange(0, 0, 1), T.parallelization(0, 0)), 3.25),
        DataPoint("p2-d3", (T.tiling(0, [0, 1], [32, 64]), T.unrolling(0, 3, 16)), 0.5),
    ]


def test_round_trip(tmp_path):
    path = tmp_path / "d.jsonl"
    write_datapoints(_points(), path)
    assert read_datapoints(path) == _points()
    first = path.read_bytes()
    write_datapoints(read_datapoints(path), path)
    assert path.read_bytes() == first


def test_unknown_kind_reports_line(tmp_path):
    path = tmp_path / "d.jsonl"
    lines = [p.dumps() for p in _points()]
    lines.insert(1, json.dumps({"program_id": "x", "schedule": [{"kind": "fusion", "nest": 0, "params": {}}], "speedup": 1.0, "legal": True}))
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError) as exc:
        read_datapoints(path)
    assert exc.value.lineno == 2


@pytest.mark.parametrize(
    "record",
    [
        {"program_id": "x", "schedule": [], "speedup": 0.0, "legal": True},
        {"program_id": "x", "schedule": [], "speedup": 1.0},
        {"program_id": "x", "schedule": {}, "speedup": 1.0, "legal": True},
        {"program_id": "x", "schedule": [], "speedup": 1.0, "legal": True, "extra": 1},
    ],
)
def test_schema_violations(tmp_path, record):
    path = tmp_path / "d.jsonl"
    path.write_text(json.dumps(record) + "\n")
    with pytest.raises(DatasetFormatError):
        read_datapoints(path)


def test_empty_file(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text("")
    assert read_datapoints(path) == []


def test_dedupe():
    pts = _points()
    assert dedupe(pts + pts[:1]) == pts
    assert dedupe(pts) == pts
    assert dedupe([]) == []
    # two step orders with the same effect collapse to one
    twice = DataPoint("p1-d2", (T.interchange(0, 0, 1), T.interchange(0, 0, 1)), 1.0)
    assert dedupe([pts[0], twice]) == [pts[0]]


def test_single_step_exhaustive_count():
    p = generate_program(4)
    state = ScheduleState.initial(p)
    space = TransformSpaceConfig()
    sigs = set()
    for i, nest in enumerate(p.nests):
        deps = compute_dependences(nest)
        for kind in KINDS:
            for t in enumerate_candidates(i, nest, state, kind, space, deps):
                sigs.add(signature(apply(state, t, deps)))
    summary = run_exploration([p], SearchConfig(mode="exhaustive", max_len=1))
    assert summary.datapoints == len(sigs) + 1


def test_exploration_bytes_deterministic(tmp_path):
    corpus = generate_corpus(2, 4)
    sc = SearchConfig(beam_k=3)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run_exploration(corpus, sc, out_path=a)
    run_exploration(corpus, sc, out_path=b)
    assert a.read_bytes() == b.read_bytes()


def test_random_walk_summary(tmp_path):
    corpus = generate_corpus(3, 10)
    summary = run_exploration(corpus, SearchConfig(mode="random_walk", walks_per_program=5), out_path=tmp_path / "w.jsonl")
    assert summary.programs == 10
    assert summary.datapoints == len(read_datapoints(tmp_path / "w.jsonl"))
