"""Datapoint persistence (JSON Lines) and the corpus exploration driver."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .transforms import MalformedTransformation, ScheduleState, Transformation, schedule_signature

FIELDS = ("program_id", "schedule", "speedup", "legal")


class DatasetFormatError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class DataPoint:
    program_id: str
    schedule: tuple[Transformation, ...]
    speedup: float
    legal: bool = True

    @classmethod
    def from_state(cls, program_id: str, state: ScheduleState, speedup: float) -> "DataPoint":
        return cls(program_id, tuple(state.steps), speedup, True)

    @property
    def kinds(self) -> list[str]:
        return [t.kind for t in self.schedule]

    def to_json(self) -> dict:
        return {
            "program_id": self.program_id,
            "schedule": [t.to_json() for t in self.schedule],
            "speedup": self.speedup,
            "legal": self.legal,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    @classmethod
    def from_json(cls, obj) -> "DataPoint":
        if not isinstance(obj, dict) or set(obj) != set(FIELDS):
            got = sorted(obj) if isinstance(obj, dict) else type(obj).__name__
            raise ValueError(f"datapoint fields must be {list(FIELDS)}, got {got}")
        speed = obj["speedup"]
        if isinstance(speed, bool) or not isinstance(speed, (int, float)) or not speed > 0:
            raise ValueError(f"speedup must be a positive number, got {speed!r}")
        if not isinstance(obj["legal"], bool):
            raise ValueError("legal must be a boolean")
        if not isinstance(obj["schedule"], list):
            raise ValueError("schedule must be a list of steps")
        steps = tuple(Transformation.from_json(s) for s in obj["schedule"])
        return cls(str(obj["program_id"]), steps, float(speed), obj["legal"])


def atomic_write_lines(path, lines: Iterable[str]) -> int:
    """Write lines to a sibling temp file, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    n = 0
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")
                n += 1
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return n


def write_datapoints(points: Iterable[DataPoint], path) -> int:
    return atomic_write_lines(path, (p.dumps() for p in points))


def read_datapoints(path) -> list[DataPoint]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(DataPoint.from_json(json.loads(line)))
            except (ValueError, MalformedTransformation, KeyError, TypeError) as exc:
                raise DatasetFormatError(path, lineno, str(exc)) from exc
    return out


def dedupe(points: Iterable[DataPoint]) -> list[DataPoint]:
    seen = set()
    out = []
    for p in points:
        key = (p.program_id, schedule_signature(p.schedule))
        if key in seen:
            continue
        seen.add(key)
        out.append(p)
    return out


@dataclass(frozen=True)
class ExplorationSummary:
    programs: int
    datapoints: int
    evaluations: int

    def to_json(self) -> dict:
        return {"programs": self.programs, "datapoints": self.datapoints, "evaluations": self.evaluations}


def explore_program(program, sc, rules=None, mc=None, space=None) -> tuple[list[DataPoint], int]:
    """Datapoints for one program under the configured explorer, plus the
    number of cost-model evaluations spent."""
    from . import search

    if sc.mode == "random_walk":
        pts = dedupe(search.random_walks(program, sc, mc, rules, space))
        return pts, len(pts)
    if sc.mode == "exhaustive":
        res = search.exhaustive_search(program, sc, mc, rules, space)
    else:
        res = search.beam_search(program, sc, rules, mc, space)
    pts = [DataPoint.from_state(program.id, s, v) for s, v in res.points]
    return pts, res.evaluations


def run_exploration(corpus: Sequence, sc, rules=None, mc=None, out_path=None, space=None) -> ExplorationSummary:
    if not corpus:
        raise ValueError("corpus is empty")
    points: list[DataPoint] = []
    evaluations = 0
    for program in corpus:
        pts, n_eval = explore_program(program, sc, rules, mc, space)
        points += pts
        evaluations += n_eval
    if out_path is not None:
        write_datapoints(points, out_path)
    return ExplorationSummary(len(corpus), len(points), evaluations)
