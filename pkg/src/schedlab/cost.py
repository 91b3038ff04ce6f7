"""Deterministic analytical machine model standing in for measured runtimes.

Times are doubles evaluated in a fixed operation order, so a given
(program, schedule, machine) triple always yields the same bits on either
kernel backend.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from . import _kernels
from .dependence import compute_dependences
from .ir import ConfigError, LoopNest, Program
from .transforms import NestSchedule, ScheduleState, nest_legal


_ZERO_OK = ("spawn_cost", "skew_overhead")


@dataclass(frozen=True)
class MachineConfig:
    cores: int = 16
    cache_bytes: int = 1_048_576
    line_elems: int = 8
    elem_bytes: int = 8
    miss_penalty: float = 8.0
    loop_overhead: float = 1.0
    spawn_cost: float = 1000.0
    skew_overhead: float = 0.5
    registers: int = 48
    ilp_gain_cap: float = 0.4
    ilp_slope: float = 0.1
    spill_slope: float = 0.25
    tile_discount: float = 0.25

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            # overhead charges may be switched off; everything else is a real quantity
            if not (v >= 0 if f.name in _ZERO_OK else v > 0):
                raise ConfigError(f.name, "must be non-negative" if f.name in _ZERO_OK else "must be positive")
        if not self.ilp_gain_cap < 1:
            raise ConfigError("ilp_gain_cap", "must be < 1")

    def as_tuple(self) -> tuple[float, ...]:
        return (
            float(self.cores), float(self.cache_bytes), float(self.line_elems), float(self.elem_bytes),
            float(self.miss_penalty), float(self.loop_overhead), float(self.spawn_cost),
            float(self.skew_overhead), float(self.registers), float(self.ilp_gain_cap),
            float(self.ilp_slope), float(self.spill_slope), float(self.tile_discount),
        )

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: Mapping) -> "MachineConfig":
        if not isinstance(obj, Mapping):
            raise ConfigError("machine", "config must be a JSON object")
        names = {f.name: f.type for f in fields(cls)}
        for k in obj:
            if k not in names:
                raise ConfigError(k, "unknown machine config key")
        kwargs = {}
        for k, v in obj.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(k, f"expected a number, got {v!r}")
            kwargs[k] = int(v) if names[k] == "int" and float(v).is_integer() else v
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "MachineConfig":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


TERMS = ("work", "memory", "loop_overhead", "spawn", "skew", "spill")


@dataclass(frozen=True)
class CostBreakdown:
    work: float = 0.0
    memory: float = 0.0
    loop_overhead: float = 0.0
    spawn: float = 0.0
    skew: float = 0.0
    spill: float = 0.0

    @property
    def total(self) -> float:
        return self.work + self.memory + self.loop_overhead + self.spawn + self.skew + self.spill

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(*(getattr(self, t) + getattr(other, t) for t in TERMS))


class IllegalScheduleError(ValueError):
    pass


@lru_cache(maxsize=1 << 16)
def nest_breakdown(nest: LoopNest, ns: NestSchedule, mc: MachineConfig) -> CostBreakdown:
    refs = nest.access_instances()
    if ns.tiling is not None:
        lo, hi = ns.tiling.band
        sizes = ns.tiling.sizes
    else:
        lo, hi, sizes = -1, -1, ()
    terms = _kernels.nest_terms(
        ns.U,
        nest.extents,
        lo,
        hi,
        sizes,
        ns.unroll or 1,
        -1 if ns.parallel is None else ns.parallel,
        nest.statement_cost,
        len(refs),
        len(nest.arrays),
        mc.as_tuple(),
    )
    return CostBreakdown(*terms)


def _check(p: Program, s: ScheduleState) -> None:
    if len(s.nests) != len(p.nests):
        raise IllegalScheduleError(f"schedule has {len(s.nests)} nests, program has {len(p.nests)}")
    for i, (nest, ns) in enumerate(zip(p.nests, s.nests)):
        if ns.depth != nest.depth:
            raise IllegalScheduleError(f"nest {i}: schedule depth {ns.depth} != {nest.depth}")
        if not nest_legal(ns, compute_dependences(nest)):
            raise IllegalScheduleError(f"nest {i}: schedule violates dependences")


def evaluate_breakdown(p: Program, s: ScheduleState, mc: MachineConfig | None = None, check: bool = True) -> CostBreakdown:
    mc = mc or MachineConfig()
    if check:
        _check(p, s)
    total = CostBreakdown()
    for nest, ns in zip(p.nests, s.nests):
        total = total + nest_breakdown(nest, ns, mc)
    return total


def evaluate_time(p: Program, s: ScheduleState, mc: MachineConfig | None = None, check: bool = True) -> float:
    return evaluate_breakdown(p, s, mc, check).total


def baseline_time(p: Program, mc: MachineConfig | None = None) -> float:
    return evaluate_time(p, ScheduleState.initial(p), mc, check=False)


def speedup(p: Program, s: ScheduleState, mc: MachineConfig | None = None, check: bool = True) -> float:
    return baseline_time(p, mc) / evaluate_time(p, s, mc, check)
