"""Agent-based model of ecosystem participation with an anchor sponsor.

Each period runs three phases in a fixed order:

1. referral: every developer active at the start of the period refers one
   candidate with probability ``referral_rate``; a candidate with intrinsic
   interest ``z ~ N(0, 1)`` joins iff ``z + bonus > 0`` (bonus only while
   the sponsor is active). Joiners start with tenure 0.
2. update: every developer who was active at the start of the period gains
   one period of tenure and exits iff
   ``intrinsic + investment_rate * tenure + bonus < 0``.
3. attrition: every remaining developer, joiners included, leaves with
   probability ``natural_attrition``.

Agents are stored as parallel arrays in insertion order, and each run
consumes one random stream in that order, so a run is reproducible from
``(params, seed)``.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, fields
from typing import IO, Iterable

import numpy as np


@dataclass(frozen=True)
class AbmParams:
    time_periods: int = 100
    sponsor_exit_period: int = 50
    initial_developers: int = 5000
    referral_rate: float = 0.03
    sponsorship_bonus: float = 1.0
    investment_rate: float = 0.05
    natural_attrition: float = 0.01
    runs: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("referral_rate", "natural_attrition"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        for name in ("time_periods", "sponsor_exit_period", "initial_developers", "runs"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.sponsor_exit_period > self.time_periods:
            raise ValueError("sponsor_exit_period cannot exceed time_periods")

    def sponsor_active(self, period: int) -> bool:
        return period < self.sponsor_exit_period

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "AbmParams":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.strip().replace("-", "_")
            if key not in types:
                raise ValueError(f"unknown ABM parameter {key!r}")
            kwargs[key] = int(raw) if types[key] == "int" else float(raw)
        return cls(**kwargs)

    @classmethod
    def from_config(cls, text: str) -> "AbmParams":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
        return cls.from_mapping(values)


@dataclass
class DeveloperAgent:
    intrinsic: float
    tenure: int = 0
    active: bool = True


def effective_interest(agent: DeveloperAgent, sponsor_active: bool, params: AbmParams) -> float:
    bonus = params.sponsorship_bonus if sponsor_active else 0.0
    return agent.intrinsic + params.investment_rate * agent.tenure + bonus


@dataclass
class AbmState:
    """Active developers only, as parallel arrays in insertion order."""

    intrinsic: np.ndarray
    tenure: np.ndarray

    @classmethod
    def initial(cls, params: AbmParams, rng: np.random.Generator) -> "AbmState":
        n = params.initial_developers
        return cls(intrinsic=rng.standard_normal(n), tenure=np.zeros(n, dtype=np.int64))

    @property
    def active_count(self) -> int:
        return int(self.intrinsic.size)

    def agents(self) -> list[DeveloperAgent]:
        return [DeveloperAgent(float(z), int(k)) for z, k in zip(self.intrinsic, self.tenure)]


@dataclass(frozen=True)
class StepCounts:
    new_joins: int
    exits: int
    active_count: int
    candidates: int
    threshold_exits: int


def step(
    state: AbmState, period: int, params: AbmParams, rng: np.random.Generator
) -> tuple[AbmState, StepCounts]:
    active = params.sponsor_active(period)
    bonus = params.sponsorship_bonus if active else 0.0
    n0 = state.active_count

    refers = rng.random(n0) < params.referral_rate
    n_candidates = int(refers.sum())
    candidate_interest = rng.standard_normal(n_candidates)
    joiners = candidate_interest[candidate_interest + bonus > 0]

    tenure = state.tenure + 1
    survives = state.intrinsic + params.investment_rate * tenure + bonus >= 0
    threshold_exits = int(n0 - survives.sum())

    intrinsic = np.concatenate([state.intrinsic[survives], joiners])
    tenure = np.concatenate([tenure[survives], np.zeros(joiners.size, dtype=np.int64)])

    stays = rng.random(intrinsic.size) >= params.natural_attrition
    new_state = AbmState(intrinsic=intrinsic[stays], tenure=tenure[stays])
    exits = threshold_exits + int(stays.size - stays.sum())
    return new_state, StepCounts(
        new_joins=int(joiners.size),
        exits=exits,
        active_count=new_state.active_count,
        candidates=n_candidates,
        threshold_exits=threshold_exits,
    )


@dataclass
class AbmTrace:
    new_joins: np.ndarray
    active_count: np.ndarray
    exits: np.ndarray
    initial_active: float
    run_id: int | None = None
    candidates: np.ndarray | None = field(default=None, repr=False)

    @property
    def periods(self) -> int:
        return int(self.new_joins.size)

    @property
    def is_ensemble_mean(self) -> bool:
        return self.run_id is None

    def write_csv(self, stream: IO[str]) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(("period", "new_joins", "active_count", "exits"))
        for t in range(self.periods):
            writer.writerow(
                (t, _fmt(self.new_joins[t]), _fmt(self.active_count[t]), _fmt(self.exits[t]))
            )


def _fmt(x) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def run(params: AbmParams, run_seed: int | np.random.SeedSequence) -> AbmTrace:
    rng = np.random.default_rng(run_seed)
    state = AbmState.initial(params, rng)
    T = params.time_periods
    joins = np.zeros(T, dtype=np.int64)
    active = np.zeros(T, dtype=np.int64)
    exits = np.zeros(T, dtype=np.int64)
    candidates = np.zeros(T, dtype=np.int64)
    for t in range(T):
        state, c = step(state, t, params, rng)
        joins[t], active[t], exits[t], candidates[t] = c.new_joins, c.active_count, c.exits, c.candidates
    return AbmTrace(
        new_joins=joins,
        active_count=active,
        exits=exits,
        initial_active=params.initial_developers,
        run_id=0,
        candidates=candidates,
    )


def run_seeds(params: AbmParams) -> list[np.random.SeedSequence]:
    """Per-run streams: children of ``SeedSequence(params.seed)``, by run index."""
    return np.random.SeedSequence(params.seed).spawn(params.runs)


@dataclass
class Ensemble:
    params: AbmParams
    mean: AbmTrace
    runs: list[AbmTrace]

    def summary(self) -> dict:
        m = self.mean
        return {
            "params": asdict(self.params),
            "periods": m.periods,
            "final_active_mean": float(m.active_count[-1]) if m.periods else m.initial_active,
            "total_new_joins_mean": float(m.new_joins.sum()),
            "total_exits_mean": float(m.exits.sum()),
        }


def mean_trace(traces: Iterable[AbmTrace]) -> AbmTrace:
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    stack = lambda name: np.vstack([getattr(tr, name) for tr in traces])  # noqa: E731
    return AbmTrace(
        new_joins=stack("new_joins").mean(axis=0),
        active_count=stack("active_count").mean(axis=0),
        exits=stack("exits").mean(axis=0),
        initial_active=float(np.mean([tr.initial_active for tr in traces])),
        run_id=None,
        candidates=stack("candidates").mean(axis=0),
    )


def run_ensemble(params: AbmParams, workers: int = 1) -> Ensemble:
    """Average ``params.runs`` independent runs period by period.

    Runs may execute in a process pool; the reduction is always in run-index
    order, so the mean does not depend on ``workers``.
    """
    if params.runs < 1:
        raise ValueError("runs must be >= 1")
    seeds = run_seeds(params)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(run, [params] * len(seeds), seeds))
    else:
        traces = [run(params, s) for s in seeds]
    for i, tr in enumerate(traces):
        tr.run_id = i
    return Ensemble(params=params, mean=mean_trace(traces), runs=traces)
