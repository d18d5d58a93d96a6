"""Distance x strategy sweeps with seeds shared across strategies."""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields
from statistics import fmean
from typing import Iterable, Sequence

import pydantic

from .metrics import batch_delays, to_csv
from .scenario import Scenario, ValidationError
from .synchro import RunResult, Strategy, run_simulation


@dataclass(frozen=True, slots=True)
class SummaryRow:
    scenario: str
    pair_kind: str
    los_label: str
    strategy: str
    distance_m: float
    seeds: int
    n_pb: int
    n_sb: int
    lp: float
    avg_delay_s: float
    mean_window_us: float


SUMMARY_HEADER = [f.name for f in fields(SummaryRow)]


def _shift(agent, dx: float, dy: float):
    def move(p):
        return (p[0] + dx, p[1] + dy, p[2])

    waypoints = tuple(w.model_copy(update={"position": move(w.position)}) for w in agent.waypoints)
    return agent.model_copy(update={"position": move(agent.position), "waypoints": waypoints})


def place(base: Scenario, distance: float) -> Scenario:
    """Put the first flow's endpoints ``distance`` apart about the world center.

    Both endpoints sit on the horizontal line through the center. A master
    that is neither endpoint keeps its offset from the publisher. Motion
    plans move with their agent.
    """
    if not base.flows:
        raise ValidationError(f"{base.name}: sweep needs at least one flow")
    flow = base.flows[0]
    ex, ey = base.world.extent
    cx, cy = ex / 2, ey / 2
    targets = {flow.publisher: (cx - distance / 2, cy), flow.subscriber: (cx + distance / 2, cy)}
    deltas = {}
    for agent_id, (tx, ty) in targets.items():
        a = base.world.agent(agent_id)
        deltas[agent_id] = (tx - a.position[0], ty - a.position[1])
    if flow.master not in deltas:
        deltas[flow.master] = deltas[flow.publisher]
    agents = tuple(_shift(a, *deltas[a.id]) if a.id in deltas else a for a in base.world.agents)
    doc = base.model_dump()
    doc["world"]["agents"] = [a.model_dump() for a in agents]
    try:
        return Scenario.model_validate(doc)
    except pydantic.ValidationError as exc:  # geometry left the extent
        raise ValidationError(f"{base.name}: cannot place endpoints {distance} m apart: {exc}") from exc


def summarize(
    base: Scenario, distance: float, strategy: Strategy, runs: Sequence[RunResult]
) -> SummaryRow:
    lps, delays, windows = [], [], []
    n_pb = n_sb = 0
    for r in runs:
        sent = [rec for rec in r.records if rec.first_attempt_at is not None]
        n_pb += len(sent)
        n_sb += sum(rec.delivered_at is not None for rec in sent)
        lps.append(r.cumulative_lp())
        delays.extend(b.mean_s for b in batch_delays(r.records))
        windows.extend(w.applied_w for w in r.windows)
    return SummaryRow(
        scenario=base.name,
        pair_kind=base.pair_kind,
        los_label=base.los_label,
        strategy=strategy.value,
        distance_m=float(distance),
        seeds=len(runs),
        n_pb=n_pb,
        n_sb=n_sb,
        lp=fmean(lps) if lps else 0.0,
        avg_delay_s=fmean(delays) if delays else 0.0,
        mean_window_us=fmean(windows) if windows else 0.0,
    )


def sweep(
    base: Scenario,
    distances: Iterable[float],
    strategies: Iterable[Strategy | str],
    seeds: Iterable[int] | None = None,
) -> list[SummaryRow]:
    distances = [float(d) for d in distances]
    strategies = [Strategy(s) for s in strategies]
    seeds = list(seeds) if seeds is not None else [base.seed]
    ex, _ = base.world.extent
    for d in distances:
        if not 0 < d <= ex:
            raise ValidationError(f"sweep distance {d} m must be positive and within the {ex} m extent")
    rows = []
    for d in distances:
        placed = place(base, d)
        for strategy in strategies:
            policy = placed.policy.model_copy(update={"strategy": strategy})
            runs = [run_simulation(placed, policy, seed) for seed in seeds]
            rows.append(summarize(placed, d, strategy, runs))
    rows.sort(key=lambda r: (r.distance_m, r.strategy))
    return rows


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    return to_csv(SUMMARY_HEADER, (astuple(r) for r in rows))
