"""Window-based time synchronization between the world and network engines.

Every window runs the same exchange::

    WindowRequest -> WindowGrant -> UpdateBegin -> UpdateEnd -> LpReport

The grant fixes ``[begin, end)``. Poses are frozen at ``begin``, the network
engine runs every event strictly before ``end`` and both engines must meet at
``end`` before the next request.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple

from pydantic import Field, model_validator

from .metrics import MetricsRow, grid_bin
from .netsim import Decider, FlowTally, LogEntry, NetworkEngine, PacketRecord, loss_probability
from .simkernel import RngStream, SimTime, US_PER_MS, to_seconds
from .world import LosVerdict, PoseSnapshot, WorldState, _Model, line_of_sight

if TYPE_CHECKING:
    from .scenario import Scenario


class DesyncDetected(RuntimeError):
    """Engine clocks disagree at a window barrier."""


class Strategy(str, enum.Enum):
    FIXED = "fixed"
    ADJUSTABLE = "adjustable"


class Gate(str, enum.Enum):
    DISPLAY = "display"
    FEEDBACK = "feedback"


class SyncPolicy(_Model):
    strategy: Strategy = Strategy.FIXED
    w_init_us: int = Field(default=1_000, gt=0)
    w_min_us: int = Field(default=100, gt=0)
    w_max_us: int = Field(default=10_000, gt=0)
    velocity_gain: float = Field(default=1.0 / 1000.0, ge=0)
    use_absolute_difference: bool = False
    lp_threshold: float = Field(default=0.15, gt=0, lt=1)

    @model_validator(mode="after")
    def _check(self) -> SyncPolicy:
        if not self.w_min_us <= self.w_init_us <= self.w_max_us:
            raise ValueError("need w_min_us <= w_init_us <= w_max_us")
        return self


def adjusted_window(w: SimTime, v_pub: float, v_sub: float, policy: SyncPolicy) -> SimTime:
    """Window length after the speed-difference correction, in microseconds.

    The correction ``gain * (v_pub - v_sub)`` is read in milliseconds, with
    speeds in m/s; the result is rounded to the nearest microsecond and
    clamped to ``[w_min_us, w_max_us]``.
    """
    diff = v_pub - v_sub
    if policy.use_absolute_difference:
        diff = abs(diff)
    w_a = math.floor(w + policy.velocity_gain * diff * US_PER_MS + 0.5)
    return min(max(w_a, policy.w_min_us), policy.w_max_us)


def threshold_gate(lp: float, policy: SyncPolicy) -> Gate:
    return Gate.DISPLAY if lp <= policy.lp_threshold else Gate.FEEDBACK


@dataclass(frozen=True, slots=True)
class WindowSpec:
    window_id: int
    begin: SimTime
    end: SimTime
    base_w: SimTime
    applied_w: SimTime
    strategy: Strategy
    truncated: bool = False


class MsgKind(str, enum.Enum):
    WINDOW_REQUEST = "WindowRequest"
    WINDOW_GRANT = "WindowGrant"
    UPDATE_BEGIN = "UpdateBegin"
    UPDATE_END = "UpdateEnd"
    LP_REPORT = "LpReport"


PROTOCOL_ORDER = tuple(MsgKind)


class SyncMessage(NamedTuple):
    window_id: int
    kind: MsgKind
    timestamp: SimTime
    payload: object = None

    def detail(self) -> str:
        p = self.payload
        if self.kind is MsgKind.WINDOW_GRANT:
            return f"begin={p.begin} end={p.end} applied_w={p.applied_w} base_w={p.base_w}"
        if self.kind is MsgKind.LP_REPORT:
            n_pb, n_sb = p
            return f"n_pb={n_pb} n_sb={n_sb} lp={loss_probability(n_pb, n_sb):.6f}"
        return "-"

    def line(self) -> str:
        return f"{self.window_id} {self.kind.value} {self.timestamp} {self.detail()}"


@dataclass
class RunResult:
    scenario: str
    strategy: Strategy
    seed: int
    windows: list[WindowSpec]
    messages: list[SyncMessage]
    records: list[PacketRecord]
    log: list[LogEntry]
    rows: list[MetricsRow]
    tallies: list[list[FlowTally]] = field(default_factory=list)

    @property
    def elapsed(self) -> SimTime:
        return self.windows[-1].end if self.windows else 0

    def trace_lines(self) -> list[str]:
        return [m.line() for m in self.messages]

    def cumulative_lp(self) -> float:
        n_pb = sum(r.first_attempt_at is not None for r in self.records)
        n_sb = sum(r.first_attempt_at is not None and r.delivered_at is not None for r in self.records)
        return loss_probability(n_pb, n_sb)


class Coordinator:
    """Drives one world and one network engine through granted windows."""

    def __init__(
        self,
        world: WorldState,
        engine: NetworkEngine,
        policy: SyncPolicy,
        horizon: SimTime,
    ) -> None:
        self.world = world
        self.engine = engine
        self.policy = policy
        self.horizon = horizon
        self.windows: list[WindowSpec] = []
        self.messages: list[SyncMessage] = []
        self.snapshots: list[PoseSnapshot] = []
        self.active: list[int | None] = []
        nflows = len(engine.flows)
        self._n_pb: list[list[int]] = []
        self._n_sb: list[list[int]] = []
        self._nflows = nflows
        engine.on_first_attempt = self._count_sent
        engine.on_delivery = self._count_delivered

    def _count_sent(self, rec: PacketRecord) -> None:
        self._n_pb[rec.window][rec.flow] += 1

    def _count_delivered(self, rec: PacketRecord) -> None:
        self._n_sb[rec.window][rec.flow] += 1

    def plan_window(self, k: int, begin: SimTime, snap: PoseSnapshot, active: int | None) -> WindowSpec:
        p = self.policy
        base = p.w_init_us
        applied = base
        if p.strategy is Strategy.ADJUSTABLE and active is not None:
            flow = self.engine.flows[active]
            applied = adjusted_window(base, snap[flow.publisher].speed, snap[flow.subscriber].speed, p)
        end = begin + applied
        truncated = end > self.horizon
        if truncated:
            end = self.horizon
            applied = end - begin
        return WindowSpec(k, begin, end, base, applied, p.strategy, truncated)

    def run_window(self, k: int) -> WindowSpec:
        world, engine, say = self.world, self.engine, self.messages.append
        begin = self.windows[-1].end if self.windows else 0
        if world.clock != begin or engine.clock != begin:
            raise DesyncDetected(
                f"window {k}: world at {world.clock}us, network at {engine.clock}us, expected {begin}us"
            )
        say(SyncMessage(k, MsgKind.WINDOW_REQUEST, begin))
        snap = world.snapshot()
        active = engine.active_flow()
        spec = self.plan_window(k, begin, snap, active)
        say(SyncMessage(k, MsgKind.WINDOW_GRANT, begin, spec))
        self.windows.append(spec)
        self.snapshots.append(snap)
        self.active.append(active)
        self._n_pb.append([0] * self._nflows)
        self._n_sb.append([0] * self._nflows)

        engine.begin_window(k, snap)
        engine.inject_due(begin)
        say(SyncMessage(k, MsgKind.UPDATE_BEGIN, begin))
        engine.run_until(spec.end)
        world.advance(spec.end)
        say(SyncMessage(k, MsgKind.UPDATE_END, spec.end))
        if world.clock != engine.clock:
            raise DesyncDetected(
                f"window {k} barrier: world at {world.clock}us, network at {engine.clock}us"
            )
        # provisional: fragments of this window still in flight count as undelivered
        say(SyncMessage(k, MsgKind.LP_REPORT, spec.end, (sum(self._n_pb[k]), sum(self._n_sb[k]))))
        return spec

    def run(self) -> None:
        k = 0
        while self.engine.clock < self.horizon and not self.engine.finished:
            self.run_window(k)
            k += 1

    def tallies(self) -> list[list[FlowTally]]:
        return [
            [FlowTally(k, fi, self._n_pb[k][fi], self._n_sb[k][fi]) for fi in range(self._nflows)]
            for k in range(len(self.windows))
        ]


def build_rows(
    coord: Coordinator,
    scenario_name: str,
    seed: int,
    grid_cell: float,
) -> list[MetricsRow]:
    engine, world = coord.engine, coord.world
    delay_sum = [0] * len(coord.windows)
    delay_n = [0] * len(coord.windows)
    for rec in engine.records:
        if rec.delivered_at is not None and rec.window is not None:
            delay_sum[rec.window] += rec.delivered_at - rec.created_at
            delay_n[rec.window] += 1
    rows = []
    cum_pb = cum_sb = 0
    geometry: dict[tuple, tuple[float, LosVerdict]] = {}
    for spec, snap, active in zip(coord.windows, coord.snapshots, coord.active):
        k = spec.window_id
        flow = engine.flows[0 if active is None else active] if engine.flows else None
        if flow is not None:
            a, b = snap[flow.publisher], snap[flow.subscriber]
            key = (a.position, b.position)
            geo = geometry.get(key)
            if geo is None:
                geo = (math.dist(a.position, b.position), line_of_sight(a, b, world.obstacles))
                geometry[key] = geo
            dist, los = geo
        else:
            dist, los = 0.0, LosVerdict.LOS
        n_pb, n_sb = sum(coord._n_pb[k]), sum(coord._n_sb[k])
        cum_pb += n_pb
        cum_sb += n_sb
        lp = loss_probability(n_pb, n_sb)
        rows.append(
            MetricsRow(
                scenario=scenario_name,
                strategy=spec.strategy.value,
                seed=seed,
                window_id=k,
                begin_us=spec.begin,
                applied_w_us=spec.applied_w,
                distance_bin_m=grid_bin(dist, grid_cell),
                los=los.value,
                n_pb=n_pb,
                n_sb=n_sb,
                lp=lp,
                avg_delay_s=to_seconds(delay_sum[k]) / delay_n[k] if delay_n[k] else 0.0,
                cumulative_lp=loss_probability(cum_pb, cum_sb),
                gate=threshold_gate(lp, coord.policy).value,
            )
        )
    return rows


def run_simulation(
    scenario: Scenario,
    policy: SyncPolicy | None = None,
    seed: int | None = None,
    horizon: SimTime | None = None,
    decide: Decider | None = None,
) -> RunResult:
    """Run one scenario to its horizon or until every packet budget is spent."""
    policy = policy or scenario.policy
    seed = scenario.seed if seed is None else seed
    horizon = scenario.horizon_us if horizon is None else horizon
    world = WorldState(scenario.world)
    engine = NetworkEngine(scenario.flows, scenario.channel, world, RngStream(seed, "radio"), decide)
    coord = Coordinator(world, engine, policy, horizon)
    coord.run()
    rows = build_rows(coord, scenario.name, seed, scenario.world.grid_cell)
    return RunResult(
        scenario=scenario.name,
        strategy=policy.strategy,
        seed=seed,
        windows=coord.windows,
        messages=coord.messages,
        records=engine.records,
        log=engine.log,
        rows=rows,
        tallies=coord.tallies(),
    )

