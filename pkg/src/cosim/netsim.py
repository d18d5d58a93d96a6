"""Discrete-event network engine for master-routed topic traffic.

Payloads are split into MTU-sized fragments. Each fragment travels
publisher -> master -> subscriber, one FIFO radio per node, with a capped
number of transmission attempts per hop.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

from pydantic import Field, model_validator

from .radio import ChannelConfig, LinkAssessment, assess_link, attempt_success_prob, link_snr
from .simkernel import EventKind, EventQueue, RngStream, SimTime
from .world import PoseSnapshot, WorldState, _Model

MAC_OVERHEAD_US = 500
FORWARD_LATENCY_US = 200


class UnknownAgent(ValueError):
    pass


class FlowSpec(_Model):
    publisher: str
    subscriber: str
    master: str
    topic: str = "/camera/image"
    payload_bytes: int = Field(default=1024, gt=0)
    mtu_bytes: int = Field(default=256, gt=0)
    header_bytes: int = Field(default=32, ge=0)
    publish_period_us: int = Field(default=33_333, gt=0)
    start_us: int = Field(default=0, ge=0)
    packet_budget: int = Field(default=400, ge=0)

    @model_validator(mode="after")
    def _check(self) -> FlowSpec:
        if self.publisher == self.subscriber:
            raise ValueError("publisher and subscriber must differ")
        if self.mtu_bytes <= self.header_bytes:
            raise ValueError("mtu_bytes must exceed header_bytes")
        return self

    def publish_times(self) -> list[SimTime]:
        return [self.start_us + j * self.publish_period_us for j in range(self.packet_budget)]


@dataclass(frozen=True, slots=True)
class Fragment:
    index: int
    payload_bytes: int
    on_air_bytes: int


def fragment(flow: FlowSpec) -> list[Fragment]:
    room = flow.mtu_bytes - flow.header_bytes
    count = math.ceil(flow.payload_bytes / room)
    out = []
    remaining = flow.payload_bytes
    for i in range(count):
        chunk = min(remaining, room)
        out.append(Fragment(i, chunk, chunk + flow.header_bytes))
        remaining -= chunk
    return out


def route(flow: FlowSpec, known: Iterable[str]) -> list[tuple[str, str]]:
    known = set(known)
    for role in ("publisher", "master", "subscriber"):
        agent = getattr(flow, role)
        if agent not in known:
            raise UnknownAgent(f"flow {flow.topic}: {role} {agent!r} is not a world agent")
    if flow.master in (flow.publisher, flow.subscriber):
        return [(flow.publisher, flow.subscriber)]
    return [(flow.publisher, flow.master), (flow.master, flow.subscriber)]


def serialization_us(on_air_bytes: int, rate_bps: int) -> int:
    return -(-on_air_bytes * 8 * 1_000_000 // rate_bps)


def attempt_duration_us(on_air_bytes: int, rate_bps: int) -> int:
    return serialization_us(on_air_bytes, rate_bps) + MAC_OVERHEAD_US


class LossCause(str, enum.Enum):
    NONE = "none"
    EXHAUSTED_RETRIES = "exhausted_retries"
    UNFINISHED = "unfinished"


@dataclass(slots=True)
class PacketRecord:
    packet_id: int
    flow: int
    payload_seq: int
    fragment: int
    on_air_bytes: int
    created_at: SimTime
    hops: int = 2
    injected_at: SimTime | None = None
    first_attempt_at: SimTime | None = None
    window: int | None = None
    delivered_at: SimTime | None = None
    hops_completed: int = 0
    attempts: list[int] = field(default_factory=list)
    loss_cause: LossCause = LossCause.UNFINISHED

    @property
    def delivered(self) -> bool:
        return self.delivered_at is not None

    @property
    def delay_us(self) -> SimTime | None:
        return None if self.delivered_at is None else self.delivered_at - self.created_at


@dataclass(frozen=True, slots=True)
class PacketHopOutcome:
    success: bool
    attempts: int
    attempt_delays_us: tuple[int, ...]

    @property
    def delay_us(self) -> int:
        return sum(self.attempt_delays_us)

    @property
    def loss_cause(self) -> LossCause:
        return LossCause.NONE if self.success else LossCause.EXHAUSTED_RETRIES


def transmit(
    on_air_bytes: int,
    link: LinkAssessment,
    true_snr: float,
    rng: RngStream,
    cfg: ChannelConfig,
) -> PacketHopOutcome:
    """Run one hop against a fixed link and true SNR (no window boundaries)."""
    p = attempt_success_prob(link, true_snr, cfg)
    each = attempt_duration_us(on_air_bytes, link.chosen_rate_bps)
    for n in range(1, cfg.max_attempts + 1):
        if rng.draw_uniform() < p:
            return PacketHopOutcome(True, n, (each,) * n)
    return PacketHopOutcome(False, cfg.max_attempts, (each,) * cfg.max_attempts)


@dataclass(frozen=True, slots=True)
class FlowTally:
    window_id: int
    flow: int
    n_pb: int
    n_sb: int

    @property
    def lp(self) -> float:
        return loss_probability(self.n_pb, self.n_sb)


def loss_probability(n_pb: int, n_sb: int) -> float:
    """Share of publisher-transmitted packets that never reached the subscriber."""
    if n_pb == 0:
        return 0.0
    return 1.0 - n_sb / n_pb


def tally(window, records: Iterable[PacketRecord], flow: int | None = None) -> FlowTally:
    n_pb = n_sb = 0
    for r in records:
        if flow is not None and r.flow != flow:
            continue
        if r.first_attempt_at is not None and window.begin <= r.first_attempt_at < window.end:
            n_pb += 1
            n_sb += r.delivered_at is not None
    return FlowTally(window.window_id, -1 if flow is None else flow, n_pb, n_sb)


class LogEntry(NamedTuple):
    t: SimTime
    kind: str  # inject | attempt | deliver | drop | forward
    packet_id: int
    flow: int
    fragment: int
    hop: int
    attempt: int
    rate_bps: int
    success: bool | None
    node: str
    window: int


Decider = Callable[[PacketRecord, int, int, float], bool]


class NetworkEngine:
    """Event-driven packet engine advanced one synchronization window at a time."""

    def __init__(
        self,
        flows: list[FlowSpec] | tuple[FlowSpec, ...],
        channel: ChannelConfig,
        world: WorldState,
        rng: RngStream,
        decide: Decider | None = None,
    ) -> None:
        self.flows = list(flows)
        self.channel = channel
        self.world = world
        self.rng = rng
        self.decide = decide or self._draw
        self.queue = EventQueue()
        known = [a.id for a in world.cfg.agents]
        self.routes = [route(f, known) for f in self.flows]
        self.fragments = [fragment(f) for f in self.flows]
        self.records: list[PacketRecord] = []
        self.log: list[LogEntry] = []
        self._pending = [deque(f.publish_times()) for f in self.flows]
        self._payload_seq = [0] * len(self.flows)
        self._outstanding = [0] * len(self.flows)
        self._tx_queues: dict[str, deque[tuple[PacketRecord, int]]] = {}
        self._busy: set[str] = set()
        self._links: dict[tuple[str, str], LinkAssessment] = {}
        self._snapshot: PoseSnapshot | None = None
        self.window_id = 0
        self.on_first_attempt: Callable[[PacketRecord], None] | None = None
        self.on_delivery: Callable[[PacketRecord], None] | None = None

    @property
    def clock(self) -> SimTime:
        return self.queue.clock

    def _draw(self, record: PacketRecord, hop: int, attempt: int, p: float) -> bool:
        return self.rng.draw_uniform() < p

    # -- window lifecycle -------------------------------------------------

    def begin_window(self, window_id: int, snapshot: PoseSnapshot) -> None:
        self.window_id = window_id
        self._snapshot = snapshot
        self._links.clear()

    def inject_due(self, t: SimTime) -> int:
        """Hand every publication created at or before ``t`` to its publisher."""
        n = 0
        for fi, pending in enumerate(self._pending):
            while pending and pending[0] <= t:
                created = pending.popleft()
                seq = self._payload_seq[fi]
                self._payload_seq[fi] += 1
                src = self.routes[fi][0][0]
                hops = len(self.routes[fi])
                for frag in self.fragments[fi]:
                    rec = PacketRecord(
                        len(self.records), fi, seq, frag.index, frag.on_air_bytes, created, hops,
                        injected_at=t,
                    )
                    self.records.append(rec)
                    self.log.append(LogEntry(t, "inject", rec.packet_id, fi, frag.index, 0, 0, 0, None, src, self.window_id))
                    self._enqueue(src, rec, 0, t)
                    n += 1
                self._outstanding[fi] += len(self.fragments[fi])
        return n

    def run_until(self, end: SimTime) -> None:
        """Process every event strictly before ``end``, then park the clock there."""
        q = self.queue
        while True:
            nxt = q.peek_time()
            if nxt is None or nxt >= end:
                break
            ev = q.pop_next()
            if ev.kind is EventKind.PACKET_ATTEMPT:
                self._attempt(ev.fire_at, *ev.data)
            elif ev.kind is EventKind.ATTEMPT_END:
                self._attempt_end(ev.fire_at, *ev.data)
            else:
                node, rec, hop = ev.data
                self._enqueue(node, rec, hop, ev.fire_at)
        q.advance_to(end)

    def active_flow(self) -> int | None:
        """First flow (scenario order) still streaming or with fragments in flight."""
        for fi, pending in enumerate(self._pending):
            if pending or self._outstanding[fi]:
                return fi
        return None

    @property
    def finished(self) -> bool:
        return not any(self._pending) and not any(self._outstanding)

    # -- per-node radios --------------------------------------------------

    def _enqueue(self, node: str, rec: PacketRecord, hop: int, t: SimTime) -> None:
        self._tx_queues.setdefault(node, deque()).append((rec, hop))
        if node not in self._busy:
            self._busy.add(node)
            self._start_next(node, t)

    def _start_next(self, node: str, t: SimTime) -> None:
        queue = self._tx_queues[node]
        if not queue:
            self._busy.discard(node)
            return
        rec, hop = queue.popleft()
        rec.attempts.append(0)
        self.queue.schedule(t, EventKind.PACKET_ATTEMPT, (rec, hop))

    def link(self, src: str, dst: str) -> LinkAssessment:
        key = (src, dst)
        assessment = self._links.get(key)
        if assessment is None:
            snap = self._snapshot
            assessment = assess_link(snap[src], snap[dst], self.world.obstacles, self.channel, snap.at)
            self._links[key] = assessment
        return assessment

    def _attempt(self, t: SimTime, rec: PacketRecord, hop: int) -> None:
        src, dst = self.routes[rec.flow][hop]
        if hop == 0 and rec.first_attempt_at is None:
            rec.first_attempt_at = t
            rec.window = self.window_id
            if self.on_first_attempt:
                self.on_first_attempt(rec)
        rec.attempts[hop] += 1
        n = rec.attempts[hop]
        link = self.link(src, dst)
        world = self.world.advance(t)
        _, _, true_snr = link_snr(world.agent(src), world.agent(dst), world.obstacles, self.channel)
        p = attempt_success_prob(link, true_snr, self.channel)
        ok = self.decide(rec, hop, n, p)
        self.log.append(LogEntry(t, "attempt", rec.packet_id, rec.flow, rec.fragment, hop, n, link.chosen_rate_bps, ok, src, self.window_id))
        done = t + attempt_duration_us(rec.on_air_bytes, link.chosen_rate_bps)
        self.queue.schedule(done, EventKind.ATTEMPT_END, (rec, hop, ok))

    def _attempt_end(self, t: SimTime, rec: PacketRecord, hop: int, ok: bool) -> None:
        src, dst = self.routes[rec.flow][hop]
        if not ok and rec.attempts[hop] < self.channel.max_attempts:
            self.queue.schedule(t, EventKind.PACKET_ATTEMPT, (rec, hop))
            return
        if ok:
            rec.hops_completed += 1
            if hop + 1 < rec.hops:
                self.log.append(LogEntry(t, "forward", rec.packet_id, rec.flow, rec.fragment, hop, 0, 0, True, dst, self.window_id))
                self.queue.schedule(t + FORWARD_LATENCY_US, EventKind.FORWARD, (dst, rec, hop + 1))
            else:
                rec.delivered_at = t
                rec.loss_cause = LossCause.NONE
                self._outstanding[rec.flow] -= 1
                self.log.append(LogEntry(t, "deliver", rec.packet_id, rec.flow, rec.fragment, hop, 0, 0, True, dst, self.window_id))
                if self.on_delivery:
                    self.on_delivery(rec)
        else:
            rec.loss_cause = LossCause.EXHAUSTED_RETRIES
            self._outstanding[rec.flow] -= 1
            self.log.append(LogEntry(t, "drop", rec.packet_id, rec.flow, rec.fragment, hop, 0, 0, False, src, self.window_id))
        self._start_next(src, t)
