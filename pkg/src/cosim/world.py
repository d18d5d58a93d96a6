"""Kinematic world: waypoint motion, poses, and obstacle line of sight.

Motion is piecewise linear at constant speed per leg, so every position is a
closed-form function of absolute time and ``advance`` composes exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .simkernel import SimTime, US_PER_S

Vec3 = tuple[float, float, float]


class AgentKind(str, enum.Enum):
    UGV = "UGV"
    UAV = "UAV"


class Role(str, enum.Enum):
    PUBLISHER = "publisher"
    SUBSCRIBER = "subscriber"
    MASTER = "master"
    IDLE = "idle"


class LosVerdict(str, enum.Enum):
    LOS = "LOS"
    NLOS = "NLOS"


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Obstacle(_Model):
    """Vertical cylinder standing on the ground (a tree)."""

    center: tuple[float, float]
    radius: float = Field(gt=0)
    height: float = Field(gt=0)


class Waypoint(_Model):
    position: Vec3
    speed: float = Field(gt=0, description="m/s on the leg that ends here")


class AgentConfig(_Model):
    id: str = Field(min_length=1)
    kind: AgentKind
    position: Vec3
    role: Role = Role.IDLE
    waypoints: tuple[Waypoint, ...] = ()
    loop: bool = True


class KindLimits(_Model):
    ugv_ride_height: float = 0.2
    ugv_max_speed: float = Field(default=1.0, gt=0)
    uav_z_min: float = 1.0
    uav_z_max: float = 50.0
    uav_max_speed: float = Field(default=20.0, gt=0)

    @model_validator(mode="after")
    def _check(self) -> KindLimits:
        if not self.uav_z_min <= self.uav_z_max:
            raise ValueError("uav_z_min must not exceed uav_z_max")
        return self


class WorldConfig(_Model):
    extent: tuple[float, float] = (100.0, 100.0)
    grid_cell: float = Field(default=20.0, gt=0)
    obstacles: tuple[Obstacle, ...] = ()
    agents: tuple[AgentConfig, ...] = ()
    limits: KindLimits = KindLimits()

    @model_validator(mode="after")
    def _check(self) -> WorldConfig:
        ex, ey = self.extent
        if ex <= 0 or ey <= 0:
            raise ValueError("extent must be positive")
        for side in (ex, ey):
            cells = side / self.grid_cell
            if abs(cells - round(cells)) > 1e-9:
                raise ValueError(f"grid_cell {self.grid_cell} does not divide extent {side}")
        seen: set[str] = set()
        lim = self.limits
        for agent in self.agents:
            if agent.id in seen:
                raise ValueError(f"duplicate agent id {agent.id!r}")
            seen.add(agent.id)
            points = [agent.position] + [w.position for w in agent.waypoints]
            for x, y, z in points:
                if not (0.0 <= x <= ex and 0.0 <= y <= ey):
                    raise ValueError(f"agent {agent.id!r}: point ({x}, {y}) outside extent")
                if agent.kind is AgentKind.UGV and abs(z - lim.ugv_ride_height) > 1e-9:
                    raise ValueError(
                        f"agent {agent.id!r}: UGV z={z} differs from ride height {lim.ugv_ride_height}"
                    )
                if agent.kind is AgentKind.UAV and not lim.uav_z_min <= z <= lim.uav_z_max:
                    raise ValueError(f"agent {agent.id!r}: UAV z={z} outside altitude band")
            vmax = lim.ugv_max_speed if agent.kind is AgentKind.UGV else lim.uav_max_speed
            for w in agent.waypoints:
                if w.speed > vmax:
                    raise ValueError(
                        f"agent {agent.id!r}: leg speed {w.speed} exceeds {agent.kind.value} max {vmax}"
                    )
        return self

    def agent(self, agent_id: str) -> AgentConfig:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise KeyError(agent_id)


@dataclass(frozen=True, slots=True)
class AgentState:
    id: str
    kind: AgentKind
    position: Vec3
    velocity: Vec3
    role: Role = Role.IDLE

    @property
    def speed(self) -> float:
        return math.sqrt(sum(c * c for c in self.velocity))


@dataclass(frozen=True, slots=True)
class PoseSnapshot:
    at: SimTime
    agents: tuple[AgentState, ...]

    def __getitem__(self, agent_id: str) -> AgentState:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise KeyError(agent_id)


@dataclass(frozen=True, slots=True)
class _Leg:
    start_s: float
    duration_s: float
    origin: Vec3
    velocity: Vec3


class Trajectory:
    """Closed-form piecewise-linear path for one agent."""

    def __init__(self, cfg: AgentConfig) -> None:
        self.cfg = cfg
        self.prefix: list[_Leg] = []
        self.cycle: list[_Leg] = []
        self.cycle_period = 0.0
        t = 0.0
        here = cfg.position
        if not cfg.waypoints:
            self.rest = here
            self.prefix_end = 0.0
            return
        first = cfg.waypoints[0]
        t = self._append(self.prefix, t, here, first.position, first.speed)
        self.prefix_end = t
        if cfg.loop and len(cfg.waypoints) > 1:
            ring = list(cfg.waypoints[1:]) + [cfg.waypoints[0]]
            here = first.position
            tc = 0.0
            for w in ring:
                tc = self._append(self.cycle, tc, here, w.position, w.speed)
                here = w.position
            self.cycle_period = tc
            self.rest = first.position
        else:
            here = first.position
            for w in cfg.waypoints[1:]:
                t = self._append(self.prefix, t, here, w.position, w.speed)
                here = w.position
            self.prefix_end = t
            self.rest = here

    @staticmethod
    def _append(legs: list[_Leg], t: float, a: Vec3, b: Vec3, speed: float) -> float:
        length = math.dist(a, b)
        if length == 0.0:
            return t
        dur = length / speed
        vel = tuple((bi - ai) / dur for ai, bi in zip(a, b))
        legs.append(_Leg(t, dur, a, vel))  # type: ignore[arg-type]
        return t + dur

    @staticmethod
    def _on(leg: _Leg, t: float) -> tuple[Vec3, Vec3]:
        dt = t - leg.start_s
        o, v = leg.origin, leg.velocity
        return (o[0] + v[0] * dt, o[1] + v[1] * dt, o[2] + v[2] * dt), v

    def at(self, t_us: SimTime) -> tuple[Vec3, Vec3]:
        """Position and velocity at absolute time ``t_us``."""
        t = t_us / US_PER_S
        if t < self.prefix_end:
            for leg in self.prefix:
                if t < leg.start_s + leg.duration_s:
                    return self._on(leg, t)
        if self.cycle_period > 0.0:
            tc = math.fmod(t - self.prefix_end, self.cycle_period)
            for leg in self.cycle:
                if tc < leg.start_s + leg.duration_s:
                    return self._on(leg, tc)
            return self._on(self.cycle[-1], tc)
        return self.rest, (0.0, 0.0, 0.0)


class WorldState:
    """Mutable world owned by the simulation loop."""

    def __init__(self, cfg: WorldConfig, start: SimTime = 0) -> None:
        self.cfg = cfg
        self.clock: SimTime = start
        self._traj = {a.id: Trajectory(a) for a in cfg.agents}
        self._ids = tuple(self._traj)
        self._cache: dict[str, AgentState] = {}

    @property
    def obstacles(self) -> tuple[Obstacle, ...]:
        return self.cfg.obstacles

    def advance(self, to: SimTime) -> WorldState:
        if to < self.clock:
            raise ValueError(f"world cannot move back from {self.clock}us to {to}us")
        if to != self.clock:
            self.clock = to
            self._cache.clear()
        return self

    def agent(self, agent_id: str) -> AgentState:
        state = self._cache.get(agent_id)
        if state is None:
            traj = self._traj[agent_id]
            pos, vel = traj.at(self.clock)
            cfg = traj.cfg
            state = AgentState(cfg.id, cfg.kind, pos, vel, cfg.role)
            self._cache[agent_id] = state
        return state

    def snapshot(self) -> PoseSnapshot:
        agent = self.agent
        return PoseSnapshot(self.clock, tuple(agent(i) for i in self._ids))


def distance(a: AgentState, b: AgentState) -> float:
    return math.dist(a.position, b.position)


_GEOMETRY: dict[int, tuple[object, tuple[tuple[float, float, float, float], ...]]] = {}


def _geometry(obstacles) -> tuple[tuple[float, float, float, float], ...]:
    """(cx, cy, r^2, height) per obstacle, cached per obstacle collection."""
    hit = _GEOMETRY.get(id(obstacles))
    if hit is not None and hit[0] is obstacles:
        return hit[1]
    geo = tuple((ob.center[0], ob.center[1], ob.radius * ob.radius, ob.height) for ob in obstacles)
    if isinstance(obstacles, tuple):
        if len(_GEOMETRY) >= 64:
            _GEOMETRY.clear()
        _GEOMETRY[id(obstacles)] = (obstacles, geo)
    return geo


def segment_blocked(p: Vec3, q: Vec3, obstacles: tuple[Obstacle, ...] | list[Obstacle]) -> bool:
    # canonical endpoint order keeps the float result symmetric
    if q < p:
        p, q = q, p
    px, py, pz = p
    dx, dy, dz = q[0] - px, q[1] - py, q[2] - pz
    a = dx * dx + dy * dy
    for cx, cy, r2, height in _geometry(obstacles):
        fx, fy = px - cx, py - cy
        c = fx * fx + fy * fy - r2
        if a == 0.0:
            if c > 0.0:
                continue
            t0, t1 = 0.0, 1.0
        else:
            b = 2.0 * (fx * dx + fy * dy)
            disc = b * b - 4.0 * a * c
            if disc < 0.0:
                continue
            root = math.sqrt(disc)
            t0 = max((-b - root) / (2.0 * a), 0.0)
            t1 = min((-b + root) / (2.0 * a), 1.0)
            if t0 > t1:
                continue
        if min(pz + dz * t0, pz + dz * t1) <= height:
            return True
    return False


def line_of_sight(a: AgentState, b: AgentState, obstacles) -> LosVerdict:
    return LosVerdict.NLOS if segment_blocked(a.position, b.position, obstacles) else LosVerdict.LOS
