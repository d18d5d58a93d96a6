"""Log-distance wireless channel with stale-assessment rate selection.

A link is assessed once per synchronization window from the frozen pose
snapshot. Each transmission attempt then succeeds or fails against the SNR
the agents really have at attempt time, so an assessment that has gone stale
shows up as an SNR deficit on the chosen rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from pydantic import Field, model_validator

from .simkernel import SimTime
from .world import AgentState, LosVerdict, Obstacle, _Model, line_of_sight

MIN_DISTANCE_M = 0.1

# 802.11a/g OFDM rates; thresholds are the standard minimum receiver
# sensitivities (-82 .. -65 dBm) measured against the -94 dBm noise floor.
DEFAULT_RATE_TABLE: tuple[tuple[int, float], ...] = (
    (6_000_000, 12.0),
    (9_000_000, 13.0),
    (12_000_000, 15.0),
    (18_000_000, 17.0),
    (24_000_000, 20.0),
    (36_000_000, 24.0),
    (48_000_000, 28.0),
    (54_000_000, 29.0),
)


class ChannelConfig(_Model):
    tx_power_dbm: float = 20.0
    noise_floor_dbm: float = -94.0
    ref_loss_db: float = 40.0
    exponent_los: float = Field(default=2.0, gt=0)
    exponent_nlos: float = Field(default=3.2, gt=0)
    foliage_penalty_db: float = Field(default=5.0, ge=0)
    rate_table: tuple[tuple[int, float], ...] = DEFAULT_RATE_TABLE
    selection_margin_db: float = 3.0
    per_floor: float = Field(default=0.01, ge=0, lt=1)
    per_slope: float = Field(default=0.2, gt=0)
    max_attempts: int = Field(default=3, ge=1)

    @model_validator(mode="after")
    def _check(self) -> ChannelConfig:
        if not self.rate_table:
            raise ValueError("rate_table must not be empty")
        thresholds = [snr for _, snr in self.rate_table]
        if thresholds != sorted(thresholds):
            raise ValueError("rate_table must be sorted ascending by min_snr_db")
        if any(rate <= 0 for rate, _ in self.rate_table):
            raise ValueError("rate_table rates must be positive")
        return self

    def min_snr(self, rate_bps: int) -> float:
        for rate, snr in self.rate_table:
            if rate == rate_bps:
                return snr
        raise KeyError(f"rate {rate_bps} not in rate_table")


@dataclass(frozen=True, slots=True)
class LinkAssessment:
    distance_m: float
    los_verdict: LosVerdict
    snr_db: float
    chosen_rate_bps: int
    required_snr_db: float
    assessed_at: SimTime


def path_loss(d: float, verdict: LosVerdict, cfg: ChannelConfig) -> float:
    d = max(d, MIN_DISTANCE_M)
    if verdict is LosVerdict.NLOS:
        return cfg.ref_loss_db + 10.0 * cfg.exponent_nlos * math.log10(d) + cfg.foliage_penalty_db
    return cfg.ref_loss_db + 10.0 * cfg.exponent_los * math.log10(d)


def snr_db(d: float, verdict: LosVerdict, cfg: ChannelConfig) -> float:
    return cfg.tx_power_dbm - path_loss(d, verdict, cfg) - cfg.noise_floor_dbm


def select_rate(snr: float, cfg: ChannelConfig) -> tuple[int, float]:
    """Highest rate whose threshold clears ``snr`` minus the margin, else the lowest."""
    usable = snr - cfg.selection_margin_db
    chosen = cfg.rate_table[0]
    for entry in cfg.rate_table:
        if entry[1] <= usable:
            chosen = entry
        else:
            break
    return chosen


def link_snr(a: AgentState, b: AgentState, obstacles, cfg: ChannelConfig) -> tuple[float, LosVerdict, float]:
    d = math.dist(a.position, b.position)
    verdict = line_of_sight(a, b, obstacles)
    return d, verdict, snr_db(d, verdict, cfg)


def assess_link(
    a: AgentState,
    b: AgentState,
    obstacles: tuple[Obstacle, ...] | list[Obstacle],
    cfg: ChannelConfig,
    at: SimTime,
) -> LinkAssessment:
    d, verdict, snr = link_snr(a, b, obstacles, cfg)
    rate, required = select_rate(snr, cfg)
    return LinkAssessment(d, verdict, snr, rate, required, at)


def attempt_success_prob(assessment: LinkAssessment, true_snr_db: float, cfg: ChannelConfig) -> float:
    deficit = assessment.required_snr_db - true_snr_db
    if deficit <= 0.0:
        return 1.0 - cfg.per_floor
    return max(0.0, 1.0 - (cfg.per_floor + cfg.per_slope * deficit))
