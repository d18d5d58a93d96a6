"""Per-window metrics rows, batch delays, and fixed-format CSV output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields
from typing import Iterable, NamedTuple, Sequence

from .simkernel import to_seconds


@dataclass(frozen=True, slots=True)
class MetricsRow:
    scenario: str
    strategy: str
    seed: int
    window_id: int
    begin_us: int
    applied_w_us: int
    distance_bin_m: float
    los: str
    n_pb: int
    n_sb: int
    lp: float
    avg_delay_s: float
    cumulative_lp: float
    gate: str


def grid_bin(d: float, cell: float) -> float:
    """Snap a distance to the nearest multiple of the grid cell."""
    return math.floor(d / cell + 0.5) * cell


class Batch(NamedTuple):
    mean_s: float
    count: int
    partial: bool


def batch_delays(records: Iterable, batch: int = 10) -> list[Batch]:
    """Mean delay of consecutive groups of ``batch`` delivered packets.

    Packets are taken in delivery order. A trailing group smaller than
    ``batch`` is kept and marked ``partial``.
    """
    if batch < 1:
        raise ValueError("batch must be >= 1")
    delivered = sorted(
        (r for r in records if r.delivered_at is not None),
        key=lambda r: (r.delivered_at, r.packet_id),
    )
    out = []
    for i in range(0, len(delivered), batch):
        group = delivered[i : i + batch]
        total = sum(r.delivered_at - r.created_at for r in group)
        out.append(Batch(to_seconds(total) / len(group), len(group), len(group) < batch))
    return out


def fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6f}"
    if value is None:
        return ""
    return str(value)


def to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def rows_csv(rows: Sequence[MetricsRow]) -> str:
    header = [f.name for f in fields(MetricsRow)]
    return to_csv(header, (astuple(r) for r in rows))
