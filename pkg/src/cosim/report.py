"""Files on disk: per-run dumps, sweep `summary.csv`, optional SVG charts."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

from .metrics import rows_csv, to_csv
from .netsim import LogEntry, PacketRecord
from .sweep import SummaryRow, summary_csv
from .synchro import RunResult

METRICS = (("lp", "packet loss (%)"), ("avg_delay_s", "average delay (s)"))


PACKET_HEADER = [
    "packet_id", "flow", "payload_seq", "fragment", "on_air_bytes", "created_at_us",
    "injected_at_us", "first_attempt_at_us", "window_id", "delivered_at_us",
    "hops", "hops_completed", "attempts", "loss_cause",
]


def events_csv(log: Sequence[LogEntry]) -> str:
    return to_csv(LogEntry._fields, log)


def packets_csv(records: Sequence[PacketRecord]) -> str:
    rows = (
        (r.packet_id, r.flow, r.payload_seq, r.fragment, r.on_air_bytes, r.created_at,
         r.injected_at, r.first_attempt_at, r.window, r.delivered_at, r.hops,
         r.hops_completed, "/".join(map(str, r.attempts)), r.loss_cause.value)
        for r in records
    )
    return to_csv(PACKET_HEADER, rows)


def write_run(result: RunResult, out_dir: str | Path, trace: bool = False) -> list[Path]:
    """Dump one run: per-window metrics, the packet event log and packet records."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "metrics.csv": rows_csv(result.rows),
        "events.csv": events_csv(result.log),
        "packets.csv": packets_csv(result.records),
    }
    if trace:
        files["trace.txt"] = "".join(line + "\n" for line in result.trace_lines())
    written = []
    for name, text in files.items():
        path = out / name
        path.write_text(text)
        written.append(path)
    return written


def render_report(rows: Sequence[SummaryRow], out_dir: str | Path, svg: bool = False) -> list[Path]:
    if not rows:
        raise ValueError("render_report needs at least one summary row")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "summary.csv"]
    written[0].write_text(summary_csv(rows))
    if svg:
        groups: dict[tuple[str, str], list[SummaryRow]] = defaultdict(list)
        for r in rows:
            groups[(r.pair_kind, r.los_label)].append(r)
        for (pair, los), group in sorted(groups.items()):
            path = out / f"chart_{pair.lower()}_{los.lower()}.svg"
            _chart(group, f"{pair} {los}", path)
            written.append(path)
    return written


def _chart(rows: Sequence[SummaryRow], title: str, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "cosim"
    fig, ax_lp = plt.subplots(figsize=(6.4, 4.0))
    ax_delay = ax_lp.twinx()
    strategies = sorted({r.strategy for r in rows})
    for strategy in strategies:
        pts = sorted((r for r in rows if r.strategy == strategy), key=lambda r: r.distance_m)
        xs = [r.distance_m for r in pts]
        style = "--" if strategy == "adjustable" else "-"
        ax_lp.plot(xs, [100.0 * r.lp for r in pts], style, color="tab:orange", marker="o",
                   label=f"{METRICS[0][1]} [{strategy}]")
        ax_delay.plot(xs, [r.avg_delay_s for r in pts], style, color="tab:blue", marker="s",
                      label=f"{METRICS[1][1]} [{strategy}]")
    ax_lp.set_xlabel("distance (m)")
    ax_lp.set_ylabel(METRICS[0][1])
    ax_delay.set_ylabel(METRICS[1][1])
    ax_lp.set_title(title)
    handles = ax_lp.get_lines() + ax_delay.get_lines()
    ax_lp.legend(handles, [h.get_label() for h in handles], fontsize="small", loc="upper left")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
