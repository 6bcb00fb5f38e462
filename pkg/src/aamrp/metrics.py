"""Run counters, the four evaluation metrics, seed aggregation and CSV output."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

NA = "N/A"

CSV_HEADER = ["protocol", "n_nodes", "group_size", "seed", "overhead", "load", "delay_s", "pdf_pct"]


@dataclass
class RunCounters:
    control_packets_received: int = 0
    routing_packets_sent: int = 0
    data_packets_sent_by_sources: int = 0
    data_receipts_unique: int = 0
    data_packets_received_total: int = 0
    delay_sum: float = 0.0
    delay_samples: int = 0
    expected_receipts: int = 0

    def record_receipt(self, delay: float) -> None:
        self.data_receipts_unique += 1
        self.delay_sum += delay
        self.delay_samples += 1


def overhead(c: RunCounters) -> int:
    return c.control_packets_received


def routing_load(c: RunCounters):
    if c.data_packets_received_total <= 0:
        return None
    return c.routing_packets_sent / c.data_packets_received_total


def avg_delay(c: RunCounters):
    if c.delay_samples <= 0:
        return None
    return c.delay_sum / c.delay_samples


def pdf(c: RunCounters):
    if c.expected_receipts <= 0:
        return None
    return 100.0 * c.data_receipts_unique / c.expected_receipts


@dataclass
class MetricsRow:
    protocol: str
    n_nodes: int
    group_size: int
    seed: object  # int, or "mean"
    overhead: float | None
    load: float | None
    delay_s: float | None
    pdf_pct: float | None

    @classmethod
    def from_counters(cls, protocol, n_nodes, group_size, seed, c: RunCounters) -> "MetricsRow":
        return cls(protocol, n_nodes, group_size, seed, overhead(c), routing_load(c), avg_delay(c), pdf(c))

    def values(self) -> dict:
        return {"overhead": self.overhead, "load": self.load, "delay_s": self.delay_s, "pdf_pct": self.pdf_pct}


@dataclass
class MetricsReport:
    protocol: str
    n_nodes: int
    group_size: int
    runs: list[MetricsRow] = field(default_factory=list)

    def mean(self) -> MetricsRow:
        vals = {}
        for name in ("overhead", "load", "delay_s", "pdf_pct"):
            xs = [getattr(r, name) for r in self.runs]
            # the mean always spans every seed, so one undefined run makes it undefined
            vals[name] = None if not xs or None in xs else math.fsum(xs) / len(xs)
        return MetricsRow(self.protocol, self.n_nodes, self.group_size, "mean", **vals)


def aggregate(rows) -> list[MetricsReport]:
    by_key: dict[tuple, MetricsReport] = {}
    for r in rows:
        key = (r.protocol, r.n_nodes, r.group_size)
        by_key.setdefault(key, MetricsReport(*key)).runs.append(r)
    return [by_key[k] for k in sorted(by_key)]


def format_value(v) -> str:
    if v is None:
        return NA
    if isinstance(v, float):
        return repr(round(v, 10))
    return str(v)


def _seed_key(seed):
    return (1, 0) if seed == "mean" else (0, seed)


def format_csv(rows) -> str:
    """CSV text with per-seed rows and one mean row per (protocol, n_nodes, group_size)."""
    rows = list(rows)
    rows.sort(key=lambda r: (r.protocol, r.n_nodes, r.group_size, _seed_key(r.seed)))
    reports = aggregate(rows)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rep in reports:
        for r in sorted(rep.runs, key=lambda r: _seed_key(r.seed)):
            w.writerow([r.protocol, r.n_nodes, r.group_size, r.seed] + [format_value(v) for v in r.values().values()])
        m = rep.mean()
        w.writerow([m.protocol, m.n_nodes, m.group_size, "mean"] + [format_value(v) for v in m.values().values()])
    return out.getvalue()


def parse_csv(text: str) -> list[MetricsRow]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        def num(x):
            return None if x == NA else float(x)
        seed = rec["seed"]
        rows.append(MetricsRow(rec["protocol"], int(rec["n_nodes"]), int(rec["group_size"]),
                               seed if seed == "mean" else int(seed),
                               num(rec["overhead"]), num(rec["load"]), num(rec["delay_s"]), num(rec["pdf_pct"])))
    return rows


def counters_from_trace(lines) -> RunCounters:
    """Rebuild run counters from a trace written by the simulator.

    Lines starting with ``#`` are headers; ``# protocol=flooding`` switches
    on the accounting where flooded data copies stand in for control traffic.
    """
    c = RunCounters()
    flooding = False
    gen_time: dict[tuple, float] = {}
    for raw in lines:
        line = raw.rstrip("\n")
        if not line:
            continue
        if line.startswith("#"):
            if line.replace(" ", "") == "#protocol=flooding":
                flooding = True
            continue
        f = line.split("\t")
        t, kind = float(f[0]), f[1]
        if kind != "DATA":
            direction = f[9]
            if direction == "RX":
                c.control_packets_received += 1
            else:
                c.routing_packets_sent += 1
            continue
        source, holder, group, seq, event = int(f[2]), int(f[3]), int(f[4]), int(f[5]), f[6]
        key = (source, group, seq)
        if event == "GEN":
            gen_time[key] = t
            c.data_packets_sent_by_sources += 1
            c.expected_receipts += int(f[7])
        elif event == "TX":
            if flooding and holder != source:
                c.routing_packets_sent += 1
        elif event == "RX":
            status = f[7]
            if status in ("NEW", "DUP"):
                c.data_packets_received_total += 1
            if status == "NEW":
                c.record_receipt(t - gen_time[key])
            elif flooding:
                c.control_packets_received += 1
    return c
