"""Run metrics, qualitative grades and comparison reports.

Metrics are recomputed from the event log, the message log and the final
world only. Grades are a pure function of metrics via the thresholds below.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

from twinmesh.messages import MessageKind
from twinmesh.oracle import flat_ledger
from twinmesh.sim import SimulationResult
from twinmesh.strategies import SHARING_LABEL, StrategyKind, aggregate_view

# Grade thresholds. Symbols run from best to worst: "++", "+", "-", "--".
CONSISTENCY_MAX_SOURCES = 1  # mandatory data must come from at most this many hosts
CONSISTENCY_MAX_STALENESS = 0  # events until the original twin sees an update
CONSISTENCY_MIN_COMPLETENESS = 1.0  # below this, consistency is "--"
SOVEREIGNTY_MAX_FOREIGN_WRITES = 0  # above this, sovereignty is "--"
# Sovereignty never reaches "++": every strategy still relies on the
# network's discovery and registry operators, which are not modeled as
# policy-bound parties.
OWNERSHIP_OWN_FRACTION_FOR_TOP = 1.0

AXES = ("consistency", "sovereignty", "ownership")
AXIS_TITLES = {
    "consistency": "Digital consistency",
    "sovereignty": "Data sovereignty",
    "ownership": "Ownership",
    "sharing": "Level of sharing",
}


class IncompleteLog(Exception):
    pass


@dataclass
class RunMetrics:
    strategy: StrategyKind
    messages_by_kind: dict[str, int]
    event_messages: dict[str, int]
    poll_messages: dict[str, int]
    foreign_writes: int
    sources_per_asset: dict[str, int]
    mandatory_sources_per_asset: dict[str, int]
    completeness_after_loss: dict[str, float]
    mandatory_completeness: float
    external_flag_count: int
    staleness: int
    twin_count_per_asset: dict[str, int]
    own_fraction: float
    licensed_copies: int
    unlicensed_foreign: int
    notifications: int
    pulls: int
    mandatory_foreign_updates: int
    twin_creations: int
    reshare_events: int
    denied_events: int
    phase_skips: int
    departed: list[str] = field(default_factory=list)

    @property
    def total_messages(self) -> int:
        return sum(self.messages_by_kind.values())

    @property
    def max_mandatory_sources(self) -> int:
        return max(self.mandatory_sources_per_asset.values(), default=0)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["strategy"] = self.strategy.value
        d["total_messages"] = self.total_messages
        return d


def _check_log(result: SimulationResult) -> None:
    applied = [r for r in result.events if r["kind"] != "Drain"]
    if len(applied) != len(result.scenario.events):
        raise IncompleteLog(f"{len(applied)} event records for {len(result.scenario.events)} events")
    seqs = [r["seq"] for r in result.events]
    if seqs != sorted(seqs) or len(set(seqs)) != len(seqs):
        raise IncompleteLog("event records are not strictly ordered")
    last = seqs[-1] if seqs else 0
    if any(m.event_seq > last for m in result.messages):
        raise IncompleteLog("messages refer to events missing from the log")


def compute_metrics(result: SimulationResult, ledger: Optional[dict] = None) -> RunMetrics:
    _check_log(result)
    w = result.world
    strategy = result.strategy
    mandatory = set(w.mandatory_kinds)
    ledger = flat_ledger(result.scenario) if ledger is None else ledger

    by_kind = Counter(m.kind.value for m in result.messages)
    ev_msgs = Counter(m.kind.value for m in result.messages if m.phase == "event")
    poll_msgs = Counter(m.kind.value for m in result.messages if m.phase == "poll")

    effects = [(r["seq"], fx) for r in result.events for fx in r["effects"]]
    appends = [fx for _, fx in effects if fx["op"] == "append"]
    foreign_writes = sum(1 for fx in appends if not fx["external"] and fx["writer"] != fx["host"])

    # staleness of mandatory data written outside the original twin
    end = (result.events[-1]["seq"] + 1) if result.events else 1
    pulled = {
        (fx["source_twin"], fx["kind"], fx["event_seq"]): seq for seq, fx in effects if fx["op"] == "pull"
    }
    staleness = 0
    mandatory_foreign = 0
    for seq, fx in effects:
        if fx["op"] != "append" or fx["external"] or fx["original"] or fx["kind"] not in {k.value for k in mandatory}:
            continue
        mandatory_foreign += 1
        seen_at = pulled.get((fx["twin"], fx["kind"], fx["event_seq"]), end)
        staleness = max(staleness, seen_at - fx["event_seq"])

    sources, msources = {}, {}
    hits: Counter = Counter()
    totals: Counter = Counter()
    for cx, asset in w.assets.items():
        full = aggregate_view(w, cx, None, strategy)
        sources[asset.name] = len(full.sources_consulted)
        msources[asset.name] = len(aggregate_view(w, cx, None, strategy, tuple(w.mandatory_kinds)).sources_consulted)
        got = {k.value: (c[1], c[2]) for k, c in full.contents().items()}
        for (name, kind), truth in ledger.items():
            if name != asset.name:
                continue
            totals[kind] += 1
            if got.get(kind) == truth:
                hits[kind] += 1
    completeness = {k: hits[k] / totals[k] for k in sorted(totals)}
    m_total = sum(totals[k.value] for k in mandatory)
    m_hits = sum(hits[k.value] for k in mandatory)
    mandatory_completeness = 1.0 if m_total == 0 else m_hits / m_total

    all_sm = [(t, s) for t in w.twins.values() for s in t.submodels]
    own = sum(1 for t, s in all_sm if s.origin_bpn == t.host_bpn)
    licensed = sum(1 for t, s in all_sm if s.external_copy and s.policies)
    unlicensed = sum(
        1 for t, s in all_sm if s.origin_bpn != t.host_bpn and not (s.external_copy and s.policies)
    )
    twin_count = Counter(w.name_of(t.asset.catena_x_id) for t in w.twins.values())

    return RunMetrics(
        strategy=strategy,
        messages_by_kind={k.value: by_kind.get(k.value, 0) for k in MessageKind},
        event_messages={k.value: ev_msgs.get(k.value, 0) for k in MessageKind},
        poll_messages={k.value: poll_msgs.get(k.value, 0) for k in MessageKind},
        foreign_writes=foreign_writes,
        sources_per_asset=dict(sorted(sources.items())),
        mandatory_sources_per_asset=dict(sorted(msources.items())),
        completeness_after_loss=completeness,
        mandatory_completeness=mandatory_completeness,
        external_flag_count=sum(1 for _, s in all_sm if s.external_copy),
        staleness=staleness,
        twin_count_per_asset=dict(sorted(twin_count.items())),
        own_fraction=own / len(all_sm) if all_sm else 1.0,
        licensed_copies=licensed,
        unlicensed_foreign=unlicensed,
        notifications=sum(1 for _, fx in effects if fx["op"] == "notify"),
        pulls=sum(1 for _, fx in effects if fx["op"] == "pull"),
        mandatory_foreign_updates=mandatory_foreign,
        twin_creations=sum(1 for _, fx in effects if fx["op"] == "create_twin" and not fx["original"]),
        reshare_events=sum(1 for _, fx in effects if fx["op"] == "reshare"),
        denied_events=sum(1 for r in result.events if r["status"] == "denied"),
        phase_skips=sum(1 for _, fx in effects if fx["op"] == "phase_skip"),
        departed=sorted(w.departed),
    )


def grade(m: RunMetrics) -> dict[str, str]:
    if m.mandatory_completeness < CONSISTENCY_MIN_COMPLETENESS:
        consistency = "--"
    elif m.max_mandatory_sources <= CONSISTENCY_MAX_SOURCES:
        consistency = "++" if m.staleness <= CONSISTENCY_MAX_STALENESS else "+"
    else:
        consistency = "-"

    if m.foreign_writes > SOVEREIGNTY_MAX_FOREIGN_WRITES:
        sovereignty = "--"
    elif m.external_flag_count > m.licensed_copies:
        sovereignty = "-"
    else:
        sovereignty = "+"

    if m.foreign_writes > 0:
        ownership = "--"
    elif m.own_fraction >= OWNERSHIP_OWN_FRACTION_FOR_TOP:
        ownership = "++"
    elif m.unlicensed_foreign == 0:
        ownership = "+"
    else:
        ownership = "-"
    return {
        "consistency": consistency,
        "sovereignty": sovereignty,
        "ownership": ownership,
        "sharing": SHARING_LABEL[m.strategy],
    }


def _narrative(m: RunMetrics) -> list[str]:
    return [
        f"mandatory data hosts per asset (max): {m.max_mandatory_sources}; staleness: {m.staleness} events",
        f"writes into other parties' twins: {m.foreign_writes}",
        f"own data share: {m.own_fraction:.3f}; license-carrying copies: {m.licensed_copies}; "
        f"other foreign data: {m.unlicensed_foreign}",
        f"messages: {m.total_messages} (event path {sum(m.event_messages.values())}, "
        f"poll path {sum(m.poll_messages.values())})",
    ]


def _flatten(prefix: str, value: Any, out: list) -> None:
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], out)
    elif isinstance(value, list):
        out.append((prefix, ";".join(map(str, value))))
    elif isinstance(value, float):
        out.append((prefix, f"{value:.6f}"))
    else:
        out.append((prefix, str(value)))


def render_report(metrics: list[RunMetrics], fmt: str = "text") -> str:
    if not metrics:
        raise ValueError("at least one run is required")
    grades = [grade(m) for m in metrics]
    if fmt == "json":
        doc = {
            "runs": [{"metrics": m.to_dict(), "grades": g} for m, g in zip(metrics, grades)],
            "thresholds": thresholds(),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["strategy", "metric", "value"])
        for m, g in zip(metrics, grades):
            rows: list = []
            d = m.to_dict()
            d.pop("strategy")
            _flatten("", d, rows)
            _flatten("grade", g, rows)
            for k, v in rows:
                writer.writerow([m.strategy.value, k, v])
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    names = [m.strategy.value for m in metrics]
    head = ["Axis"] + names
    rows = [[AXIS_TITLES[a]] + [g[a] for g in grades] for a in AXES]
    rows.append([AXIS_TITLES["sharing"]] + [g["sharing"] for g in grades])
    widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]

    def line(cells):
        return " | ".join(c.ljust(wd) for c, wd in zip(cells, widths)).rstrip()

    out = [line(head), "-+-".join("-" * wd for wd in widths)]
    out += [line(r) for r in rows]
    for m in metrics:
        out += ["", f"[{m.strategy.value}]"] + [f"  {s}" for s in _narrative(m)]
    if len(metrics) > 1:
        out += ["", "Comparison"]
        by = {m.strategy: m for m in metrics}
        poll = {s.value: sum(m.poll_messages.values()) for s, m in by.items()}
        out.append("  poll-path messages: " + ", ".join(f"{k}={v}" for k, v in poll.items()))
        fw = {s.value: m.foreign_writes for s, m in by.items()}
        out.append("  foreign writes: " + ", ".join(f"{k}={v}" for k, v in fw.items()))
        mc = {s.value: f"{m.mandatory_completeness:.3f}" for s, m in by.items()}
        out.append("  mandatory completeness: " + ", ".join(f"{k}={v}" for k, v in mc.items()))
    return "\n".join(out) + "\n"


def thresholds() -> dict[str, Any]:
    return {
        "consistency_max_sources": CONSISTENCY_MAX_SOURCES,
        "consistency_max_staleness": CONSISTENCY_MAX_STALENESS,
        "consistency_min_completeness": CONSISTENCY_MIN_COMPLETENESS,
        "sovereignty_max_foreign_writes": SOVEREIGNTY_MAX_FOREIGN_WRITES,
        "ownership_own_fraction_for_top": OWNERSHIP_OWN_FRACTION_FOR_TOP,
    }
