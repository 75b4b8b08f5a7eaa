"""Deterministic scenario execution, invariant checks, log persistence and scale runs."""

from __future__ import annotations

import json
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from twinmesh.messages import Message
from twinmesh.model import END_OF_LIFE, CertificateKind, SemanticKind
from twinmesh.scenario import Scenario
from twinmesh.strategies import Engine, InvariantViolation, StrategyKind
from twinmesh.world import World


@dataclass
class SimulationResult:
    scenario: Scenario
    strategy: StrategyKind
    world: World
    events: list[dict[str, Any]]
    messages: list[Message]

    def event_lines(self) -> list[str]:
        return [json.dumps(r, sort_keys=True) for r in self.events]

    def message_lines(self) -> list[str]:
        return [json.dumps(m.to_dict(), sort_keys=True) for m in self.messages]


def build_world(scenario: Scenario) -> World:
    w = World(seed=scenario.seed)
    for s in scenario.stakeholders:
        w.stakeholders[s.bpn] = s
    for p in scenario.policies:
        w.policies.declare(p)
    w.mandatory_kinds = tuple(scenario.mandatory_copy_kinds)
    return w


def check_invariants(w: World) -> None:
    """Raise InvariantViolation if the world is internally inconsistent."""
    rebuilt = w.network.rebuild_index()
    if rebuilt != w.network.discovery.index:
        raise InvariantViolation("discovery index differs from a rebuild over available registries")
    for t in w.twins.values():
        seen: Counter = Counter()
        for s in t.submodels:
            seen[s.semantic_kind] += 1
            if s.version != seen[s.semantic_kind]:
                raise InvariantViolation(f"version gap in {t.twin_id}/{s.semantic_kind.value}")
            # checked against the copier: a successor may later host copies of its own data
            if s.external_copy and s.origin_bpn == s.writer_bpn:
                raise InvariantViolation(f"external copy in {t.twin_id} originates from its copier")
    open_children: Counter = Counter(e.child for e in w.bom.entries if e.open)
    if open_children and max(open_children.values()) > 1:
        raise InvariantViolation("a child is attached to more than one parent")
    decommissioned = {c.subject for c in w.certificates if c.kind is CertificateKind.Decommissioning}
    for cx, status in w.asset_status.items():
        if status in END_OF_LIFE and cx not in decommissioned:
            raise InvariantViolation(f"{w.name_of(cx)} reached end of life without a certificate")
    # the reverse direction allows a second life: a certified part may be back in service
    dismantled_once = {
        t.asset.catena_x_id
        for t in w.twins.values()
        for s in t.submodels
        if s.semantic_kind is SemanticKind.StatusFlag and s.payload["status"] == "Dismantled"
    }
    if not decommissioned <= dismantled_once:
        raise InvariantViolation("a decommissioning certificate exists for an asset never dismantled")
    for cx in w.assets:
        kms = sorted(
            (s.event_seq, s.payload["km"])
            for t in w.twins_of(cx)
            for s in t.submodels
            if s.semantic_kind is SemanticKind.Mileage and not s.external_copy
        )
        for (_, a), (_, b) in zip(kms, kms[1:]):
            if b < a:
                raise InvariantViolation(f"mileage of {w.name_of(cx)} went down")


def run(
    scenario: Scenario,
    strategy: StrategyKind | str,
    *,
    poll: bool = True,
    check_each_event: bool = False,
) -> SimulationResult:
    """Apply every event of ``scenario`` under ``strategy``.

    Event-level errors are recorded as denied events. Only invariant
    violations (bugs) raise.
    """
    strategy = StrategyKind(strategy)
    world = build_world(scenario)
    engine = Engine(
        world,
        strategy,
        pull_delay=scenario.pull_delay,
        poll_consumer=scenario.poll_consumer if poll else None,
    )
    for ev in scenario.ordered_events():
        engine.apply(ev)
        if check_each_event:
            check_invariants(world)
    engine.drain()
    check_invariants(world)
    return SimulationResult(scenario, strategy, world, engine.records, engine.messages)


def save_logs(result: SimulationResult, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": out / "events.jsonl",
        "messages": out / "messages.jsonl",
        "world": out / "world.json",
    }
    paths["events"].write_text("".join(line + "\n" for line in result.event_lines()), encoding="utf-8")
    paths["messages"].write_text("".join(line + "\n" for line in result.message_lines()), encoding="utf-8")
    paths["world"].write_text(
        json.dumps(result.world.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return paths


# --------------------------------------------------------------------------
# scale runs


def _run_chunk(args) -> list[dict[str, int]]:
    template_dict, strategy, seeds = args
    template = Scenario.from_dict(template_dict)
    out = []
    for seed in seeds:
        template.seed = seed
        res = run(template, strategy, poll=False)
        counts = Counter(m.kind.value for m in res.messages)
        counts["_events"] = len(res.events)
        counts["_denied"] = sum(1 for r in res.events if r["status"] == "denied")
        out.append(dict(counts))
    return out


@dataclass
class ScaleReport:
    n_vehicles: int
    strategy: StrategyKind
    total_messages: int
    messages_by_kind: dict[str, int]
    per_vehicle_min: int
    per_vehicle_max: int
    denied_events: int
    fit_slope: float
    fit_intercept: float
    fit_r2: float
    wall_seconds: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict[str, Any]:
        """Artifact form. Wall time is left out so that files stay reproducible."""
        return {
            "n_vehicles": self.n_vehicles,
            "strategy": self.strategy.value,
            "total_messages": self.total_messages,
            "messages_by_kind": dict(sorted(self.messages_by_kind.items())),
            "per_vehicle_messages": {"min": self.per_vehicle_min, "max": self.per_vehicle_max},
            "denied_events": self.denied_events,
            "linear_fit": {
                "slope": round(self.fit_slope, 9),
                "intercept": round(self.fit_intercept, 6),
                "r2": round(self.fit_r2, 12),
            },
        }


def scale_run(
    template: Scenario,
    n_vehicles: int,
    strategy: StrategyKind | str,
    *,
    workers: Optional[int] = None,
) -> ScaleReport:
    """Run ``n_vehicles`` independent copies of a one-vehicle template.

    World ``i`` uses seed ``template.seed + i``, so identifiers differ between
    worlds while behaviour does not. Polling is off: the scale count is the
    write-path traffic of the lifecycle itself.
    """
    if n_vehicles < 1:
        raise ValueError("n_vehicles must be >= 1")
    strategy = StrategyKind(strategy)
    started = time.perf_counter()
    seeds = [template.seed + i for i in range(n_vehicles)]
    workers = workers or os.cpu_count() or 1
    workers = max(1, min(workers, n_vehicles))
    tdict = template.to_dict()
    if workers == 1:
        per_world = _run_chunk((tdict, strategy, seeds))
    else:
        size = -(-n_vehicles // (workers * 4))
        chunks = [(tdict, strategy, seeds[i : i + size]) for i in range(0, n_vehicles, size)]
        per_world = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_chunk, chunks):
                per_world.extend(part)
    by_kind: Counter = Counter()
    totals = []
    denied = 0
    for c in per_world:
        denied += c.get("_denied", 0)
        msgs = {k: v for k, v in c.items() if not k.startswith("_")}
        by_kind.update(msgs)
        totals.append(sum(msgs.values()))
    cumulative = np.cumsum(totals)
    xs = np.arange(1, n_vehicles + 1)
    if n_vehicles >= 2:
        slope, intercept = np.polyfit(xs, cumulative, 1)
        pred = slope * xs + intercept
        ss_res = float(np.sum((cumulative - pred) ** 2))
        ss_tot = float(np.sum((cumulative - cumulative.mean()) ** 2))
        r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    else:
        slope, intercept, r2 = float(totals[0]), 0.0, 1.0
    return ScaleReport(
        n_vehicles=n_vehicles,
        strategy=strategy,
        total_messages=int(sum(totals)),
        messages_by_kind=dict(by_kind),
        per_vehicle_min=min(totals),
        per_vehicle_max=max(totals),
        denied_events=denied,
        fit_slope=float(slope),
        fit_intercept=float(intercept),
        fit_r2=float(r2),
        wall_seconds=time.perf_counter() - started,
    )
