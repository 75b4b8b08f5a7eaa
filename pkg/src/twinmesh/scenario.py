"""Scenario definition, JSON (de)serialization and built-in scenarios."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from twinmesh.events import PAYLOAD_SCHEMA, EventKind, LifecycleEvent
from twinmesh.model import DEFAULT_MANDATORY_KINDS, Role, SemanticKind, Stakeholder
from twinmesh.policy import ANY, Action, Policy


class ParseError(Exception):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ValidationError(Exception):
    def __init__(self, which: str, detail: str = ""):
        super().__init__(f"{which}: {detail}" if detail else which)
        self.which = which
        self.detail = detail


@dataclass
class Scenario:
    name: str
    seed: int = 0
    ticks_per_year: int = 10
    stakeholders: list[Stakeholder] = field(default_factory=list)
    policies: list[Policy] = field(default_factory=list)
    mandatory_copy_kinds: tuple[SemanticKind, ...] = DEFAULT_MANDATORY_KINDS
    events: list[LifecycleEvent] = field(default_factory=list)
    poll_consumer: Optional[str] = None
    pull_delay: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "seed": self.seed,
            "ticks_per_year": self.ticks_per_year,
            "stakeholders": [
                {"bpn": s.bpn, "role": s.role.value, "authorized": s.authorized} for s in self.stakeholders
            ],
            "policies": [p.to_dict() for p in self.policies],
            "mandatory_copy_kinds": [k.value for k in self.mandatory_copy_kinds],
            "poll_consumer": self.poll_consumer,
            "pull_delay": self.pull_delay,
            "events": [e.to_dict() for e in self.events],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Scenario":
        return cls(
            name=d["name"],
            seed=int(d.get("seed", 0)),
            ticks_per_year=int(d.get("ticks_per_year", 10)),
            stakeholders=[
                Stakeholder(s["bpn"], Role(s["role"]), bool(s.get("authorized", False)))
                for s in d.get("stakeholders", [])
            ],
            policies=[Policy.from_dict(p) for p in d.get("policies", [])],
            mandatory_copy_kinds=tuple(
                SemanticKind(k) for k in d.get("mandatory_copy_kinds", [k.value for k in DEFAULT_MANDATORY_KINDS])
            ),
            events=[LifecycleEvent.from_dict(e) for e in d.get("events", [])],
            poll_consumer=d.get("poll_consumer"),
            pull_delay=int(d.get("pull_delay", 0)),
        )

    def with_seed(self, seed: int) -> "Scenario":
        return Scenario.from_dict({**self.to_dict(), "seed": seed})

    def ordered_events(self) -> list[LifecycleEvent]:
        """Events in execution order: by time, same-tick ties by actor bpn."""
        return sorted(self.events, key=lambda e: (e.at, e.actor))


def validate(s: Scenario) -> Scenario:
    bpns = [x.bpn for x in s.stakeholders]
    if len(set(bpns)) != len(bpns):
        raise ValidationError("duplicate stakeholder", ", ".join(sorted({b for b in bpns if bpns.count(b) > 1})))
    declared = set(bpns)
    if s.ticks_per_year < 1:
        raise ValidationError("ticks_per_year must be positive")
    if s.pull_delay < 0:
        raise ValidationError("pull_delay must be non-negative")
    if s.poll_consumer is not None and s.poll_consumer not in declared:
        raise ValidationError("undeclared actor", f"poll consumer {s.poll_consumer}")
    for p in s.policies:
        if p.owner_bpn not in declared:
            raise ValidationError("undeclared actor", f"policy owner {p.owner_bpn}")
    last = None
    for i, e in enumerate(s.events):
        if e.actor not in declared:
            raise ValidationError("undeclared actor", f"event {i} actor {e.actor}")
        if e.at < 0:
            raise ValidationError("negative time", f"event {i}")
        if last is not None and e.at < last:
            raise ValidationError("events out of time order", f"event {i} at {e.at} < {last}")
        last = e.at
        required, optional = PAYLOAD_SCHEMA[e.kind]
        keys = set(e.payload)
        if not required <= keys or not keys <= required | optional:
            raise ValidationError(
                "payload schema", f"event {i} ({e.kind.value}) keys {sorted(keys)}, required {sorted(required)}"
            )
        for ref in ("buyer", "new_owner", "bpn", "transfer_to", "customer"):
            who = e.payload.get(ref)
            if who is not None and who not in declared:
                raise ValidationError("undeclared actor", f"event {i} {ref} {who}")
    return s


def _line_of(text: str, needle: str, start: int = 0) -> int:
    idx = text.find(needle, start)
    if idx < 0:
        return 1
    return text.count("\n", 0, idx) + 1


def parse_scenario(text: str) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, exc.msg) from None
    if not isinstance(raw, dict):
        raise ParseError(1, "top level must be an object")
    if "name" not in raw:
        raise ParseError(1, "missing field 'name'")
    events_at = text.find('"events"')
    for item in raw.get("stakeholders", []):
        try:
            Role(item["role"])
        except (KeyError, ValueError, TypeError):
            bad = item.get("role") if isinstance(item, dict) else item
            raise ParseError(_line_of(text, json.dumps(bad)), f"invalid role {bad!r}") from None
    for k in raw.get("mandatory_copy_kinds", []):
        try:
            SemanticKind(k)
        except ValueError:
            raise ParseError(_line_of(text, json.dumps(k)), f"unknown semantic kind {k!r}") from None
    for i, ev in enumerate(raw.get("events", [])):
        if not isinstance(ev, dict):
            raise ParseError(_line_of(text, '"events"'), f"event {i} is not an object")
        kind = ev.get("kind")
        try:
            EventKind(kind)
        except ValueError:
            line = _line_of(text, f'"kind": {json.dumps(kind)}', max(events_at, 0))
            if line == 1:
                line = _line_of(text, json.dumps(kind), max(events_at, 0))
            raise ParseError(line, f"unknown event kind {kind!r}") from None
        for key in ("at", "actor"):
            if key not in ev:
                raise ParseError(_line_of(text, json.dumps(kind), max(events_at, 0)), f"event {i} misses {key!r}")
        if not isinstance(ev["at"], int):
            raise ParseError(_line_of(text, f'"at": {json.dumps(ev["at"])}'), f"event {i} time must be an integer")
    try:
        return Scenario.from_dict(raw)
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(1, f"schema error: {exc}") from None


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    text = text.lstrip("\ufeff")  # tolerate a byte-order mark
    return validate(parse_scenario(text))


def dump_scenario(s: Scenario) -> str:
    return json.dumps(s.to_dict(), indent=2, sort_keys=True) + "\n"


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(dump_scenario(s), encoding="utf-8")


# --------------------------------------------------------------------------
# built-in scenarios

VIN1 = "WVX0000000000001"
VIN2 = "WVX0000000000002"

BUILTIN_STAKEHOLDERS = (
    Stakeholder("OEM", Role.OEM),
    Stakeholder("SUPPLIER-A", Role.Supplier),
    Stakeholder("SUPPLIER-B", Role.Supplier),
    Stakeholder("SUPPLIER-C", Role.Supplier),
    Stakeholder("CONSUMER", Role.Consumer),
    Stakeholder("REPAIR1", Role.RepairShop, authorized=True),  # OEM-certified
    Stakeholder("REPAIR2", Role.RepairShop),  # independent workshop
    Stakeholder("DISMANTLER", Role.Dismantler, authorized=True),
    Stakeholder("RECYCLER", Role.Recycler),
)


def default_policies(stakeholders, mandatory=DEFAULT_MANDATORY_KINDS) -> list[Policy]:
    """Everybody lets anyone read; producers also let anyone copy mandatory data."""
    out = []
    for s in stakeholders:
        out.append(Policy(s.bpn, ANY, frozenset({Action.Read})))
        if s.role in (Role.OEM, Role.Supplier):
            for k in mandatory:
                out.append(Policy(s.bpn, ANY, frozenset({Action.Read, Action.Copy}), semantic_kind=k))
    return out


def _ev(at, actor, kind, **payload) -> LifecycleEvent:
    return LifecycleEvent(at, actor, EventKind(kind), payload)


def builtin_scenario(
    usage_years: int = 20,
    *,
    ticks_per_year: int = 10,
    km_per_year: int = 15_000,
    poll_consumer: Optional[str] = "OEM",
    seed: int = 0,
) -> Scenario:
    """Vehicle lifecycle: production, 20 years of use with two repairs, end of life, second life."""
    if usage_years < 2:
        raise ValueError("usage_years must be at least 2")
    T = ticks_per_year
    sold = 5

    def km_at(t: int) -> int:
        return km_per_year * (t - sold) // T

    battery_t = sold + (usage_years * 2 // 5) * T + 3
    gearbox_t = sold + (usage_years * 7 // 10) * T + 3
    end_t = sold + usage_years * T
    ev = [
        _ev(0, "SUPPLIER-A", "ProduceComponent", asset="gearbox_A1", part_type="gearbox", customer="OEM"),
        _ev(0, "SUPPLIER-B", "ProduceComponent", asset="seat_B1", part_type="seat", customer="OEM"),
        _ev(0, "SUPPLIER-B", "ProduceComponent", asset="display_B1", part_type="display", customer="OEM"),
        _ev(0, "SUPPLIER-C", "ProduceComponent", asset="battery_C1", part_type="battery", customer="OEM"),
        _ev(1, "SUPPLIER-A", "ProduceComponent", asset="gearbox_A2", part_type="gearbox", customer="OEM"),
        _ev(1, "SUPPLIER-C", "ProduceComponent", asset="battery_C2", part_type="battery", customer="OEM"),
        _ev(2, "OEM", "AssembleVehicle", asset="vehicle1", vin=VIN1,
            components=["gearbox_A1", "seat_B1", "display_B1", "battery_C1"]),
        _ev(sold, "OEM", "Sell", asset="vehicle1", buyer="CONSUMER"),
    ]
    for y in range(1, usage_years + 1):
        t = sold + y * T
        ev.append(_ev(t, "OEM", "MileageUpdate", asset="vehicle1", km=km_at(t)))
    ev += [
        _ev(battery_t, "REPAIR1", "RepairExchange", asset="vehicle1", remove="battery_C1", install="battery_C2",
            km=km_at(battery_t), overhaul=True, state_of_health=71.5, notes="cell module replaced"),
        _ev(gearbox_t, "REPAIR2", "RepairExchange", asset="vehicle1", remove="gearbox_A1", install="gearbox_A2",
            km=km_at(gearbox_t), overhaul=False, notes="gearbox swapped"),
        _ev(end_t + 2, "DISMANTLER", "Dismantle", asset="vehicle1", km=km_at(end_t)),
        _ev(end_t + 3, "DISMANTLER", "CeDecision", asset="seat_B1", strategy="Reuse"),
        _ev(end_t + 3, "DISMANTLER", "CeDecision", asset="display_B1", strategy="Refurbish"),
        _ev(end_t + 3, "DISMANTLER", "CeDecision", asset="gearbox_A2", strategy="Remanufacture"),
        _ev(end_t + 3, "DISMANTLER", "CeDecision", asset="battery_C2", strategy="Recycle"),
        _ev(end_t + 5, "RECYCLER", "RecyclingReport", asset="battery_C2", material="lithium",
            quota=0.7, secondary_material_fraction=0.25),
        _ev(end_t + 6, "SUPPLIER-C", "ProduceComponent", asset="battery_C3", part_type="battery", customer="OEM"),
        _ev(end_t + 7, "OEM", "AssembleVehicle", asset="vehicle2", vin=VIN2, components=["battery_C3"]),
        _ev(end_t + 8, "OEM", "RemanufactureIntoVehicle", asset="gearbox_A2", vehicle="vehicle2"),
        _ev(end_t + 8 + T, "OEM", "MileageUpdate", asset="vehicle2", km=km_per_year * 4 // 5),
        _ev(end_t + 9 + T, "REPAIR1", "Overhaul", asset="gearbox_A2", state_of_health=88.0),
    ]
    stakeholders = list(BUILTIN_STAKEHOLDERS)
    return Scenario(
        name=f"lifecycle-{usage_years}y",
        seed=seed,
        ticks_per_year=T,
        stakeholders=stakeholders,
        policies=default_policies(stakeholders),
        events=sorted(ev, key=lambda e: e.at),
        poll_consumer=poll_consumer,
    )


def single_vehicle_template(usage_years: int = 20) -> Scenario:
    """One-vehicle lifecycle used as the unit of scale runs (no polling)."""
    s = builtin_scenario(usage_years, poll_consumer=None)
    # drop the second-life vehicle so the template holds exactly one vehicle
    cut = next(i for i, e in enumerate(s.events) if e.payload.get("asset") == "battery_C3")
    s.events = s.events[:cut]
    s.name = f"single-vehicle-{usage_years}y"
    return s


def random_scenario(seed: int, *, n_vehicles: int = 2, years: int = 12, invalid_rate: float = 0.08) -> Scenario:
    """Seeded random lifecycle scenario.

    The generator tracks a rough physical state so most events are valid;
    a fraction of deliberately invalid events (mileage regressions, wrong
    roles, double attachments) exercises denial handling. Provider losses
    always name a successor.
    """
    rng = random.Random(seed)
    stakeholders = [
        Stakeholder("OEM", Role.OEM),
        Stakeholder("SUP-A", Role.Supplier),
        Stakeholder("SUP-B", Role.Supplier),
        Stakeholder("OWNER", Role.Consumer),
        Stakeholder("OWNER2", Role.Consumer),
        Stakeholder("SHOP-1", Role.RepairShop, True),
        Stakeholder("SHOP-2", Role.RepairShop),
        Stakeholder("SHOP-3", Role.RepairShop),
        Stakeholder("DISM", Role.Dismantler, True),
        Stakeholder("DISM-X", Role.Dismantler, False),
        Stakeholder("RECY", Role.Recycler),
        Stakeholder("REMAN", Role.Remanufacturer),
    ]
    suppliers = ["SUP-A", "SUP-B"]
    shops = ["SHOP-1", "SHOP-2", "SHOP-3"]
    events: list[LifecycleEvent] = []
    t = 0
    parts_free: list[str] = []
    counter = 0

    def new_part(at):
        nonlocal counter
        counter += 1
        sup = rng.choice(suppliers)
        name = f"p{counter}_{sup}"
        events.append(_ev(at, sup, "ProduceComponent", asset=name, part_type=rng.choice(["gear", "cell", "seat"])))
        parts_free.append(name)
        return name

    vehicles = {}
    for v in range(n_vehicles):
        comps = [new_part(t) for _ in range(rng.randint(1, 3))]
        for c in comps:
            parts_free.remove(c)
        t += 1
        name = f"veh{v}"
        events.append(_ev(t, "OEM", "AssembleVehicle", asset=name, vin=f"VIN{seed:05d}{v:03d}", components=list(comps)))
        vehicles[name] = {"km": 0, "parts": comps, "alive": True}
        t += 1
        events.append(_ev(t, "OEM", "Sell", asset=name, buyer=rng.choice(["OWNER", "OWNER2"])))
    for _ in range(rng.randint(2, 5)):
        new_part(t)
    lost = set()
    dismantled: list[str] = []
    for _ in range(years * 3):
        t += rng.randint(1, 4)
        alive = [v for v, st in vehicles.items() if st["alive"]]
        if not alive:
            break
        v = rng.choice(alive)
        st = vehicles[v]
        roll = rng.random()
        if rng.random() < invalid_rate:
            bad = rng.choice(["regress", "role", "attach", "ce"])
            if bad == "regress" and st["km"] > 0:
                events.append(_ev(t, "OEM", "MileageUpdate", asset=v, km=st["km"] - 1))
            elif bad == "role":
                events.append(_ev(t, "OWNER", "Dismantle", asset=v))
            elif bad == "attach" and st["parts"]:
                events.append(_ev(t, "OEM", "AssembleVehicle", asset=f"dup{t}", vin=f"DUP{t}", components=[st["parts"][0]]))
            else:
                events.append(_ev(t, "DISM", "CeDecision", asset=st["parts"][0] if st["parts"] else v, strategy="Reuse"))
            continue
        if roll < 0.35:
            st["km"] += rng.randint(1000, 20000)
            actor = rng.choice(["OEM", "OEM", rng.choice(shops)])
            if actor in lost:
                actor = "OEM"
            events.append(_ev(t, actor, "MileageUpdate", asset=v, km=st["km"]))
        elif roll < 0.6 and st["parts"] and parts_free:
            shop = rng.choice([s for s in shops if s not in lost] or ["SHOP-1"])
            out = rng.choice(st["parts"])
            inn = rng.choice(parts_free)
            st["km"] += rng.randint(0, 5000)
            payload = {"asset": v, "remove": out, "install": inn, "km": st["km"], "overhaul": rng.random() < 0.5}
            if payload["overhaul"] and rng.random() < 0.7:
                payload["state_of_health"] = float(rng.randint(40, 100))
            events.append(LifecycleEvent(t, shop, EventKind.RepairExchange, payload))
            st["parts"].remove(out)
            st["parts"].append(inn)
            parts_free.remove(inn)
            parts_free.append(out)
        elif roll < 0.68 and parts_free:
            part = rng.choice(parts_free)
            who = rng.choice([s for s in shops if s not in lost] or ["REMAN"])
            events.append(_ev(t, who, "Overhaul", asset=part, state_of_health=float(rng.randint(30, 100))))
        elif roll < 0.74:
            new_part(t)
        elif roll < 0.8:
            events.append(_ev(t, "OEM", "OwnershipTransfer", asset=rng.choice(st["parts"] or [v]),
                              new_owner=rng.choice(["OWNER", "OWNER2", "REMAN"])))
        elif roll < 0.84 and not lost:
            gone = rng.choice(shops)
            heir = rng.choice([s for s in shops if s != gone])
            events.append(_ev(t, gone, "ProviderLoss", transfer_to=heir))
            lost.add(gone)
        elif roll < 0.92:
            payload = {"asset": v}
            if rng.random() < 0.5:
                st["km"] += rng.randint(0, 3000)
                payload["km"] = st["km"]
            events.append(LifecycleEvent(t, "DISM", EventKind.Dismantle, payload))
            st["alive"] = False
            dismantled += st["parts"]
            for p in st["parts"]:
                t += 1
                strategy = rng.choice(["Reuse", "Remanufacture", "Refurbish", "Repurpose", "Recycle", "Recover"])
                events.append(_ev(t, "DISM", "CeDecision", asset=p, strategy=strategy))
                if strategy == "Recycle" and rng.random() < 0.8:
                    t += 1
                    events.append(_ev(t, "RECY", "RecyclingReport", asset=p, material="steel",
                                      quota=round(rng.random(), 3), secondary_material_fraction=round(rng.random(), 3)))
                if strategy in ("Reuse", "Remanufacture", "Refurbish", "Repurpose"):
                    others = [x for x, s2 in vehicles.items() if s2["alive"]]
                    if others and rng.random() < 0.6:
                        t += 1
                        target = rng.choice(others)
                        events.append(_ev(t, rng.choice(["OEM", "REMAN"]), "RemanufactureIntoVehicle",
                                          asset=p, vehicle=target))
                        vehicles[target]["parts"].append(p)
        else:
            events.append(_ev(t, rng.choice(["OEM", "OEM", "OWNER"]), "Sell", asset=v, buyer=rng.choice(["OWNER", "OWNER2"])))
    return Scenario(
        name=f"random-{seed}",
        seed=seed,
        stakeholders=stakeholders,
        policies=default_policies(stakeholders),
        events=events,
    )


__all__ = [
    "ParseError",
    "Scenario",
    "ValidationError",
    "builtin_scenario",
    "default_policies",
    "dump_scenario",
    "load_scenario",
    "parse_scenario",
    "random_scenario",
    "save_scenario",
    "single_vehicle_template",
    "validate",
]
