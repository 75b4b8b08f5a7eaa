"""Lifecycle events and their strategy-independent meaning.

``plan_event`` validates an event against the physical state of the world
and works out which submodel updates it produces. It never mutates the
world; the returned plan carries the physical effects to apply on commit.
Where the updates end up (which twin, which registry) is decided by the
update strategy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from twinmesh.model import (
    CE_OUTCOME,
    END_OF_LIFE,
    AlreadyAttached,
    AssetKind,
    CeStrategyKind,
    CertificateKind,
    DuplicateTwin,
    IllegalTransition,
    InvalidEvent,
    LifecyclePhase,
    NotAttached,
    Role,
    RoleMismatch,
    SemanticKind,
    Status,
    UnknownAsset,
    check_transition,
    status_payload,
)
from twinmesh.registry import RegistryUnavailable
from twinmesh.world import World, certificate_payload, check_certificate_role, check_mileage


class EventKind(str, enum.Enum):
    ProduceComponent = "ProduceComponent"
    AssembleVehicle = "AssembleVehicle"
    Sell = "Sell"
    RepairExchange = "RepairExchange"
    Overhaul = "Overhaul"
    MileageUpdate = "MileageUpdate"
    Dismantle = "Dismantle"
    CeDecision = "CeDecision"
    RecyclingReport = "RecyclingReport"
    RemanufactureIntoVehicle = "RemanufactureIntoVehicle"
    ProviderLoss = "ProviderLoss"
    OwnershipTransfer = "OwnershipTransfer"


# kind -> (required payload keys, optional payload keys)
PAYLOAD_SCHEMA: dict[EventKind, tuple[frozenset, frozenset]] = {
    EventKind.ProduceComponent: (
        frozenset({"asset", "part_type"}),
        frozenset({"part_instance_id", "asset_kind", "customer"}),
    ),
    EventKind.AssembleVehicle: (frozenset({"asset", "vin", "components"}), frozenset()),
    EventKind.Sell: (frozenset({"asset", "buyer"}), frozenset()),
    EventKind.RepairExchange: (
        frozenset({"asset", "remove", "install"}),
        frozenset({"km", "overhaul", "notes", "state_of_health"}),
    ),
    EventKind.Overhaul: (frozenset({"asset"}), frozenset({"notes", "state_of_health"})),
    EventKind.MileageUpdate: (frozenset({"asset", "km"}), frozenset()),
    EventKind.Dismantle: (frozenset({"asset"}), frozenset({"km"})),
    EventKind.CeDecision: (frozenset({"asset", "strategy"}), frozenset()),
    EventKind.RecyclingReport: (
        frozenset({"asset", "material", "quota"}),
        frozenset({"secondary_material_fraction"}),
    ),
    EventKind.RemanufactureIntoVehicle: (frozenset({"asset", "vehicle"}), frozenset()),
    EventKind.ProviderLoss: (frozenset(), frozenset({"bpn", "transfer_to"})),
    EventKind.OwnershipTransfer: (frozenset({"asset", "new_owner"}), frozenset()),
}

EVENT_ROLES: dict[EventKind, Optional[frozenset]] = {
    EventKind.ProduceComponent: frozenset({Role.Supplier, Role.OEM}),
    EventKind.AssembleVehicle: frozenset({Role.OEM}),
    EventKind.Sell: frozenset({Role.OEM, Role.Consumer}),
    EventKind.RepairExchange: frozenset({Role.RepairShop}),
    EventKind.Overhaul: frozenset({Role.RepairShop, Role.Supplier, Role.Remanufacturer}),
    EventKind.MileageUpdate: frozenset({Role.OEM, Role.RepairShop, Role.Consumer}),
    EventKind.Dismantle: frozenset({Role.Dismantler}),
    EventKind.CeDecision: frozenset({Role.Dismantler, Role.Remanufacturer}),
    EventKind.RecyclingReport: frozenset({Role.Recycler, Role.Dismantler}),
    EventKind.RemanufactureIntoVehicle: frozenset({Role.OEM, Role.Remanufacturer}),
    EventKind.ProviderLoss: None,
    EventKind.OwnershipTransfer: None,
}

# event kinds that write a new vehicle BoM version
BOM_EVENTS = frozenset(
    {
        EventKind.AssembleVehicle,
        EventKind.RepairExchange,
        EventKind.Dismantle,
        EventKind.RemanufactureIntoVehicle,
    }
)


@dataclass(frozen=True)
class LifecycleEvent:
    at: int
    actor: str
    kind: EventKind
    payload: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"at": self.at, "actor": self.actor, "kind": self.kind.value, "payload": self.payload}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "LifecycleEvent":
        return cls(int(d["at"]), d["actor"], EventKind(d["kind"]), dict(d.get("payload", {})))


@dataclass(frozen=True)
class NewAsset:
    name: str
    kind: AssetKind
    ids: dict[str, str]
    phase: LifecyclePhase
    spec_issuer: Optional[str] = None


@dataclass(frozen=True)
class Update:
    """One piece of information produced by an event: a submodel for an asset."""

    asset: str  # asset name
    kind: SemanticKind
    payload: dict[str, Any]


@dataclass
class Plan:
    event: LifecycleEvent
    created: list[NewAsset] = field(default_factory=list)
    updates: list[Update] = field(default_factory=list)
    phases: dict[str, LifecyclePhase] = field(default_factory=dict)
    effects: list[Callable[[World], None]] = field(default_factory=list)
    certificates: list[tuple[CertificateKind, str]] = field(default_factory=list)

    @property
    def actor(self) -> str:
        return self.event.actor

    def touched(self) -> list[str]:
        """Assets the actor writes to, in first-touch order."""
        seen: dict[str, None] = {}
        for u in self.updates:
            seen.setdefault(u.asset, None)
        for name in self.phases:
            seen.setdefault(name, None)
        return list(seen)

    def update(self, asset: str, kind: SemanticKind, payload: dict[str, Any]) -> None:
        self.updates.append(Update(asset, kind, payload))


def validate_payload(event: LifecycleEvent) -> None:
    required, optional = PAYLOAD_SCHEMA[event.kind]
    keys = set(event.payload)
    missing = required - keys
    if missing:
        raise InvalidEvent(f"{event.kind.value} payload misses {sorted(missing)}")
    unknown = keys - required - optional
    if unknown:
        raise InvalidEvent(f"{event.kind.value} payload has unknown keys {sorted(unknown)}")


def _pid(world: World, cx: str) -> str:
    a = world.assets[cx]
    return a.ids.get("partInstanceId", a.name)


def _children_payload(world: World, children: list[str]) -> dict[str, Any]:
    kids = [{"part_instance_id": _pid(world, c), "supplier": world.assets[c].manufacturer_bpn} for c in children]
    kids.sort(key=lambda d: (d["part_instance_id"], d["supplier"]))
    return {"children": kids}


def _asset(world: World, name: str, kind: Optional[AssetKind] = None) -> str:
    cx = world.names.get(name)
    if cx is None:
        raise UnknownAsset(name)
    if kind is not None and world.assets[cx].asset_kind is not kind:
        raise InvalidEvent(f"{name} is not a {kind.value}")
    return cx


def _status(world: World, cx: str) -> Status:
    return world.asset_status.get(cx, Status.NONE)


def _set_status(plan: Plan, world: World, name: str, cx: str, status: Status, actor: str, at: int) -> None:
    check_transition(_status(world, cx), status)
    plan.update(name, SemanticKind.StatusFlag, status_payload(status, actor, at))

    def effect(w: World, cx=cx, status=status) -> None:
        w.asset_status[cx] = status

    plan.effects.append(effect)


def _set_mileage(plan: Plan, world: World, name: str, cx: str, km: float) -> None:
    check_mileage(world, cx, km)
    plan.update(name, SemanticKind.Mileage, {"km": km})

    def effect(w: World, cx=cx, km=km) -> None:
        w.mileage[cx] = km

    plan.effects.append(effect)


def plan_event(world: World, event: LifecycleEvent) -> Plan:
    validate_payload(event)
    actor = world.stakeholder(event.actor)
    allowed = EVENT_ROLES[event.kind]
    if allowed is not None and actor.role not in allowed:
        raise RoleMismatch(f"{event.actor} ({actor.role.value}) cannot perform {event.kind.value}")
    if event.actor in world.departed:
        raise RegistryUnavailable(f"{event.actor} has left the network")
    handler = _HANDLERS.get(event.kind)
    plan = Plan(event)
    if handler is not None:
        try:
            handler(world, event, plan)
        except (ValueError, TypeError, KeyError) as exc:
            raise InvalidEvent(f"{event.kind.value}: malformed payload ({exc})") from None
    return plan


def _produce(world: World, ev: LifecycleEvent, plan: Plan) -> None:
    p = ev.payload
    name = p["asset"]
    if name in world.names:
        raise DuplicateTwin(f"asset {name} already exists")
    kind = AssetKind(p.get("asset_kind", AssetKind.Component.value))
    if kind is AssetKind.Vehicle:
        raise InvalidEvent("vehicles are created by AssembleVehicle")
    ids = {"partInstanceId": str(p.get("part_instance_id", name))}
    plan.created.append(NewAsset(name, kind, ids, LifecyclePhase.AsDelivered, p.get("customer")))


def _assemble(world: World, ev: LifecycleEvent, plan: Plan) -> None:
    p = ev.payload
    name = p["asset"]
    if name in world.names:
        raise DuplicateTwin(f"asset {name} already exists")
    comps = [_asset(world, c) for c in p["components"]]
    if len(set(comps)) != len(comps):
        raise AlreadyAttached("component listed twice")
    for c in comps:
        if world.bom.parent_of(c) is not None:
            raise AlreadyAttached(f"{world.assets[c].name} is already attached")
        if _status(world, c) in (Status.Dismantled, Status.Recycled, Status.TransferredToWaste):
            raise IllegalTransition(f"{world.assets[c].name} is at end of life")
    plan.created.append(NewAsset(name, AssetKind.Vehicle, {"VIN": str(p["vin"])}, LifecyclePhase.AsBuilt))
    plan.update(name, SemanticKind.BomAsBuilt, _children_payload(world, comps))

    def effect(w: World) -> None:
        v = w.names[name]
        w.odometer[v] = 0.0
        for c in comps:
            w.bom.attach(v, c, w.assets[c].manufacturer_bpn, ev.at)
            w.attach_odo[c] = 0.0

    plan.effects.append(effect)


def _sell(world: World, ev: LifecycleEvent, plan: Plan) -> None:
    name = ev.payload["asset"]
    cx = _asset(world, name)
    buyer = ev.payload["buyer"]
    world.stakeholder(buyer)
    _set_status(plan, world, name, cx, Status.Sold, ev.actor, ev.at)
    plan.phases[name] = LifecyclePhase.AsUsed

    def effect(w: World) -> None:
        w.asset_owner[cx] = buyer

    plan.effects.append(effect)


def _mileage(world: World, ev: LifecycleEvent, plan: Plan) -> None:
    name = ev.payload["asset"]
    cx = _asset(world, name, AssetKind.Vehicle)
    km = float(ev.payload["km"])
    _set_mileage(plan, world, name, cx, km)

    def effect(w: World) -> None:
        w.odometer[cx] = km

    plan.effects.append(effect)


def _repair_exchange(world: World, ev: LifecycleEvent, plan: Plan) -> None:
    p = ev.payload
    vname, rname, iname = p["asset"], p["remove"], p["install"]
    v = _asset(world, vname, AssetKind.Vehicle)
    r = _asset(world, rname)
    i = _asset(world, iname)
    if r == i:
        raise InvalidEvent("removed and installed part are the same")
    if world.bom.parent_of(r) != v:
        raise NotAttached(f"{rname} is not attached to {vname}")
    if world.bom.parent_of(i) is not None:
        raise AlreadyAttached(f"{iname} is already attached")
    if _status(world, i) in END_OF_LIFE - {Status.Reused, Status.Remanufactured}:
        raise IllegalTransition(f"{iname} is at end of life")
    km = float(p["km"]) if "km" in p else world.odometer.get(v, 0.0)
    if "km" in p:
        _set_mileage(plan, world, vname, v, km)
    overhaul = bool(p.get("overhaul", False))
    children = [c for c in world.bom.children(v) if c != r] + [i]
    plan.update(vname, SemanticKind.BomAsBuilt, _children_payload(world, children))
    _set_status(plan, world, vname, v, Status.Maintained, ev.actor, ev.at)
    plan.update(
        vname,
        SemanticKind.MaintenanceRecord,
        {"action": "exchange", "parts": [_pid(world, r), _pid(world, i)], "notes": str(p.get("notes", ""))},
    )
    plan.phases[vname] = LifecyclePhase.AsUsed
    km_r = world.km_base.get(r, 0.0) + km - world.attach_odo.get(r, 0.0)
    if overhaul:
        _set_mileage(plan, world, rname, r, km_r)
        _set_status(plan, world, rname, r, Status.Maintained, ev.actor, ev.at)
        if "state_of_health" in p:
            plan.update(rname, SemanticKind.StateOfHealth, {"percent": float(p["state_of_health"])})
        _set_status(plan, world, iname, i, Status.Sold, ev.actor, ev.at)

    def effect(w: World) -> None:
        w.odometer[v] = km
        w.km_base[r] = km_r
        w.bom.detach(v, r, ev.at)
        w.bom.attach(v, i, w.assets[i].manufacturer_bpn, ev.at)
        w.attach_odo[i] = km

    plan.effects.append(effect)


def _overhaul(world: World, ev: LifecycleEvent, plan: Plan) -> None:
    p = ev.payload
    name = p["asset"]
    cx = _asset(world, name)
    if world.assets[cx].asset_kind is AssetKind.Vehicle:
        raise InvalidEvent("overhaul applies to components")
    km = world.component_km(cx)
    _set_mileage(plan, world, name, cx, km)
    _set_status(plan, world, name, cx, Status.Maintained, ev.actor, ev.at)
    plan.update(
        name,
        SemanticKind.MaintenanceRecord,
        {"action": "overhaul", "parts": [_pid(world, cx)], "notes": str(p.get("notes", ""))},
    )
    if "state_of_health" in p:
        plan.update(name, SemanticKind.StateOfHealth, {"percent": float(p["state_of_health"])})


def _dismantle(world: World, ev: LifecycleEvent, plan: Plan) -> None:
    p = ev.payload
    vname = p["asset"]
    v = _asset(world, vname, AssetKind.Vehicle)
    check_certificate_role(world, CertificateKind.Decommissioning, ev.actor)
    km = float(p["km"]) if "km" in p else world.odometer.get(v, 0.0)
    if "km" in p:
        _set_mileage(plan, world, vname, v, km)
    children = sorted(world.bom.children(v), key=lambda c: _pid(world, c))
    plan.update(vname, SemanticKind.BomAsBuilt, _children_payload(world, []))
    plan.update(vname, SemanticKind.DismantlingResult, {"detached": [_pid(world, c) for c in children]})
    _set_status(plan, world, vname, v, Status.Dismantled, ev.actor, ev.at)
    cert = certificate_payload(CertificateKind.Decommissioning, ev.actor, ev.at)
    plan.update(vname, SemanticKind.DecommissioningCertificate, cert)
    plan.certificates.append((CertificateKind.Decommissioning, vname))
    plan.phases[vname] = LifecyclePhase.AsDismantled
    kms = {}
    for c in children:
        cname = world.assets[c].name
        kms[c] = world.km_base.get(c, 0.0) + km - world.attach_odo.get(c, 0.0)
        _set_mileage(plan, world, cname, c, kms[c])
        _set_status(plan, world, cname, c, Status.Dismantled, ev.actor, ev.at)
        plan.update(cname, SemanticKind.DecommissioningCertificate, cert)
        plan.certificates.append((CertificateKind.Decommissioning, cname))
        plan.phases[cname] = LifecyclePhase.AsDismantled

    def effect(w: World) -> None:
        w.odometer[v] = km
        for c in children:
            w.km_base[c] = kms[c]
            w.bom.detach(v, c, ev.at)

    plan.effects.append(effect)


def _ce_decision(world: World, ev: LifecycleEvent, plan: Plan) -> None:
    name = ev.payload["asset"]
    cx = _asset(world, name)
    strategy = CeStrategyKind(ev.payload["strategy"])
    status, cert = CE_OUTCOME[strategy]
    if _status(world, cx) is not Status.Dismantled:
        raise IllegalTransition(f"{name} must be dismantled before a CE decision")
    check_certificate_role(world, cert, ev.actor)
    plan.update(name, SemanticKind.CeStrategy, {"strategy": strategy.value, "certificate": cert.value})
    _set_status(plan, world, name, cx, status, ev.actor, ev.at)
    plan.certificates.append((cert, name))


def _recycling_report(world: World, ev: LifecycleEvent, plan: Plan) -> None:
    p = ev.payload
    name = p["asset"]
    cx = _asset(world, name)
    if _status(world, cx) is not Status.Recycled:
        raise IllegalTransition(f"{name} has not been sent to recycling")
    quota = float(p["quota"])
    if not 0.0 <= quota <= 1.0:
        raise InvalidEvent("recycling quota must lie in [0, 1]")
    plan.update(name, SemanticKind.RecyclingResult, {"material": str(p["material"]), "quota": quota})
    if "secondary_material_fraction" in p:
        frac = float(p["secondary_material_fraction"])
        if not 0.0 <= frac <= 1.0:
            raise InvalidEvent("secondary material fraction must lie in [0, 1]")
        plan.update(
            name, SemanticKind.SecondaryMaterialContent, {"material": str(p["material"]), "fraction": frac}
        )


def _remanufacture(world: World, ev: LifecycleEvent, plan: Plan) -> None:
    p = ev.payload
    name, vname = p["asset"], p["vehicle"]
    c = _asset(world, name)
    v = _asset(world, vname, AssetKind.Vehicle)
    if _status(world, c) not in (Status.Reused, Status.Remanufactured):
        raise IllegalTransition(f"{name} is not released for a second life")
    if world.bom.parent_of(c) is not None:
        raise AlreadyAttached(f"{name} is already attached")
    if _status(world, v) in END_OF_LIFE:
        raise IllegalTransition(f"{vname} is at end of life")
    children = world.bom.children(v) + [c]
    plan.update(vname, SemanticKind.BomAsBuilt, _children_payload(world, children))
    # the part keeps its cumulative mileage in the new vehicle
    _set_mileage(plan, world, name, c, world.km_base.get(c, 0.0))

    def effect(w: World) -> None:
        w.bom.attach(v, c, w.assets[c].manufacturer_bpn, ev.at)
        w.attach_odo[c] = w.odometer.get(v, 0.0)

    plan.effects.append(effect)


def _ownership(world: World, ev: LifecycleEvent, plan: Plan) -> None:
    _asset(world, ev.payload["asset"])
    world.stakeholder(ev.payload["new_owner"])


_HANDLERS = {
    EventKind.ProduceComponent: _produce,
    EventKind.AssembleVehicle: _assemble,
    EventKind.Sell: _sell,
    EventKind.MileageUpdate: _mileage,
    EventKind.RepairExchange: _repair_exchange,
    EventKind.Overhaul: _overhaul,
    EventKind.Dismantle: _dismantle,
    EventKind.CeDecision: _ce_decision,
    EventKind.RecyclingReport: _recycling_report,
    EventKind.RemanufactureIntoVehicle: _remanufacture,
    EventKind.OwnershipTransfer: _ownership,
}
