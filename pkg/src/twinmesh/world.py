"""Simulation world: stakeholders, twins, registries, policies and physical state.

The physical state (which part sits in which vehicle, odometers, the true
status of each asset) is kept apart from the twins. Twins only hold what
stakeholders have written into them.
"""

from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from twinmesh.model import (
    CERTIFICATE_ROLES,
    END_OF_LIFE,
    AlreadyAttached,
    AssetIdentity,
    AssetKind,
    BomEntry,
    Certificate,
    CertificateKind,
    DigitalTwin,
    DuplicateTwin,
    HistoryEntry,
    LifecyclePhase,
    MileageRegression,
    NotAttached,
    PolicyDenied,
    Role,
    RoleMismatch,
    SemanticKind,
    Stakeholder,
    Status,
    Submodel,
    UnknownAsset,
    check_transition,
    status_payload,
)
from twinmesh.policy import Action, Actor, PolicyStore, Resource, evaluate
from twinmesh.registry import Network


def deterministic_id(seed: int, counter: int) -> str:
    digest = hashlib.sha256(f"{seed}:{counter}".encode()).digest()
    return f"urn:uuid:{uuid.UUID(bytes=digest[:16], version=4)}"


@dataclass
class BomLedger:
    entries: list[BomEntry] = field(default_factory=list)
    _open: dict[str, int] = field(default_factory=dict)

    def parent_of(self, child: str) -> Optional[str]:
        i = self._open.get(child)
        return None if i is None else self.entries[i].parent

    def children(self, parent: str) -> list[str]:
        return [self.entries[i].child for i in self._open.values() if self.entries[i].parent == parent]

    def attach(self, parent: str, child: str, supplier: str, at: int) -> BomEntry:
        if child in self._open:
            raise AlreadyAttached(f"{child} is attached to {self.parent_of(child)}")
        entry = BomEntry(parent, child, supplier, at)
        self._open[child] = len(self.entries)
        self.entries.append(entry)
        return entry

    def detach(self, parent: str, child: str, at: int) -> BomEntry:
        i = self._open.get(child)
        if i is None or self.entries[i].parent != parent:
            raise NotAttached(f"{child} is not attached to {parent}")
        old = self.entries[i]
        closed = BomEntry(old.parent, old.child, old.supplier_bpn, old.attached_at, at)
        self.entries[i] = closed
        del self._open[child]
        return closed


@dataclass
class World:
    seed: int = 0
    stakeholders: dict[str, Stakeholder] = field(default_factory=dict)
    assets: dict[str, AssetIdentity] = field(default_factory=dict)
    names: dict[str, str] = field(default_factory=dict)
    twins: dict[str, DigitalTwin] = field(default_factory=dict)
    network: Network = field(default_factory=Network)
    policies: PolicyStore = field(default_factory=PolicyStore)
    bom: BomLedger = field(default_factory=BomLedger)
    certificates: list[Certificate] = field(default_factory=list)
    # physical state
    asset_status: dict[str, Status] = field(default_factory=dict)
    asset_owner: dict[str, str] = field(default_factory=dict)
    odometer: dict[str, float] = field(default_factory=dict)
    mileage: dict[str, float] = field(default_factory=dict)
    km_base: dict[str, float] = field(default_factory=dict)
    attach_odo: dict[str, float] = field(default_factory=dict)
    departed: set[str] = field(default_factory=set)
    original_twin: dict[str, str] = field(default_factory=dict)
    mandatory_kinds: tuple = ()
    clock: int = 0
    seq: int = 0
    _counter: int = 0

    def new_id(self) -> str:
        self._counter += 1
        return deterministic_id(self.seed, self._counter)

    # lookups -------------------------------------------------------------

    def stakeholder(self, bpn: str) -> Stakeholder:
        try:
            return self.stakeholders[bpn]
        except KeyError:
            raise RoleMismatch(f"unknown stakeholder {bpn}") from None

    def actor(self, bpn: str) -> Actor:
        s = self.stakeholders.get(bpn)
        return Actor(bpn, s.role if s else None)

    def asset(self, ref: str) -> AssetIdentity:
        cx = self.names.get(ref, ref)
        try:
            return self.assets[cx]
        except KeyError:
            raise UnknownAsset(ref) from None

    def name_of(self, cx: str) -> str:
        return self.assets[cx].name or cx

    def twins_of(self, cx: str) -> list[DigitalTwin]:
        return [t for t in self.twins.values() if t.asset.catena_x_id == cx]

    def twin_at(self, cx: str, host: str) -> Optional[DigitalTwin]:
        for t in self.twins.values():
            if t.asset.catena_x_id == cx and t.host_bpn == host:
                return t
        return None

    def original(self, cx: str) -> DigitalTwin:
        return self.twins[self.original_twin[cx]]

    # physical helpers ----------------------------------------------------

    def component_km(self, cx: str) -> float:
        base = self.km_base.get(cx, 0.0)
        parent = self.bom.parent_of(cx)
        if parent is None:
            return base
        return base + self.odometer.get(parent, 0.0) - self.attach_odo.get(cx, 0.0)

    # snapshot ------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "stakeholders": [
                {"bpn": s.bpn, "role": s.role.value, "authorized": s.authorized}
                for s in self.stakeholders.values()
            ],
            "departed": sorted(self.departed),
            "assets": [
                {
                    "catena_x_id": a.catena_x_id,
                    "name": a.name,
                    "specific_asset_ids": dict(a.specific_asset_ids),
                    "manufacturer": a.manufacturer_bpn,
                    "asset_kind": a.asset_kind.value,
                    "status": self.asset_status.get(a.catena_x_id, Status.NONE).value,
                    "owner": self.asset_owner.get(a.catena_x_id),
                }
                for a in self.assets.values()
            ],
            "twins": [twin_to_dict(t) for t in self.twins.values()],
            "network": self.network.to_dict(),
            "policies": [p.to_dict() for p in self.policies.all()],
            "agreements": [
                self.policies.agreements[k].to_dict() for k in sorted(self.policies.agreements)
            ],
            "bom": [
                {
                    "parent": e.parent,
                    "child": e.child,
                    "supplier": e.supplier_bpn,
                    "attached_at": e.attached_at,
                    "detached_at": e.detached_at,
                }
                for e in self.bom.entries
            ],
            "certificates": [
                {"kind": c.kind.value, "subject": c.subject, "issuer": c.issuer_bpn, "at": c.at}
                for c in self.certificates
            ],
        }

    def state_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def submodel_to_dict(s: Submodel) -> dict[str, Any]:
    return {
        "semantic_kind": s.semantic_kind.value,
        "version": s.version,
        "payload": s.payload,
        "origin": s.origin_bpn,
        "writer": s.writer_bpn,
        "created_at": s.created_at,
        "event_seq": s.event_seq,
        "external_copy": s.external_copy,
        "policies": [p.to_dict() for p in s.policies],
    }


def twin_to_dict(t: DigitalTwin) -> dict[str, Any]:
    return {
        "twin_id": t.twin_id,
        "asset": t.asset.catena_x_id,
        "creator": t.creator_bpn,
        "host": t.host_bpn,
        "phase": t.phase.value,
        "status": t.status.status.value,
        "forward_to": t.forward_to,
        "spec_issuer": t.spec_issuer,
        "submodels": [submodel_to_dict(s) for s in t.submodels],
    }


# world-level operations ----------------------------------------------------


def new_asset(
    world: World,
    name: str,
    manufacturer: str,
    kind: AssetKind,
    specific_ids: dict[str, str],
) -> AssetIdentity:
    asset = AssetIdentity(
        catena_x_id=world.new_id(),
        specific_asset_ids=tuple(sorted(specific_ids.items())),
        manufacturer_bpn=manufacturer,
        asset_kind=kind,
        name=name,
    )
    world.assets[asset.catena_x_id] = asset
    if name:
        world.names[name] = asset.catena_x_id
    world.asset_status[asset.catena_x_id] = Status.NONE
    world.asset_owner[asset.catena_x_id] = manufacturer
    return asset


def create_twin(
    world: World,
    asset: AssetIdentity,
    creator: str,
    phase: LifecyclePhase,
    *,
    spec_issuer: Optional[str] = None,
) -> DigitalTwin:
    """Create a twin hosted (and registered) at its creator."""
    if world.twin_at(asset.catena_x_id, creator) is not None:
        raise DuplicateTwin(f"{creator} already hosts a twin of {asset.catena_x_id}")
    twin = DigitalTwin(
        twin_id=world.new_id(),
        asset=asset,
        creator_bpn=creator,
        host_bpn=creator,
        phase=phase,
        spec_issuer=spec_issuer,
    )
    world.network.register_twin(twin)
    world.twins[twin.twin_id] = twin
    world.original_twin.setdefault(asset.catena_x_id, twin.twin_id)
    return twin


def create_multisource_twins(
    world: World,
    component_spec: dict[str, Any],
    suppliers: list[str],
    customer: str,
) -> list[DigitalTwin]:
    """One asset and one twin per supplier of the same specified component.

    Competing suppliers never share an identifier, so every twin gets its own
    catena_x_id. Each twin records the customer as specification issuer.
    """
    if not suppliers:
        raise ValueError("at least one supplier is required")
    part = component_spec.get("part_type", "component")
    twins = []
    for supplier in suppliers:
        name = f"{component_spec.get('name', part)}@{supplier}"
        ids = {"partInstanceId": f"{part}-{supplier}-{len(world.assets) + 1:06d}"}
        asset = new_asset(world, name, supplier, AssetKind.Component, ids)
        twins.append(create_twin(world, asset, supplier, LifecyclePhase.AsDelivered, spec_issuer=customer))
    return twins


def authorize_write(world: World, twin: DigitalTwin, actor: str) -> None:
    if actor == twin.host_bpn:
        return
    res = Resource(owner_bpn=twin.host_bpn, asset=twin.asset.catena_x_id, host_bpn=twin.host_bpn)
    decision = evaluate(world.actor(actor), Action.Write, res, world.policies)
    if not decision:
        raise PolicyDenied(decision.reason)


def append_update(
    world: World,
    twin: DigitalTwin,
    kind: SemanticKind,
    payload: dict[str, Any],
    actor: str,
    at: int,
    extra_policies: tuple = (),
) -> Submodel:
    """Append ``actor``'s data to ``twin`` with the owner's policies attached."""
    snapshot = world.policies.applicable(actor, twin.asset.catena_x_id, kind) + tuple(extra_policies)
    return twin.append(kind, payload, actor, at, event_seq=world.seq, policies=snapshot, writer_bpn=actor)


def set_status(world: World, twin: DigitalTwin, status: Status, actor: str, at: int) -> Submodel:
    authorize_write(world, twin, actor)
    cx = twin.asset.catena_x_id
    check_transition(world.asset_status.get(cx, Status.NONE), status)
    sm = append_update(world, twin, SemanticKind.StatusFlag, status_payload(status, actor, at), actor, at)
    world.asset_status[cx] = status
    return sm


def bom_payload(world: World, parent: str) -> dict[str, Any]:
    kids = []
    for child in world.bom.children(parent):
        a = world.assets[child]
        kids.append({"part_instance_id": a.ids.get("partInstanceId", a.name), "supplier": a.manufacturer_bpn})
    kids.sort(key=lambda d: (d["part_instance_id"], d["supplier"]))
    return {"children": kids}


def attach_component(world: World, parent_twin: DigitalTwin, child: str, actor: str, at: int) -> BomEntry:
    authorize_write(world, parent_twin, actor)
    child_asset = world.asset(child)
    parent = parent_twin.asset.catena_x_id
    entry = world.bom.attach(parent, child_asset.catena_x_id, child_asset.manufacturer_bpn, at)
    world.attach_odo[child_asset.catena_x_id] = world.odometer.get(parent, 0.0)
    append_update(world, parent_twin, SemanticKind.BomAsBuilt, bom_payload(world, parent), actor, at)
    return entry


def detach_component(world: World, parent_twin: DigitalTwin, child: str, actor: str, at: int) -> BomEntry:
    authorize_write(world, parent_twin, actor)
    try:
        cx = world.asset(child).catena_x_id
    except UnknownAsset:
        raise NotAttached(child) from None
    parent = parent_twin.asset.catena_x_id
    km = world.component_km(cx)
    entry = world.bom.detach(parent, cx, at)
    world.km_base[cx] = km
    append_update(world, parent_twin, SemanticKind.BomAsBuilt, bom_payload(world, parent), actor, at)
    return entry


def check_mileage(world: World, cx: str, km: float) -> None:
    if km < 0:
        raise MileageRegression(f"negative mileage {km}")
    last = world.mileage.get(cx)
    if last is not None and km < last:
        raise MileageRegression(f"{km} km < previously recorded {last} km")


def record_mileage(world: World, twin: DigitalTwin, km: float, actor: str, at: int) -> Submodel:
    authorize_write(world, twin, actor)
    cx = twin.asset.catena_x_id
    check_mileage(world, cx, km)
    sm = append_update(world, twin, SemanticKind.Mileage, {"km": km}, actor, at)
    world.mileage[cx] = km
    if twin.asset.asset_kind is AssetKind.Vehicle:
        world.odometer[cx] = km
    return sm


def check_certificate_role(world: World, kind: CertificateKind, issuer: str) -> None:
    s = world.stakeholder(issuer)
    if s.role not in CERTIFICATE_ROLES[kind]:
        raise RoleMismatch(f"{issuer} ({s.role.value}) cannot issue {kind.value} certificates")
    if kind is CertificateKind.Decommissioning and not s.authorized:
        raise RoleMismatch(f"{issuer} is not an authorized dismantling facility")


def certificate_payload(kind: CertificateKind, issuer: str, at: int) -> dict[str, Any]:
    return {"kind": kind.value, "issuer": issuer, "at": at}


def issue_certificate(
    world: World, kind: CertificateKind, asset: str, issuer: str, at: int, twins: Optional[Iterable[DigitalTwin]] = None
) -> Certificate:
    """Issue a certificate and store it on the asset's twin(s).

    A decommissioning certificate also moves the asset to Dismantled.
    """
    check_certificate_role(world, kind, issuer)
    cx = world.asset(asset).catena_x_id
    targets = list(twins) if twins is not None else [world.original(cx)]
    if kind is CertificateKind.Decommissioning:
        current = world.asset_status.get(cx, Status.NONE)
        if current not in END_OF_LIFE:
            check_transition(current, Status.Dismantled)
        for t in targets:
            authorize_write(world, t, issuer)
        for t in targets:
            append_update(world, t, SemanticKind.DecommissioningCertificate, certificate_payload(kind, issuer, at), issuer, at)
            if current not in END_OF_LIFE:
                append_update(world, t, SemanticKind.StatusFlag, status_payload(Status.Dismantled, issuer, at), issuer, at)
        if current not in END_OF_LIFE:
            world.asset_status[cx] = Status.Dismantled
    cert = Certificate(kind, cx, issuer, at)
    world.certificates.append(cert)
    return cert


def get_history(world: World, twin: DigitalTwin, kind: SemanticKind, reader: str) -> list[HistoryEntry]:
    """Complete version list of one submodel stream, oldest first."""
    if reader != twin.host_bpn:
        actor = world.actor(reader)
        for sm in twin.stream(kind):
            decision = evaluate(actor, Action.Read, Resource.of_submodel(sm, twin), world.policies)
            if not decision:
                raise PolicyDenied(decision.reason)
    return twin.history(kind)
