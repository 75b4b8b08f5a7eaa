"""Domain types for shared digital twins.

A twin is a shell hosted by one stakeholder. It aggregates versioned
submodels for a single asset. Submodel streams are append-only: every
(twin, semantic kind) pair holds versions 1..n and nothing is ever removed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional


class TwinError(Exception):
    """Base class for all domain errors."""


class DuplicateTwin(TwinError):
    pass


class IllegalTransition(TwinError):
    pass


class IllegalPhase(TwinError):
    pass


class AlreadyAttached(TwinError):
    pass


class NotAttached(TwinError):
    pass


class MileageRegression(TwinError):
    pass


class RoleMismatch(TwinError):
    pass


class UnknownAsset(TwinError):
    pass


class UnknownProvider(TwinError):
    pass


class PolicyDenied(TwinError):
    pass


class InvalidEvent(TwinError):
    pass


class AssetKind(str, enum.Enum):
    Vehicle = "Vehicle"
    Component = "Component"
    Material = "Material"


class LifecyclePhase(str, enum.Enum):
    AsSpecified = "AsSpecified"
    AsDelivered = "AsDelivered"
    AsBuilt = "AsBuilt"
    AsUsed = "AsUsed"
    AsDismantled = "AsDismantled"

    @property
    def rank(self) -> int:
        return _PHASE_ORDER.index(self)


_PHASE_ORDER = list(LifecyclePhase)


class Status(str, enum.Enum):
    # "None" is a valid member name on an Enum, but it reads badly as an attribute.
    NONE = "None"
    Reused = "Reused"
    Sold = "Sold"
    Maintained = "Maintained"
    Dismantled = "Dismantled"
    Remanufactured = "Remanufactured"
    Recycled = "Recycled"
    TransferredToWaste = "TransferredToWaste"


_IN_USE = {Status.Sold, Status.Maintained, Status.Dismantled}

# Rows: current status, columns: allowed next statuses. Self transitions are
# always allowed so that re-setting a flag is an idempotent append.
STATUS_TRANSITIONS: dict[Status, frozenset[Status]] = {
    Status.NONE: frozenset({Status.NONE} | _IN_USE),
    Status.Sold: frozenset(_IN_USE),
    Status.Maintained: frozenset(_IN_USE),
    Status.Dismantled: frozenset(
        {
            Status.Dismantled,
            Status.Reused,
            Status.Remanufactured,
            Status.Recycled,
            Status.TransferredToWaste,
        }
    ),
    # second life: reused and remanufactured parts go back into service
    Status.Reused: frozenset({Status.Reused} | _IN_USE),
    Status.Remanufactured: frozenset({Status.Remanufactured} | _IN_USE),
    Status.Recycled: frozenset({Status.Recycled, Status.TransferredToWaste}),
    Status.TransferredToWaste: frozenset({Status.TransferredToWaste}),
}

# statuses at or after end of life; a decommissioning certificate must exist
END_OF_LIFE = frozenset(
    {
        Status.Dismantled,
        Status.Reused,
        Status.Remanufactured,
        Status.Recycled,
        Status.TransferredToWaste,
    }
)


def is_legal_transition(current: Status, new: Status) -> bool:
    return new in STATUS_TRANSITIONS[current]


def check_transition(current: Status, new: Status) -> None:
    if not is_legal_transition(current, new):
        raise IllegalTransition(f"{current.value} -> {new.value}")


class SemanticKind(str, enum.Enum):
    BomAsBuilt = "BomAsBuilt"
    Mileage = "Mileage"
    StateOfHealth = "StateOfHealth"
    MaintenanceRecord = "MaintenanceRecord"
    DismantlingResult = "DismantlingResult"
    CeStrategy = "CeStrategy"
    RecyclingResult = "RecyclingResult"
    SecondaryMaterialContent = "SecondaryMaterialContent"
    DecommissioningCertificate = "DecommissioningCertificate"
    StatusFlag = "StatusFlag"


DEFAULT_MANDATORY_KINDS = (
    SemanticKind.Mileage,
    SemanticKind.BomAsBuilt,
    SemanticKind.StateOfHealth,
)


class CertificateKind(str, enum.Enum):
    Decommissioning = "Decommissioning"
    Reuse = "Reuse"
    Remanufacture = "Remanufacture"
    Refurbish = "Refurbish"
    Repair = "Repair"
    Recycle = "Recycle"
    Waste = "Waste"


class CeStrategyKind(str, enum.Enum):
    Reuse = "Reuse"
    Remanufacture = "Remanufacture"
    Refurbish = "Refurbish"
    Repurpose = "Repurpose"
    Recycle = "Recycle"
    Recover = "Recover"


# circular-economy pathway -> (resulting status, certificate issued)
CE_OUTCOME: dict[CeStrategyKind, tuple[Status, CertificateKind]] = {
    CeStrategyKind.Reuse: (Status.Reused, CertificateKind.Reuse),
    CeStrategyKind.Refurbish: (Status.Reused, CertificateKind.Refurbish),
    CeStrategyKind.Repurpose: (Status.Reused, CertificateKind.Reuse),
    CeStrategyKind.Remanufacture: (Status.Remanufactured, CertificateKind.Remanufacture),
    CeStrategyKind.Recycle: (Status.Recycled, CertificateKind.Recycle),
    CeStrategyKind.Recover: (Status.TransferredToWaste, CertificateKind.Waste),
}


class Role(str, enum.Enum):
    OEM = "OEM"
    Supplier = "Supplier"
    Consumer = "Consumer"
    RepairShop = "RepairShop"
    Dismantler = "Dismantler"
    Recycler = "Recycler"
    Remanufacturer = "Remanufacturer"
    Regulator = "Regulator"


CERTIFICATE_ROLES: dict[CertificateKind, frozenset[Role]] = {
    CertificateKind.Decommissioning: frozenset({Role.Dismantler}),
    CertificateKind.Repair: frozenset({Role.RepairShop}),
    CertificateKind.Reuse: frozenset({Role.Dismantler, Role.Remanufacturer}),
    CertificateKind.Refurbish: frozenset({Role.Dismantler, Role.Remanufacturer}),
    CertificateKind.Remanufacture: frozenset({Role.Dismantler, Role.Remanufacturer}),
    CertificateKind.Recycle: frozenset({Role.Dismantler, Role.Recycler}),
    CertificateKind.Waste: frozenset({Role.Dismantler, Role.Recycler}),
}


@dataclass(frozen=True)
class Stakeholder:
    bpn: str
    role: Role
    authorized: bool = False


@dataclass(frozen=True)
class AssetIdentity:
    catena_x_id: str
    specific_asset_ids: tuple[tuple[str, str], ...]
    manufacturer_bpn: str
    asset_kind: AssetKind
    name: str = ""

    @property
    def ids(self) -> dict[str, str]:
        return dict(self.specific_asset_ids)

    def lookup_keys(self) -> tuple[str, ...]:
        return (self.catena_x_id,) + tuple(v for _, v in self.specific_asset_ids)


@dataclass(frozen=True)
class TwinStatus:
    status: Status = Status.NONE
    set_by: str = ""
    at: int = 0


@dataclass(frozen=True)
class Submodel:
    semantic_kind: SemanticKind
    payload: dict[str, Any]
    origin_bpn: str
    version: int
    created_at: int
    # seq of the lifecycle event that produced the data; copies keep it, so
    # it totally orders the information across every twin of an asset
    event_seq: int = 0
    external_copy: bool = False
    policies: tuple = ()
    writer_bpn: str = ""

    def content(self) -> tuple:
        return (self.semantic_kind, _freeze(self.payload), self.origin_bpn)


def _freeze(value: Any) -> Any:
    if isinstance(value, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in value.items()))
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value


@dataclass(frozen=True)
class HistoryEntry:
    submodel: Submodel
    is_latest: bool


@dataclass
class DigitalTwin:
    twin_id: str
    asset: AssetIdentity
    creator_bpn: str
    host_bpn: str
    phase: LifecyclePhase
    status: TwinStatus = field(default_factory=TwinStatus)
    submodels: list[Submodel] = field(default_factory=list)
    forward_to: Optional[str] = None
    spec_issuer: Optional[str] = None
    phase_skips: int = 0

    def stream(self, kind: SemanticKind) -> list[Submodel]:
        return [s for s in self.submodels if s.semantic_kind is kind]

    def latest(self, kind: SemanticKind) -> Optional[Submodel]:
        for s in reversed(self.submodels):
            if s.semantic_kind is kind:
                return s
        return None

    def kinds(self) -> list[SemanticKind]:
        seen: dict[SemanticKind, None] = {}
        for s in self.submodels:
            seen.setdefault(s.semantic_kind, None)
        return list(seen)

    def append(
        self,
        kind: SemanticKind,
        payload: dict[str, Any],
        origin_bpn: str,
        at: int,
        *,
        event_seq: int = 0,
        external_copy: bool = False,
        policies: tuple = (),
        writer_bpn: Optional[str] = None,
    ) -> Submodel:
        if external_copy and origin_bpn == self.host_bpn:
            raise ValueError("an external copy cannot originate from its own host")
        version = sum(1 for s in self.submodels if s.semantic_kind is kind) + 1
        sm = Submodel(
            semantic_kind=kind,
            payload=payload,
            origin_bpn=origin_bpn,
            version=version,
            created_at=at,
            event_seq=event_seq,
            external_copy=external_copy,
            policies=tuple(policies),
            writer_bpn=writer_bpn or origin_bpn,
        )
        self.submodels.append(sm)
        if kind is SemanticKind.StatusFlag:
            self.status = TwinStatus(Status(payload["status"]), payload["set_by"], payload["at"])
        return sm

    def advance_phase(self, phase: LifecyclePhase) -> bool:
        """Move the twin forward to ``phase``.

        Returns True when intermediate phases were skipped. Moving backwards
        raises IllegalPhase; staying put is a no-op.
        """
        if phase.rank < self.phase.rank:
            raise IllegalPhase(f"{self.phase.value} -> {phase.value}")
        skipped = phase.rank - self.phase.rank > 1
        if skipped:
            self.phase_skips += 1
        self.phase = phase
        return skipped

    def history(self, kind: SemanticKind) -> list[HistoryEntry]:
        versions = self.stream(kind)
        return [HistoryEntry(s, i == len(versions) - 1) for i, s in enumerate(versions)]


@dataclass(frozen=True)
class BomEntry:
    parent: str
    child: str
    supplier_bpn: str
    attached_at: int
    detached_at: Optional[int] = None

    def __post_init__(self):
        if self.detached_at is not None and self.detached_at < self.attached_at:
            raise ValueError("detached_at precedes attached_at")

    @property
    def open(self) -> bool:
        return self.detached_at is None


@dataclass(frozen=True)
class Certificate:
    kind: CertificateKind
    subject: str
    issuer_bpn: str
    at: int


@dataclass(frozen=True)
class MileageRecord:
    km: float
    at: int

    def __post_init__(self):
        if self.km < 0:
            raise ValueError("km must be non-negative")


def status_payload(status: Status, actor: str, at: int) -> dict[str, Any]:
    return {"status": status.value, "set_by": actor, "at": at}
