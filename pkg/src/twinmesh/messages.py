"""Counted units of inter-stakeholder traffic."""

from __future__ import annotations

import enum
from dataclasses import dataclass

# pseudo-bpn of the network-wide discovery service
DISCOVERY = "DISCOVERY"


class MessageKind(str, enum.Enum):
    RegistryLookup = "RegistryLookup"
    DiscoveryQuery = "DiscoveryQuery"
    ContractNegotiation = "ContractNegotiation"
    SubmodelRead = "SubmodelRead"
    SubmodelWrite = "SubmodelWrite"
    Notification = "Notification"
    Pull = "Pull"


@dataclass(frozen=True, slots=True)
class Message:
    kind: MessageKind
    from_bpn: str
    to_bpn: str
    resource: str
    at: int
    # "event" for traffic caused by applying a lifecycle event, "poll" for
    # the read path of a polling consumer
    phase: str = "event"
    event_seq: int = -1

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "from": self.from_bpn,
            "to": self.to_bpn,
            "resource": self.resource,
            "at": self.at,
            "phase": self.phase,
            "event_seq": self.event_seq,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Message":
        return cls(
            MessageKind(d["kind"]),
            d["from"],
            d["to"],
            d["resource"],
            d["at"],
            d.get("phase", "event"),
            d.get("event_seq", -1),
        )
