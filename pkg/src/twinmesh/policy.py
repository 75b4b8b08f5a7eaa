"""Access and usage policies, contract negotiation and policy propagation.

Policies form a flat allow-list. Anything not explicitly granted by the data
owner is denied. Copied submodels carry deep copies of their source policies,
and only those carried policies govern access to the copy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from twinmesh.messages import Message, MessageKind
from twinmesh.model import (
    DigitalTwin,
    PolicyDenied,
    Role,
    SemanticKind,
    Submodel,
    TwinError,
)


class Action(str, enum.Enum):
    Read = "Read"
    Write = "Write"
    Copy = "Copy"
    Share = "Share"


class NegotiationRejected(TwinError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class Subject:
    """Who a policy is granted to. Neither bpn nor role set means anyone."""

    bpn: Optional[str] = None
    role: Optional[Role] = None

    def matches(self, bpn: str, role: Optional[Role]) -> bool:
        if self.bpn is not None:
            return self.bpn == bpn
        if self.role is not None:
            return self.role == role
        return True

    @property
    def is_any(self) -> bool:
        return self.bpn is None and self.role is None

    def to_str(self) -> str:
        if self.bpn is not None:
            return f"bpn:{self.bpn}"
        if self.role is not None:
            return f"role:{self.role.value}"
        return "*"

    @classmethod
    def parse(cls, text: str) -> "Subject":
        if text == "*":
            return cls()
        if text.startswith("role:"):
            return cls(role=Role(text[5:]))
        if text.startswith("bpn:"):
            return cls(bpn=text[4:])
        return cls(bpn=text)


ANY = Subject()


@dataclass(frozen=True)
class Policy:
    owner_bpn: str
    subject: Subject
    actions: frozenset
    semantic_kind: Optional[SemanticKind] = None
    asset: Optional[str] = None
    mandatory_copy: bool = False

    def __post_init__(self):
        object.__setattr__(self, "actions", frozenset(Action(a) for a in self.actions))
        if self.mandatory_copy:
            if self.subject.bpn is None:
                raise ValueError("a mandatory-copy policy names the original twin creator")
            if not {Action.Read, Action.Copy} <= self.actions:
                raise ValueError("a mandatory-copy policy must grant Read and Copy")

    def covers(self, asset: Optional[str], kind: Optional[SemanticKind]) -> bool:
        if self.asset is not None and self.asset != asset:
            return False
        if self.semantic_kind is not None and self.semantic_kind != kind:
            return False
        return True

    def grants(self, bpn: str, role: Optional[Role], action: Action, asset, kind) -> bool:
        return (
            action in self.actions
            and self.subject.matches(bpn, role)
            and self.covers(asset, kind)
        )

    def to_dict(self) -> dict:
        return {
            "owner": self.owner_bpn,
            "subject": self.subject.to_str(),
            "actions": sorted(a.value for a in self.actions),
            "semantic_kind": self.semantic_kind.value if self.semantic_kind else None,
            "asset": self.asset,
            "mandatory_copy": self.mandatory_copy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Policy":
        kind = d.get("semantic_kind")
        return cls(
            owner_bpn=d["owner"],
            subject=Subject.parse(d.get("subject", "*")),
            actions=frozenset(Action(a) for a in d["actions"]),
            semantic_kind=SemanticKind(kind) if kind else None,
            asset=d.get("asset"),
            mandatory_copy=bool(d.get("mandatory_copy", False)),
        )


def mandatory_copy_policy(owner: str, creator: str, asset: str, kind: SemanticKind) -> Policy:
    """License that lets the original twin creator read, copy and re-share."""
    return Policy(
        owner_bpn=owner,
        subject=Subject(bpn=creator),
        actions=frozenset({Action.Read, Action.Copy, Action.Share}),
        semantic_kind=kind,
        asset=asset,
        mandatory_copy=True,
    )


@dataclass(frozen=True, slots=True)
class Actor:
    bpn: str
    role: Optional[Role] = None


@dataclass(frozen=True, slots=True)
class Resource:
    """The data an access decision is about.

    ``carried`` is set for external copies: the copy is governed by the
    policies that travelled with it, not by the owner's current store.
    """

    owner_bpn: str
    asset: Optional[str] = None
    semantic_kind: Optional[SemanticKind] = None
    host_bpn: Optional[str] = None
    carried: Optional[tuple] = None

    @property
    def key(self) -> str:
        kind = self.semantic_kind.value if self.semantic_kind else "*"
        return f"{self.host_bpn or self.owner_bpn}/{self.asset or '*'}/{kind}"

    @classmethod
    def of_submodel(cls, sm: Submodel, twin: DigitalTwin) -> "Resource":
        return cls(
            owner_bpn=sm.origin_bpn,
            asset=twin.asset.catena_x_id,
            semantic_kind=sm.semantic_kind,
            host_bpn=twin.host_bpn,
            carried=sm.policies if sm.external_copy else None,
        )


@dataclass(frozen=True, slots=True)
class Decision:
    allowed: bool
    reason: str
    reshare: bool = False

    def __bool__(self) -> bool:
        return self.allowed


@dataclass(frozen=True)
class ContractAgreement:
    consumer_bpn: str
    provider_bpn: str
    resource: str
    granted_actions: frozenset
    at: int

    def to_dict(self) -> dict:
        return {
            "consumer": self.consumer_bpn,
            "provider": self.provider_bpn,
            "resource": self.resource,
            "granted_actions": sorted(a.value for a in self.granted_actions),
            "at": self.at,
        }


@dataclass
class PolicyStore:
    policies: dict[str, list[Policy]] = field(default_factory=dict)
    agreements: dict[tuple[str, str, str], ContractAgreement] = field(default_factory=dict)

    def declare(self, policy: Policy, author: Optional[str] = None) -> Policy:
        author = policy.owner_bpn if author is None else author
        if author != policy.owner_bpn:
            raise PolicyDenied(f"{author} cannot author policies for data of {policy.owner_bpn}")
        bucket = self.policies.setdefault(policy.owner_bpn, [])
        if policy not in bucket:
            bucket.append(policy)
        return policy

    def of(self, owner: str) -> list[Policy]:
        return self.policies.get(owner, [])

    def applicable(self, owner: str, asset: Optional[str], kind: Optional[SemanticKind]) -> tuple:
        """Owner policies covering (asset, kind); snapshot attached to new data."""
        return tuple(p for p in self.of(owner) if p.covers(asset, kind))

    def all(self) -> Iterable[Policy]:
        for owner in sorted(self.policies):
            yield from self.policies[owner]


def _granted(policies: Iterable[Policy], owner: str, actor: Actor, action: Action, res: Resource):
    for p in policies:
        if p.owner_bpn == owner and p.grants(actor.bpn, actor.role, action, res.asset, res.semantic_kind):
            return p
    return None


def evaluate(actor: Actor, action: Action, resource: Resource, store: PolicyStore) -> Decision:
    """Pure allow/deny decision; deny-by-default."""
    if actor.bpn == resource.owner_bpn:
        return Decision(True, "owner")
    if resource.carried is not None:
        p = _granted(resource.carried, resource.owner_bpn, actor, action, resource)
        if p is not None:
            return Decision(True, f"carried policy of {p.owner_bpn} for {p.subject.to_str()}")
        host = resource.host_bpn
        if host is not None and action in (Action.Read, Action.Copy) and host != actor.bpn:
            # third-party re-sharing: the hosting copier holds Share and grants
            # the request under its own policies
            share = _granted(resource.carried, resource.owner_bpn, Actor(host), Action.Share, resource)
            if share is not None:
                own = _granted(store.of(host), host, actor, action, resource)
                if own is not None:
                    return Decision(True, f"re-shared by {host}", reshare=True)
        return Decision(
            False, f"no carried policy of {resource.owner_bpn} grants {action.value} to {actor.bpn}"
        )
    p = _granted(store.of(resource.owner_bpn), resource.owner_bpn, actor, action, resource)
    if p is not None:
        return Decision(True, f"policy of {p.owner_bpn} for {p.subject.to_str()}")
    return Decision(False, f"no policy of {resource.owner_bpn} grants {action.value} to {actor.bpn}")


def negotiate(
    consumer: Actor,
    provider: str,
    resource: Resource,
    action: Action,
    store: PolicyStore,
    at: int,
    messages: Optional[list] = None,
    *,
    phase: str = "event",
    event_seq: int = -1,
) -> ContractAgreement:
    """Negotiate access to ``resource`` with ``provider``.

    Always emits one ContractNegotiation message. On success the agreement is
    stored and returned; it grants every action the policies allow right now.
    """
    if messages is not None:
        messages.append(
            Message(MessageKind.ContractNegotiation, consumer.bpn, provider, resource.key, at, phase, event_seq)
        )
    decision = evaluate(consumer, action, resource, store)
    if not decision:
        raise NegotiationRejected(decision.reason)
    granted = frozenset(a for a in Action if evaluate(consumer, a, resource, store))
    agreement = ContractAgreement(consumer.bpn, provider, resource.key, granted, at)
    store.agreements[(consumer.bpn, provider, resource.key)] = agreement
    return agreement


def ensure_agreement(
    consumer: Actor,
    provider: str,
    resource: Resource,
    action: Action,
    store: PolicyStore,
    at: int,
    messages: list,
    **kw,
) -> ContractAgreement:
    """Reuse a standing agreement, or negotiate a new one.

    A standing agreement is only reused while current policies still allow
    the action; otherwise a fresh negotiation takes place (and may fail).
    """
    existing = store.agreements.get((consumer.bpn, provider, resource.key))
    if existing is not None and action in existing.granted_actions:
        if evaluate(consumer, action, resource, store):
            return existing
    return negotiate(consumer, provider, resource, action, store, at, messages, **kw)


def _copy_payload(value: Any) -> Any:
    # payloads are JSON-shaped; this is much cheaper than copy.deepcopy
    if isinstance(value, dict):
        return {k: _copy_payload(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_copy_payload(v) for v in value]
    return value


def propagate_on_copy(
    source: Submodel,
    source_twin: DigitalTwin,
    target_twin: DigitalTwin,
    store: PolicyStore,
    at: int,
    copier_role: Optional[Role] = None,
) -> Submodel:
    """Copy ``source`` into ``target_twin`` keeping provenance and policies."""
    copier = Actor(target_twin.host_bpn, copier_role)
    decision = evaluate(copier, Action.Copy, Resource.of_submodel(source, source_twin), store)
    if not decision:
        raise PolicyDenied(decision.reason)
    return target_twin.append(
        source.semantic_kind,
        _copy_payload(source.payload),
        source.origin_bpn,
        at,
        event_seq=source.event_seq,
        external_copy=True,
        policies=list(source.policies),  # Policy is immutable
        writer_bpn=target_twin.host_bpn,
    )
