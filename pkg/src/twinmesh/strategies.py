"""Update strategies: where lifecycle data is written and how it is read back.

All three strategies share the event semantics of :mod:`twinmesh.events`.
They differ in twin placement and in the traffic needed to write and read:

* ``OneTwin``: one twin per asset, hosted by its manufacturer. Everybody
  writes into it remotely.
* ``SeveralTwins``: every stakeholder touching an asset keeps its own twin
  and registers it in discovery. Readers aggregate across providers.
* ``LicensingNotification``: own twins as above, plus a copy-in of mandatory
  data on twin creation and a notify/pull cycle that brings every mandatory
  update back into the original twin as a licensed external copy.

Event handling is two-phase. ``prepare`` validates, resolves hosts and
negotiates (emitting messages); only ``commit`` mutates the world. If
preparation fails, agreements are rolled back and the event is logged as
denied with the world otherwise unchanged.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from twinmesh.events import EventKind, LifecycleEvent, Plan, plan_event
from twinmesh.messages import Message, MessageKind
from twinmesh.model import (
    AssetKind,
    Certificate,
    DigitalTwin,
    InvalidEvent,
    SemanticKind,
    Submodel,
    TwinError,
    UnknownProvider,
    _freeze,
)
from twinmesh.policy import (
    ANY,
    Action,
    Actor,
    NegotiationRejected,
    Policy,
    Resource,
    ensure_agreement,
    evaluate,
    mandatory_copy_policy,
    propagate_on_copy,
)
from twinmesh.registry import NotFound, RegistryUnavailable
from twinmesh.world import World, append_update, create_twin, new_asset


class StrategyKind(str, enum.Enum):
    OneTwin = "OneTwin"
    SeveralTwins = "SeveralTwins"
    LicensingNotification = "LicensingNotification"

    @classmethod
    def from_approach(cls, n: int | str) -> "StrategyKind":
        return _APPROACHES[int(n)]

    @property
    def approach(self) -> int:
        return {v: k for k, v in _APPROACHES.items()}[self]


_APPROACHES = {
    1: StrategyKind.OneTwin,
    2: StrategyKind.SeveralTwins,
    3: StrategyKind.LicensingNotification,
}

SHARING_LABEL = {
    StrategyKind.OneTwin: "Sharing all data with the Twin-OEM",
    StrategyKind.SeveralTwins: "Sharing responsibility to link DTs",
    StrategyKind.LicensingNotification: "Share updates and keep own DT",
}


class InvariantViolation(Exception):
    """A committed event broke a world invariant. Always a bug."""


def latest_by_seq(twin: DigitalTwin, kind: SemanticKind) -> Optional[Submodel]:
    """Most recent information of ``kind`` in ``twin``.

    Copies may arrive after newer local data, so recency is decided by the
    event that produced the data, not by append order.
    """
    best = None
    for s in twin.submodels:
        if s.semantic_kind is kind and (best is None or s.event_seq >= best.event_seq):
            best = s
    return best


def host_policy(host: str, cx: str) -> Policy:
    """Grant under which the single-twin host lets others read and write."""
    return Policy(owner_bpn=host, subject=ANY, actions=frozenset({Action.Read, Action.Write}), asset=cx)


# --------------------------------------------------------------------------
# locating twins


class _Traffic:
    """Message sink bound to a phase and event seq."""

    def __init__(self, messages: Optional[list], phase: str = "event", seq: int = -1):
        self.messages = messages
        self.kw = {"phase": phase, "event_seq": seq}

    def send(self, kind: MessageKind, frm: str, to: str, resource: str, at: int) -> None:
        if self.messages is not None:
            self.messages.append(Message(kind, frm, to, resource, at, **self.kw))


def _locate(world: World, twin: DigitalTwin, consumer: Optional[str], at: int, tr: _Traffic) -> str:
    """Find the current host of ``twin``, starting at its creator's registry.

    Follows at most one forwarding stub. When the creator's registry is gone
    the consumer falls back to discovery.
    """
    net = world.network
    cx = twin.asset.catena_x_id
    who = consumer or ""
    start = twin.creator_bpn
    try:
        if start == consumer:
            found = net.registry(start).matching(cx) if net.is_available(start) else None
            if found is None:
                raise RegistryUnavailable(start)
        else:
            found = net.lookup(start, cx, who, at, tr.messages, **tr.kw)
        desc = next((d for d in found if d.twin_id == twin.twin_id), None)
        if desc is None:
            raise NotFound(cx)
        if desc.forward_to is None:
            return start
        target = desc.forward_to
        if target != consumer:
            net.lookup(target, cx, who, at, tr.messages, **tr.kw)
        elif not net.is_available(target):
            raise RegistryUnavailable(target)
        return target
    except (RegistryUnavailable, NotFound):
        providers = net.discover(cx, who, at, tr.messages, **tr.kw)
        host = twin.host_bpn
        if host not in providers:
            raise
        if host != consumer:
            net.lookup(host, cx, who, at, tr.messages, **tr.kw)
        return host


# --------------------------------------------------------------------------
# aggregated views


@dataclass(frozen=True)
class ViewEntry:
    semantic_kind: SemanticKind
    payload: dict[str, Any]
    origin_bpn: str
    source_bpn: str
    external_copy: bool
    version: int
    event_seq: int

    def content(self) -> tuple:
        return (self.semantic_kind, _freeze(self.payload), self.origin_bpn)


@dataclass
class AggregatedView:
    asset: str
    entries: dict[SemanticKind, ViewEntry] = field(default_factory=dict)
    sources_consulted: set[str] = field(default_factory=set)
    completeness: float = 1.0
    reshares: list[dict[str, str]] = field(default_factory=list)

    def contents(self) -> dict[SemanticKind, tuple]:
        return {k: e.content() for k, e in self.entries.items()}


def _read(world, twin, kind, consumer, at, tr, reshares) -> Optional[Submodel]:
    sm = latest_by_seq(twin, kind)
    if sm is None or consumer is None or consumer == twin.host_bpn:
        return sm
    actor = world.actor(consumer)
    res = Resource.of_submodel(sm, twin)
    try:
        ensure_agreement(actor, twin.host_bpn, res, Action.Read, world.policies, at, tr.messages, **tr.kw)
    except NegotiationRejected:
        return None
    decision = evaluate(actor, Action.Read, res, world.policies)
    if decision.reshare:
        reshares.append(
            {"consumer": consumer, "host": twin.host_bpn, "owner": sm.origin_bpn, "kind": kind.value}
        )
    tr.send(MessageKind.SubmodelRead, consumer, twin.host_bpn, res.key, at)
    return sm


def _truth(world: World, cx: str, kinds) -> dict[SemanticKind, tuple]:
    out = {}
    twins = world.twins_of(cx)
    for k in kinds:
        best = None
        for t in twins:
            s = latest_by_seq(t, k)
            if s is not None and (best is None or s.event_seq > best.event_seq):
                best = s
        if best is not None:
            out[k] = best.content()
    return out


def aggregate_view(
    world: World,
    asset: str,
    consumer: Optional[str],
    strategy: StrategyKind,
    kinds=None,
    *,
    messages: Optional[list] = None,
    at: Optional[int] = None,
    phase: str = "event",
    event_seq: int = -1,
) -> AggregatedView:
    """What ``consumer`` can assemble about ``asset`` under ``strategy``.

    ``consumer=None`` stands for an all-granting reader: no policy checks and
    no traffic. Completeness is measured against a scan of every twin of the
    asset, reachable or not.
    """
    cx = world.asset(asset).catena_x_id
    if consumer is not None:
        world.stakeholder(consumer)
    kinds = tuple(kinds) if kinds is not None else tuple(SemanticKind)
    at = world.clock if at is None else at
    tr = _Traffic(messages if consumer is not None else None, phase, event_seq)
    view = AggregatedView(cx)
    found: dict[SemanticKind, list[tuple[Submodel, DigitalTwin]]] = {}

    if strategy is StrategyKind.OneTwin:
        single, spread = kinds, ()
    elif strategy is StrategyKind.LicensingNotification:
        single = tuple(k for k in kinds if k in world.mandatory_kinds)
        spread = tuple(k for k in kinds if k not in world.mandatory_kinds)
    else:
        single, spread = (), kinds

    if single:
        twin = world.original(cx)
        try:
            host = _locate(world, twin, consumer, at, tr)
        except (RegistryUnavailable, NotFound):
            if strategy is StrategyKind.LicensingNotification:
                spread = spread + single
        else:
            for k in single:
                sm = _read(world, twin, k, consumer, at, tr, view.reshares)
                if sm is not None:
                    found.setdefault(k, []).append((sm, twin))
                    view.sources_consulted.add(host)

    if spread:
        net = world.network
        for p in sorted(net.discover(cx, consumer or "", at, tr.messages, **tr.kw)):
            if p != consumer:
                try:
                    descs = net.lookup(p, cx, consumer or "", at, tr.messages, **tr.kw)
                except (RegistryUnavailable, NotFound):
                    continue
            else:
                descs = net.registry(p).matching(cx)
            for d in descs:
                if d.forward_to is not None:
                    continue
                twin = world.twins[d.twin_id]
                for k in spread:
                    sm = _read(world, twin, k, consumer, at, tr, view.reshares)
                    if sm is not None:
                        found.setdefault(k, []).append((sm, twin))
                        view.sources_consulted.add(p)

    for k, cands in found.items():
        sm, twin = max(cands, key=lambda c: (c[0].event_seq, not c[0].external_copy))
        view.entries[k] = ViewEntry(
            k, sm.payload, sm.origin_bpn, twin.host_bpn, sm.external_copy, sm.version, sm.event_seq
        )
    truth = _truth(world, cx, kinds)
    if truth:
        hit = sum(1 for k, c in truth.items() if k in view.entries and view.entries[k].content() == c)
        view.completeness = hit / len(truth)
    return view


# --------------------------------------------------------------------------
# effects


def _append_effect(world: World, sm: Submodel, twin: DigitalTwin) -> dict[str, Any]:
    cx = twin.asset.catena_x_id
    return {
        "op": "append",
        "twin": twin.twin_id,
        "asset": world.name_of(cx),
        "kind": sm.semantic_kind.value,
        "version": sm.version,
        "origin": sm.origin_bpn,
        "writer": sm.writer_bpn,
        "host": twin.host_bpn,
        "external": sm.external_copy,
        "event_seq": sm.event_seq,
        "original": world.original_twin.get(cx) == twin.twin_id,
    }


def _new_twin(world, asset, host, phase, strategy, effects, spec_issuer=None) -> DigitalTwin:
    twin = create_twin(world, asset, host, phase, spec_issuer=spec_issuer)
    original = world.original_twin[asset.catena_x_id] == twin.twin_id
    effects.append(
        {"op": "create_twin", "twin": twin.twin_id, "asset": asset.name, "host": host, "original": original}
    )
    effects.append({"op": "register", "twin": twin.twin_id, "host": host})
    if strategy is StrategyKind.OneTwin:
        world.policies.declare(host_policy(host, asset.catena_x_id))
    return twin


def _copy_in(world, copies, target, at, effects) -> None:
    role = world.actor(target.host_bpn).role
    for sm, src, reshare in copies:
        if reshare:
            effects.append(
                {
                    "op": "reshare",
                    "consumer": target.host_bpn,
                    "host": src.host_bpn,
                    "owner": sm.origin_bpn,
                    "asset": target.asset.name,
                    "kind": sm.semantic_kind.value,
                }
            )
        copy = propagate_on_copy(sm, src, target, world.policies, at, role)
        effects.append(_append_effect(world, copy, target))


def _plan_copy_in(world: World, cx: str, actor: str, at: int, tr: _Traffic) -> list:
    """Negotiate and read the mandatory data a new twin starts from."""
    orig = world.original(cx)
    if orig.host_bpn == actor:
        return []
    try:
        host = _locate(world, orig, actor, at, tr)
    except (RegistryUnavailable, NotFound):
        return []
    who = world.actor(actor)
    out = []
    for k in world.mandatory_kinds:
        sm = latest_by_seq(orig, k)
        if sm is None or sm.origin_bpn == actor:
            continue
        res = Resource.of_submodel(sm, orig)
        try:
            ensure_agreement(who, host, res, Action.Copy, world.policies, at, tr.messages, **tr.kw)
        except NegotiationRejected:
            continue
        tr.send(MessageKind.SubmodelRead, actor, host, res.key, at)
        out.append((sm, orig, evaluate(who, Action.Copy, res, world.policies).reshare))
    return out


def _move_single(world: World, twin: DigitalTwin, new_host: str) -> None:
    """Re-host the single twin, keeping the creator's stub one hop from it."""
    net = world.network
    creator = twin.creator_bpn
    if twin.host_bpn == creator:
        net.rehost(twin, new_host, forward=True)
    else:
        net.rehost(twin, new_host, forward=False)
        stub = net.registry(creator).entries.get(twin.twin_id)
        if stub is not None and new_host != creator:
            stub.forward_to = new_host
    twin.forward_to = None if new_host == creator else new_host


def handle_provider_loss(
    world: World,
    bpn: str,
    strategy: StrategyKind,
    transfer_to: Optional[str] = None,
    effects: Optional[list] = None,
) -> World:
    """Take ``bpn`` off the network, optionally handing its twins to a successor."""
    effects = [] if effects is None else effects
    if bpn not in world.stakeholders:
        raise UnknownProvider(bpn)
    if transfer_to is not None and transfer_to not in world.stakeholders:
        raise UnknownProvider(transfer_to)
    net = world.network
    net.registry(bpn)
    net.deregister_provider(bpn)
    world.departed.add(bpn)
    effects.append({"op": "loss", "bpn": bpn, "transfer_to": transfer_to})
    if transfer_to is None:
        return world
    for twin in [t for t in world.twins.values() if t.host_bpn == bpn]:
        net.rehost(twin, transfer_to, forward=True)
        if strategy is StrategyKind.OneTwin:
            world.policies.declare(host_policy(transfer_to, twin.asset.catena_x_id))
        effects.append({"op": "transfer", "twin": twin.twin_id, "from": bpn, "to": transfer_to})
    for reg in net.registries.values():
        for desc in reg.entries.values():
            if desc.forward_to == bpn and world.twins[desc.twin_id].host_bpn == transfer_to:
                desc.forward_to = transfer_to
    return world


# --------------------------------------------------------------------------
# engine


@dataclass
class PendingPull:
    due: int
    notified_seq: int
    source_twin: str
    submodel: Submodel
    target_twin: str


class Engine:
    """Applies lifecycle events to one world under one strategy."""

    def __init__(
        self,
        world: World,
        strategy: StrategyKind,
        *,
        pull_delay: int = 0,
        poll_consumer: Optional[str] = None,
    ):
        if pull_delay < 0:
            raise ValueError("pull_delay must be >= 0")
        self.world = world
        self.strategy = StrategyKind(strategy)
        self.pull_delay = pull_delay
        self.poll_consumer = poll_consumer
        self.messages: list[Message] = []
        self.records: list[dict[str, Any]] = []
        self.pending: list[PendingPull] = []

    # -- public ------------------------------------------------------------

    def apply(self, event: LifecycleEvent) -> dict[str, Any]:
        w = self.world
        w.seq += 1
        w.clock = event.at
        rec: dict[str, Any] = {
            "seq": w.seq,
            "at": event.at,
            "actor": event.actor,
            "kind": event.kind.value,
            "payload": event.payload,
            "status": "applied",
            "effects": [],
        }
        saved = dict(w.policies.agreements)
        try:
            commit = self._prepare(event)
        except TwinError as exc:
            w.policies.agreements = saved
            rec["status"] = "denied"
            rec["error"] = {"type": type(exc).__name__, "reason": str(exc)}
        else:
            try:
                commit(rec["effects"])
            except TwinError as exc:
                raise InvariantViolation(f"commit of event {w.seq} failed: {exc!r}") from exc
        self._run_pulls(rec["effects"], w.seq)
        self._poll(rec["effects"])
        self.records.append(rec)
        return rec

    def drain(self) -> Optional[dict[str, Any]]:
        """Execute pulls still pending at the end of the scenario."""
        if not self.pending:
            return None
        w = self.world
        w.seq += 1
        rec = {"seq": w.seq, "at": w.clock, "actor": "", "kind": "Drain", "payload": {}, "status": "applied", "effects": []}
        self._run_pulls(rec["effects"], None)
        self.records.append(rec)
        return rec

    # -- helpers -----------------------------------------------------------

    def _traffic(self, phase: str = "event") -> _Traffic:
        return _Traffic(self.messages, phase, self.world.seq)

    def _prepare(self, event: LifecycleEvent) -> Callable[[list], None]:
        if event.kind is EventKind.ProviderLoss:
            return self._prepare_loss(event)
        plan = plan_event(self.world, event)
        if event.kind is EventKind.OwnershipTransfer:
            return self._prepare_transfer(event)
        return self._prepare_plan(plan)

    def _prepare_loss(self, event: LifecycleEvent):
        w = self.world
        bpn = event.payload.get("bpn", event.actor)
        to = event.payload.get("transfer_to")
        if bpn not in w.stakeholders:
            raise UnknownProvider(bpn)
        if bpn in w.departed:
            raise InvalidEvent(f"{bpn} has already left the network")
        if event.actor != bpn and event.actor in w.departed:
            raise RegistryUnavailable(f"{event.actor} has left the network")
        if to is not None:
            if to not in w.stakeholders:
                raise UnknownProvider(to)
            if to == bpn or to in w.departed:
                raise InvalidEvent(f"cannot transfer data of {bpn} to {to}")

        def commit(effects):
            handle_provider_loss(w, bpn, self.strategy, to, effects)

        return commit

    def _prepare_transfer(self, event: LifecycleEvent):
        w = self.world
        cx = w.asset(event.payload["asset"]).catena_x_id
        new_owner = event.payload["new_owner"]
        at = event.at
        if new_owner in w.departed:
            raise RegistryUnavailable(f"{new_owner} has left the network")
        if w.asset_owner.get(cx) == new_owner:
            return lambda effects: effects.append({"op": "noop", "reason": "already owner"})
        tr = self._traffic()
        if self.strategy is StrategyKind.OneTwin:
            twin = w.original(cx)
            old = twin.host_bpn
            if old != new_owner:
                if not w.network.is_available(old):
                    raise RegistryUnavailable(old)
                tr.send(MessageKind.SubmodelRead, new_owner, old, cx, at)

            def commit(effects):
                if old != new_owner:
                    _move_single(w, twin, new_owner)
                    w.policies.declare(host_policy(new_owner, cx))
                    effects.append({"op": "forward", "twin": twin.twin_id, "from": old, "to": new_owner})
                w.asset_owner[cx] = new_owner

            return commit

        existing = w.twin_at(cx, new_owner)
        copies = []
        if existing is None and self.strategy is StrategyKind.LicensingNotification:
            copies = _plan_copy_in(w, cx, new_owner, at, tr)

        def commit(effects):
            if existing is None:
                orig = w.original(cx)
                twin = _new_twin(w, w.assets[cx], new_owner, orig.phase, self.strategy, effects)
                _copy_in(w, copies, twin, at, effects)
            w.asset_owner[cx] = new_owner

        return commit

    def _prepare_plan(self, plan: Plan):
        w = self.world
        ev = plan.event
        actor, at = ev.actor, ev.at
        who = w.actor(actor)
        tr = self._traffic()
        created = {na.name for na in plan.created}
        targets: dict[str, Optional[DigitalTwin]] = {}
        copies: dict[str, list] = {}
        write_hosts: list[str] = []
        for name in plan.touched():
            if name in created:
                continue
            cx = w.names[name]
            if self.strategy is StrategyKind.OneTwin:
                twin = w.original(cx)
                if twin.host_bpn != actor:
                    host = _locate(w, twin, actor, at, tr)
                    res = Resource(owner_bpn=host, asset=cx, host_bpn=host)
                    ensure_agreement(who, host, res, Action.Write, w.policies, at, tr.messages, **tr.kw)
                    if host not in write_hosts:
                        write_hosts.append(host)
                targets[name] = twin
            else:
                twin = w.twin_at(cx, actor)
                targets[name] = twin
                if twin is None and self.strategy is StrategyKind.LicensingNotification:
                    copies[name] = _plan_copy_in(w, cx, actor, at, tr)
        for host in write_hosts:
            tr.send(MessageKind.SubmodelWrite, actor, host, f"{host}/{ev.kind.value}", at)

        def commit(effects):
            strategy = self.strategy
            for na in plan.created:
                asset = new_asset(w, na.name, actor, na.kind, na.ids)
                targets[na.name] = _new_twin(w, asset, actor, na.phase, strategy, effects, na.spec_issuer)
            for name, twin in list(targets.items()):
                if twin is None:
                    cx = w.names[name]
                    phase = plan.phases.get(name, w.original(cx).phase)
                    twin = targets[name] = _new_twin(w, w.assets[cx], actor, phase, strategy, effects)
                    _copy_in(w, copies.get(name, ()), twin, at, effects)
            licensing = strategy is StrategyKind.LicensingNotification
            for upd in plan.updates:
                twin = targets[upd.asset]
                cx = twin.asset.catena_x_id
                orig = w.original(cx)
                notify = licensing and upd.kind in w.mandatory_kinds and orig.host_bpn != actor
                extra = ()
                if notify:
                    pol = w.policies.declare(mandatory_copy_policy(actor, orig.host_bpn, cx, upd.kind))
                    extra = (pol,)
                sm = append_update(w, twin, upd.kind, upd.payload, actor, at, extra)
                effects.append(_append_effect(w, sm, twin))
                if notify:
                    self._notify(sm, twin, orig, effects)
            for name, phase in plan.phases.items():
                twin = targets[name]
                if phase.rank > twin.phase.rank and twin.advance_phase(phase):
                    effects.append({"op": "phase_skip", "twin": twin.twin_id, "asset": name, "to": phase.value})
            for fx in plan.effects:
                fx(w)
            for kind, name in plan.certificates:
                w.certificates.append(Certificate(kind, w.names[name], actor, at))

        return commit

    def _notify(self, sm: Submodel, source: DigitalTwin, orig: DigitalTwin, effects: list) -> None:
        w = self.world
        host = orig.host_bpn
        cx = orig.asset.catena_x_id
        base = {"from": source.host_bpn, "to": host, "asset": orig.asset.name, "kind": sm.semantic_kind.value}
        if not w.network.is_available(host):
            effects.append({"op": "undeliverable", **base})
            return
        self._traffic().send(MessageKind.Notification, source.host_bpn, host, f"{cx}/{sm.semantic_kind.value}", w.clock)
        effects.append({"op": "notify", **base, "event_seq": sm.event_seq})
        self.pending.append(PendingPull(w.seq + self.pull_delay, w.seq, source.twin_id, sm, orig.twin_id))

    def _run_pulls(self, effects: list, upto: Optional[int]) -> None:
        if not self.pending:
            return
        due = [p for p in self.pending if upto is None or p.due <= upto]
        self.pending = [p for p in self.pending if not (upto is None or p.due <= upto)]
        w = self.world
        tr = self._traffic()
        for p in due:
            src = w.twins[p.source_twin]
            tgt = w.twins[p.target_twin]
            host, provider = tgt.host_bpn, src.host_bpn
            sm = p.submodel
            base = {
                "by": host,
                "from": provider,
                "asset": tgt.asset.name,
                "kind": sm.semantic_kind.value,
                "source_twin": src.twin_id,
                "event_seq": sm.event_seq,
                "notified_seq": p.notified_seq,
            }
            if not (w.network.is_available(host) and w.network.is_available(provider)) or sm.origin_bpn == host:
                effects.append({"op": "pull_failed", **base})
                continue
            who = w.actor(host)
            res = Resource.of_submodel(sm, src)
            try:
                ensure_agreement(who, provider, res, Action.Copy, w.policies, w.clock, tr.messages, **tr.kw)
            except NegotiationRejected:
                effects.append({"op": "pull_failed", **base})
                continue
            tr.send(MessageKind.Pull, host, provider, res.key, w.clock)
            copy = propagate_on_copy(sm, src, tgt, w.policies, w.clock, who.role)
            effects.append({"op": "pull", **base})
            effects.append(_append_effect(w, copy, tgt))

    def _poll(self, effects: list) -> None:
        c = self.poll_consumer
        w = self.world
        if c is None or c in w.departed or c not in w.stakeholders:
            return
        for cx, a in list(w.assets.items()):
            if a.asset_kind is not AssetKind.Vehicle:
                continue
            view = aggregate_view(
                w, cx, c, self.strategy, w.mandatory_kinds,
                messages=self.messages, at=w.clock, phase="poll", event_seq=w.seq,
            )
            for r in view.reshares:
                effects.append({"op": "reshare", **r, "asset": a.name, "phase": "poll"})


def apply_event(
    world: World, event: LifecycleEvent, strategy: StrategyKind
) -> tuple[World, list[Message], dict[str, Any]]:
    """Apply a single event with synchronous notification handling."""
    engine = Engine(world, strategy)
    rec = engine.apply(event)
    return world, engine.messages, rec
