"""Per-stakeholder twin registries and the network-wide discovery index."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from twinmesh.messages import DISCOVERY, Message, MessageKind
from twinmesh.model import DigitalTwin, TwinError, UnknownProvider


class RegistryUnavailable(TwinError):
    pass


class NotFound(TwinError):
    pass


@dataclass
class Descriptor:
    twin_id: str
    asset: str
    lookup_keys: tuple[str, ...]
    endpoint: str
    forward_to: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "twin_id": self.twin_id,
            "asset": self.asset,
            "lookup_keys": list(self.lookup_keys),
            "endpoint": self.endpoint,
            "forward_to": self.forward_to,
        }


@dataclass
class Registry:
    owner_bpn: str
    entries: dict[str, Descriptor] = field(default_factory=dict)
    available: bool = True

    def matching(self, key: str) -> list[Descriptor]:
        return [d for d in self.entries.values() if key in d.lookup_keys]

    def hosts(self, key: str) -> bool:
        """True when a twin (not just a forwarding stub) answers ``key``."""
        return any(d.forward_to is None for d in self.matching(key))


@dataclass
class DiscoveryIndex:
    index: dict[str, set[str]] = field(default_factory=dict)

    def add(self, keys, bpn: str) -> None:
        for k in keys:
            self.index.setdefault(k, set()).add(bpn)

    def remove(self, keys, bpn: str) -> None:
        for k in keys:
            holders = self.index.get(k)
            if holders is not None:
                holders.discard(bpn)
                if not holders:
                    del self.index[k]

    def drop_provider(self, bpn: str) -> None:
        for k in list(self.index):
            self.remove([k], bpn)

    def to_dict(self) -> dict:
        return {k: sorted(v) for k, v in sorted(self.index.items())}


@dataclass
class Network:
    """All registries of a world plus the discovery index kept in sync with them."""

    registries: dict[str, Registry] = field(default_factory=dict)
    discovery: DiscoveryIndex = field(default_factory=DiscoveryIndex)

    def registry(self, bpn: str) -> Registry:
        reg = self.registries.get(bpn)
        if reg is None:
            reg = self.registries[bpn] = Registry(bpn)
        return reg

    def is_available(self, bpn: str) -> bool:
        reg = self.registries.get(bpn)
        return reg is None or reg.available

    def register_twin(self, twin: DigitalTwin) -> Descriptor:
        reg = self.registry(twin.host_bpn)
        if not reg.available:
            raise RegistryUnavailable(twin.host_bpn)
        desc = Descriptor(
            twin_id=twin.twin_id,
            asset=twin.asset.catena_x_id,
            lookup_keys=twin.asset.lookup_keys(),
            endpoint=f"{twin.host_bpn}/shells/{twin.twin_id}",
        )
        reg.entries[twin.twin_id] = desc
        self.discovery.add(desc.lookup_keys, twin.host_bpn)
        return desc

    def _resync(self, keys, bpn: str) -> None:
        reg = self.registries.get(bpn)
        for k in keys:
            if reg is not None and reg.available and reg.hosts(k):
                self.discovery.add([k], bpn)
            else:
                self.discovery.remove([k], bpn)

    def rehost(self, twin: DigitalTwin, new_host: str, *, forward: bool) -> None:
        """Move a twin to ``new_host``; optionally leave a forwarding stub behind."""
        old = self.registry(twin.host_bpn)
        desc = old.entries.get(twin.twin_id)
        keys = twin.asset.lookup_keys()
        if desc is not None:
            if forward:
                desc.forward_to = new_host
            else:
                del old.entries[twin.twin_id]
        old_host = twin.host_bpn
        twin.host_bpn = new_host
        self.register_twin(twin)
        self._resync(keys, old_host)

    def deregister_provider(self, bpn: str) -> DiscoveryIndex:
        if bpn not in self.registries:
            raise UnknownProvider(bpn)
        self.registries[bpn].available = False
        self.discovery.drop_provider(bpn)
        return self.discovery

    def lookup(
        self,
        bpn: str,
        key: str,
        consumer: str,
        at: int,
        messages: Optional[list] = None,
        **kw,
    ) -> list[Descriptor]:
        """Query ``bpn``'s registry. Emits one RegistryLookup message."""
        if messages is not None:
            messages.append(Message(MessageKind.RegistryLookup, consumer, bpn, key, at, **kw))
        reg = self.registries.get(bpn)
        if reg is None:
            raise NotFound(key)
        if not reg.available:
            raise RegistryUnavailable(bpn)
        found = reg.matching(key)
        if not found:
            raise NotFound(key)
        return found

    def discover(
        self, key: str, consumer: str = "", at: int = 0, messages: Optional[list] = None, **kw
    ) -> set[str]:
        if messages is not None:
            messages.append(Message(MessageKind.DiscoveryQuery, consumer, DISCOVERY, key, at, **kw))
        return set(self.discovery.index.get(key, ()))

    def rebuild_index(self) -> dict[str, set[str]]:
        """Recompute discovery from scratch over available registries."""
        fresh = DiscoveryIndex()
        for bpn, reg in self.registries.items():
            if not reg.available:
                continue
            for desc in reg.entries.values():
                if desc.forward_to is None:
                    fresh.add(desc.lookup_keys, bpn)
        return fresh.index

    def to_dict(self) -> dict:
        return {
            "registries": {
                bpn: {
                    "available": reg.available,
                    "entries": [reg.entries[t].to_dict() for t in sorted(reg.entries)],
                }
                for bpn, reg in sorted(self.registries.items())
            },
            "discovery": self.discovery.to_dict(),
        }
