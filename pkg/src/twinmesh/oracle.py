"""Flat replay oracle.

Replays a scenario into one global ledger, ignoring twins, registries,
policies and messages. It has its own small physical model so that it can
serve as an independent reference for what information a scenario produces.
The result maps ``(asset name, semantic kind)`` to the latest
``(payload, origin)``.
"""

from __future__ import annotations

from typing import Any

from twinmesh.model import _freeze
from twinmesh.scenario import Scenario

_LEGAL = {
    "None": {"None", "Sold", "Maintained", "Dismantled"},
    "Sold": {"Sold", "Maintained", "Dismantled"},
    "Maintained": {"Sold", "Maintained", "Dismantled"},
    "Dismantled": {"Dismantled", "Reused", "Remanufactured", "Recycled", "TransferredToWaste"},
    "Reused": {"Reused", "Sold", "Maintained", "Dismantled"},
    "Remanufactured": {"Remanufactured", "Sold", "Maintained", "Dismantled"},
    "Recycled": {"Recycled", "TransferredToWaste"},
    "TransferredToWaste": {"TransferredToWaste"},
}
_CE = {
    "Reuse": ("Reused", "Reuse"),
    "Refurbish": ("Reused", "Refurbish"),
    "Repurpose": ("Reused", "Reuse"),
    "Remanufacture": ("Remanufactured", "Remanufacture"),
    "Recycle": ("Recycled", "Recycle"),
    "Recover": ("TransferredToWaste", "Waste"),
}
_ROLES = {
    "ProduceComponent": {"Supplier", "OEM"},
    "AssembleVehicle": {"OEM"},
    "Sell": {"OEM", "Consumer"},
    "RepairExchange": {"RepairShop"},
    "Overhaul": {"RepairShop", "Supplier", "Remanufacturer"},
    "MileageUpdate": {"OEM", "RepairShop", "Consumer"},
    "Dismantle": {"Dismantler"},
    "CeDecision": {"Dismantler", "Remanufacturer"},
    "RecyclingReport": {"Recycler", "Dismantler"},
    "RemanufactureIntoVehicle": {"OEM", "Remanufacturer"},
}
_CE_ISSUERS = {
    "Reuse": {"Dismantler", "Remanufacturer"},
    "Refurbish": {"Dismantler", "Remanufacturer"},
    "Remanufacture": {"Dismantler", "Remanufacturer"},
    "Recycle": {"Dismantler", "Recycler"},
    "Waste": {"Dismantler", "Recycler"},
}
_DEAD = {"Dismantled", "Recycled", "TransferredToWaste"}


class _Skip(Exception):
    pass


def _need(cond: bool) -> None:
    if not cond:
        raise _Skip


class _Flat:
    def __init__(self, scenario: Scenario):
        self.roles = {s.bpn: s.role.value for s in scenario.stakeholders}
        self.authorized = {s.bpn for s in scenario.stakeholders if s.authorized}
        self.kind: dict[str, str] = {}
        self.maker: dict[str, str] = {}
        self.pid: dict[str, str] = {}
        self.status: dict[str, str] = {}
        self.parent: dict[str, str] = {}
        self.odo: dict[str, float] = {}
        self.base: dict[str, float] = {}
        self.at_attach: dict[str, float] = {}
        self.last_km: dict[str, float] = {}
        self.gone: set[str] = set()
        self.ledger: dict[tuple[str, str], tuple[Any, str]] = {}
        # staged writes of the current event
        self.out: list[tuple[str, str, dict]] = []
        self.later: list = []

    # staging helpers: nothing is committed until the whole event validates
    def put(self, asset, kind, payload):
        self.out.append((asset, kind, payload))

    def set_status(self, asset, status, actor, at):
        _need(status in _LEGAL[self.status[asset]])
        self.put(asset, "StatusFlag", {"status": status, "set_by": actor, "at": at})
        self.later.append(lambda: self.status.__setitem__(asset, status))

    def set_km(self, asset, km):
        _need(km >= 0 and km >= self.last_km.get(asset, 0.0))
        self.put(asset, "Mileage", {"km": km})
        self.later.append(lambda: self.last_km.__setitem__(asset, km))

    def kids(self, vehicle):
        return sorted((c for c, p in self.parent.items() if p == vehicle), key=lambda c: self.pid[c])

    def bom(self, children):
        rows = [{"part_instance_id": self.pid[c], "supplier": self.maker[c]} for c in children]
        return {"children": sorted(rows, key=lambda r: (r["part_instance_id"], r["supplier"]))}

    def apply(self, at: int, actor: str, kind: str, p: dict) -> None:
        self.out, self.later = [], []
        _need(actor in self.roles and actor not in self.gone)
        if kind == "ProviderLoss":
            bpn, heir = p.get("bpn", actor), p.get("transfer_to")
            _need(bpn in self.roles and bpn not in self.gone)
            _need(heir is None or (heir in self.roles and heir != bpn and heir not in self.gone))
            self.gone.add(bpn)
            return
        if kind == "OwnershipTransfer":
            self._known(p["asset"])
            _need(p["new_owner"] in self.roles and p["new_owner"] not in self.gone)
            return
        _need(self.roles[actor] in _ROLES[kind])
        getattr(self, "_" + kind)(at, actor, p)
        for fx in self.later:
            fx()
        for asset, k, payload in self.out:
            self.ledger[(asset, k)] = (_freeze(payload), actor)

    def _known(self, name, kind=None):
        _need(name in self.kind and (kind is None or self.kind[name] == kind))

    def _ProduceComponent(self, at, actor, p):
        name = p["asset"]
        _need(name not in self.kind and p.get("asset_kind", "Component") in ("Component", "Material"))
        self.later.append(lambda: self._new(name, p.get("asset_kind", "Component"), actor, str(p.get("part_instance_id", name))))

    def _new(self, name, kind, maker, pid):
        self.kind[name], self.maker[name], self.pid[name], self.status[name] = kind, maker, pid, "None"

    def _AssembleVehicle(self, at, actor, p):
        name, comps = p["asset"], list(p["components"])
        _need(name not in self.kind and len(set(comps)) == len(comps))
        for c in comps:
            self._known(c)
            _need(c not in self.parent and self.status[c] not in _DEAD)
        self.put(name, "BomAsBuilt", self.bom(comps))

        def fx():
            self._new(name, "Vehicle", actor, name)
            self.odo[name] = 0.0
            for c in comps:
                self.parent[c] = name
                self.at_attach[c] = 0.0

        self.later.append(fx)

    def _Sell(self, at, actor, p):
        self._known(p["asset"])
        _need(p["buyer"] in self.roles)
        self.set_status(p["asset"], "Sold", actor, at)

    def _MileageUpdate(self, at, actor, p):
        v = p["asset"]
        self._known(v, "Vehicle")
        km = float(p["km"])
        self.set_km(v, km)
        self.later.append(lambda: self.odo.__setitem__(v, km))

    def _RepairExchange(self, at, actor, p):
        v, r, i = p["asset"], p["remove"], p["install"]
        self._known(v, "Vehicle")
        self._known(r)
        self._known(i)
        _need(r != i and self.parent.get(r) == v and i not in self.parent)
        _need(self.status[i] not in _DEAD)
        km = float(p["km"]) if "km" in p else self.odo.get(v, 0.0)
        if "km" in p:
            self.set_km(v, km)
        self.put(v, "BomAsBuilt", self.bom([c for c in self.kids(v) if c != r] + [i]))
        self.set_status(v, "Maintained", actor, at)
        self.put(v, "MaintenanceRecord", {"action": "exchange", "parts": [self.pid[r], self.pid[i]], "notes": str(p.get("notes", ""))})
        km_r = self.base.get(r, 0.0) + km - self.at_attach.get(r, 0.0)
        if p.get("overhaul", False):
            self.set_km(r, km_r)
            self.set_status(r, "Maintained", actor, at)
            if "state_of_health" in p:
                self.put(r, "StateOfHealth", {"percent": float(p["state_of_health"])})
            self.set_status(i, "Sold", actor, at)

        def fx():
            self.odo[v] = km
            self.base[r] = km_r
            del self.parent[r]
            self.parent[i] = v
            self.at_attach[i] = km

        self.later.append(fx)

    def _Overhaul(self, at, actor, p):
        c = p["asset"]
        self._known(c)
        _need(self.kind[c] != "Vehicle")
        km = self.base.get(c, 0.0)
        if c in self.parent:
            km += self.odo.get(self.parent[c], 0.0) - self.at_attach.get(c, 0.0)
        self.set_km(c, km)
        self.set_status(c, "Maintained", actor, at)
        self.put(c, "MaintenanceRecord", {"action": "overhaul", "parts": [self.pid[c]], "notes": str(p.get("notes", ""))})
        if "state_of_health" in p:
            self.put(c, "StateOfHealth", {"percent": float(p["state_of_health"])})

    def _Dismantle(self, at, actor, p):
        v = p["asset"]
        self._known(v, "Vehicle")
        _need(actor in self.authorized)
        km = float(p["km"]) if "km" in p else self.odo.get(v, 0.0)
        if "km" in p:
            self.set_km(v, km)
        kids = self.kids(v)
        cert = {"kind": "Decommissioning", "issuer": actor, "at": at}
        self.put(v, "BomAsBuilt", {"children": []})
        self.put(v, "DismantlingResult", {"detached": [self.pid[c] for c in kids]})
        self.set_status(v, "Dismantled", actor, at)
        self.put(v, "DecommissioningCertificate", cert)
        kms = {}
        for c in kids:
            kms[c] = self.base.get(c, 0.0) + km - self.at_attach.get(c, 0.0)
            self.set_km(c, kms[c])
            self.set_status(c, "Dismantled", actor, at)
            self.put(c, "DecommissioningCertificate", cert)

        def fx():
            self.odo[v] = km
            for c in kids:
                self.base[c] = kms[c]
                del self.parent[c]

        self.later.append(fx)

    def _CeDecision(self, at, actor, p):
        c = p["asset"]
        self._known(c)
        _need(p["strategy"] in _CE and self.status[c] == "Dismantled")
        status, cert = _CE[p["strategy"]]
        _need(self.roles[actor] in _CE_ISSUERS[cert])
        self.put(c, "CeStrategy", {"strategy": p["strategy"], "certificate": cert})
        self.set_status(c, status, actor, at)

    def _RecyclingReport(self, at, actor, p):
        c = p["asset"]
        self._known(c)
        _need(self.status[c] == "Recycled")
        quota = float(p["quota"])
        _need(0.0 <= quota <= 1.0)
        self.put(c, "RecyclingResult", {"material": str(p["material"]), "quota": quota})
        if "secondary_material_fraction" in p:
            f = float(p["secondary_material_fraction"])
            _need(0.0 <= f <= 1.0)
            self.put(c, "SecondaryMaterialContent", {"material": str(p["material"]), "fraction": f})

    def _RemanufactureIntoVehicle(self, at, actor, p):
        c, v = p["asset"], p["vehicle"]
        self._known(c)
        self._known(v, "Vehicle")
        _need(self.status[c] in ("Reused", "Remanufactured") and c not in self.parent)
        _need(self.status[v] not in {"Dismantled", "Reused", "Remanufactured", "Recycled", "TransferredToWaste"})
        self.put(v, "BomAsBuilt", self.bom(self.kids(v) + [c]))
        self.set_km(c, self.base.get(c, 0.0))

        def fx():
            self.parent[c] = v
            self.at_attach[c] = self.odo.get(v, 0.0)

        self.later.append(fx)


def flat_ledger(scenario: Scenario) -> dict[tuple[str, str], tuple[Any, str]]:
    """Latest ``(frozen payload, origin)`` per ``(asset name, kind name)``."""
    flat = _Flat(scenario)
    for ev in sorted(scenario.events, key=lambda e: (e.at, e.actor)):
        try:
            flat.apply(ev.at, ev.actor, ev.kind.value, ev.payload)
        except (_Skip, KeyError, ValueError, TypeError):
            continue
    return flat.ledger


def accepted_events(scenario: Scenario) -> list[bool]:
    """Which events (in execution order) the flat model accepts."""
    flat = _Flat(scenario)
    out = []
    for ev in sorted(scenario.events, key=lambda e: (e.at, e.actor)):
        try:
            flat.apply(ev.at, ev.actor, ev.kind.value, ev.payload)
            out.append(True)
        except (_Skip, KeyError, ValueError, TypeError):
            out.append(False)
    return out
