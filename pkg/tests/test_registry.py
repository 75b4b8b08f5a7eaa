from hypothesis import given, settings
from hypothesis import strategies as st

from twinmesh.messages import MessageKind
from twinmesh.model import AssetKind, LifecyclePhase, Role, Stakeholder
from twinmesh.registry import NotFound, RegistryUnavailable
from twinmesh.world import World, create_twin, new_asset

HOSTS = ["H1", "H2", "H3", "H4"]


def _world():
    w = World(seed=11)
    for h in HOSTS:
        w.stakeholders[h] = Stakeholder(h, Role.RepairShop)
    return w


ops = st.lists(
    st.tuples(st.sampled_from(["create", "rehost", "lose"]), st.integers(0, 7), st.sampled_from(HOSTS), st.booleans()),
    max_size=30,
)


@settings(max_examples=80, deadline=None)
@given(ops)
def test_discovery_index_always_equals_rebuild(seq):
    w = _world()
    assets = [new_asset(w, f"a{i}", "H1", AssetKind.Component, {"partInstanceId": f"P{i}"}) for i in range(8)]
    for op, i, host, flag in seq:
        if op == "create" and w.network.is_available(host) and w.twin_at(assets[i].catena_x_id, host) is None:
            create_twin(w, assets[i], host, LifecyclePhase.AsDelivered)
        elif op == "rehost":
            twins = [t for t in w.twins_of(assets[i].catena_x_id) if w.network.is_available(t.host_bpn)]
            if twins and w.network.is_available(host) and w.twin_at(assets[i].catena_x_id, host) is None:
                w.network.rehost(twins[0], host, forward=flag)
        elif op == "lose" and host in w.network.registries:
            w.network.deregister_provider(host)
        assert w.network.rebuild_index() == w.network.discovery.index


def test_lookup_emits_one_message_and_reports_failures():
    w = _world()
    a = new_asset(w, "a", "H1", AssetKind.Component, {"partInstanceId": "P1"})
    create_twin(w, a, "H1", LifecyclePhase.AsDelivered)
    msgs = []
    found = w.network.lookup("H1", "P1", "H2", 0, msgs)
    assert [d.asset for d in found] == [a.catena_x_id]
    assert [m.kind for m in msgs] == [MessageKind.RegistryLookup]
    try:
        w.network.lookup("H1", "nope", "H2", 0, msgs)
    except NotFound:
        pass
    else:
        raise AssertionError("unknown key must raise NotFound")
    w.network.deregister_provider("H1")
    try:
        w.network.lookup("H1", "P1", "H2", 0, msgs)
    except RegistryUnavailable:
        pass
    else:
        raise AssertionError("lost provider must raise RegistryUnavailable")
    assert len(msgs) == 3
    assert w.network.discover("P1") == set()
