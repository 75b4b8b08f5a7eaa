import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twinmesh.model import (
    AlreadyAttached,
    AssetKind,
    IllegalPhase,
    IllegalTransition,
    LifecyclePhase,
    MileageRegression,
    NotAttached,
    Role,
    SemanticKind,
    Stakeholder,
    Status,
    is_legal_transition,
)
from twinmesh.world import (
    World,
    attach_component,
    create_multisource_twins,
    create_twin,
    detach_component,
    get_history,
    new_asset,
    record_mileage,
    set_status,
)

# Hand-written legality matrix. Row = current status, "1" = allowed next status,
# columns in the order of COLS.
COLS = ["None", "Reused", "Sold", "Maintained", "Dismantled", "Remanufactured", "Recycled", "TransferredToWaste"]
MATRIX = """
None               1 0 1 1 1 0 0 0
Reused             0 1 1 1 1 0 0 0
Sold               0 0 1 1 1 0 0 0
Maintained         0 0 1 1 1 0 0 0
Dismantled         0 1 0 0 1 1 1 1
Remanufactured     0 0 1 1 1 1 0 0
Recycled           0 0 0 0 0 0 1 1
TransferredToWaste 0 0 0 0 0 0 0 1
"""


def _oracle():
    table = {}
    for line in MATRIX.strip().splitlines():
        row, *bits = line.split()
        for col, bit in zip(COLS, bits):
            table[(row, col)] = bit == "1"
    return table


def test_transition_matrix_matches_oracle_on_all_64_pairs():
    oracle = _oracle()
    assert len(oracle) == 64
    for a, b in itertools.product(Status, Status):
        assert is_legal_transition(a, b) == oracle[(a.value, b.value)], (a, b)


def _world():
    w = World(seed=3)
    for bpn, role in [("OEM", Role.OEM), ("SUP", Role.Supplier), ("SHOP", Role.RepairShop)]:
        w.stakeholders[bpn] = Stakeholder(bpn, role)
    return w


def _vehicle(w, name="v", owner="OEM"):
    a = new_asset(w, name, owner, AssetKind.Vehicle, {"VIN": name.upper()})
    return create_twin(w, a, owner, LifecyclePhase.AsBuilt)


def test_dismantled_to_sold_is_rejected():
    w = _world()
    t = _vehicle(w)
    set_status(w, t, Status.Dismantled, "OEM", 1)
    with pytest.raises(IllegalTransition):
        set_status(w, t, Status.Sold, "OEM", 2)
    assert len(get_history(w, t, SemanticKind.StatusFlag, "OEM")) == 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=500_000), min_size=1, max_size=25))
def test_mileage_accepts_exactly_the_running_maximum(kms):
    w = _world()
    t = _vehicle(w)
    best = None
    accepted = []
    for km in kms:
        if best is not None and km < best:
            with pytest.raises(MileageRegression):
                record_mileage(w, t, km, "OEM", 0)
        else:
            record_mileage(w, t, km, "OEM", 0)
            accepted.append(km)
            best = km
    stream = [s.payload["km"] for s in t.stream(SemanticKind.Mileage)]
    assert stream == accepted
    assert stream == sorted(stream)


def test_history_versions_and_latest_flag():
    w = _world()
    t = _vehicle(w)
    for km in (10, 20, 30):
        record_mileage(w, t, km, "OEM", km)
    hist = get_history(w, t, SemanticKind.Mileage, "OEM")
    assert [h.submodel.version for h in hist] == [1, 2, 3]
    assert [h.is_latest for h in hist] == [False, False, True]


def test_bom_attach_detach_and_exclusivity():
    w = _world()
    v1, v2 = _vehicle(w, "v1"), _vehicle(w, "v2")
    new_asset(w, "gear", "SUP", AssetKind.Component, {"partInstanceId": "G1"})
    attach_component(w, v1, "gear", "OEM", 1)
    with pytest.raises(AlreadyAttached):
        attach_component(w, v2, "gear", "OEM", 2)
    with pytest.raises(NotAttached):
        detach_component(w, v2, "gear", "OEM", 3)
    detach_component(w, v1, "gear", "OEM", 4)
    attach_component(w, v2, "gear", "OEM", 5)
    boms = [s.payload for s in v1.stream(SemanticKind.BomAsBuilt)]
    assert boms == [{"children": [{"part_instance_id": "G1", "supplier": "SUP"}]}, {"children": []}]
    assert len(v2.stream(SemanticKind.BomAsBuilt)) == 1


def test_component_mileage_carries_over_into_new_parent():
    w = _world()
    v1, v2 = _vehicle(w, "v1"), _vehicle(w, "v2")
    cx = new_asset(w, "gear", "SUP", AssetKind.Component, {"partInstanceId": "G1"}).catena_x_id
    attach_component(w, v1, "gear", "OEM", 0)
    record_mileage(w, v1, 1000, "OEM", 1)
    detach_component(w, v1, "gear", "OEM", 2)
    record_mileage(w, v2, 50_000, "OEM", 3)
    attach_component(w, v2, "gear", "OEM", 4)
    record_mileage(w, v2, 50_400, "OEM", 5)
    assert w.component_km(cx) == 1400


def test_multisource_twins_have_pairwise_distinct_ids():
    w = _world()
    for b in ("A", "B", "C"):
        w.stakeholders[b] = Stakeholder(b, Role.Supplier)
    twins = create_multisource_twins(w, {"part_type": "gearbox"}, ["A", "B", "C"], "OEM")
    assert len(twins) == 3
    ids = [t.asset.catena_x_id for t in twins]
    for i, j in itertools.combinations(range(3), 2):
        assert ids[i] != ids[j]
    assert all(t.spec_issuer == "OEM" for t in twins)
    assert [t.host_bpn for t in twins] == ["A", "B", "C"]


def test_phase_is_monotone():
    w = _world()
    t = _vehicle(w)
    assert t.advance_phase(LifecyclePhase.AsDismantled) is True
    assert t.phase_skips == 1
    with pytest.raises(IllegalPhase):
        t.advance_phase(LifecyclePhase.AsUsed)
