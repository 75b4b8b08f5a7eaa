import dataclasses
import hashlib
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twinmesh.events import EventKind, LifecycleEvent
from twinmesh.scenario import (
    ParseError,
    ValidationError,
    builtin_scenario,
    dump_scenario,
    load_scenario,
    parse_scenario,
    random_scenario,
    save_scenario,
    single_vehicle_template,
    validate,
)
from twinmesh.sim import build_world, run, save_logs, scale_run
from twinmesh.strategies import Engine, StrategyKind


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.mark.parametrize("strategy", list(StrategyKind))
def test_runs_are_byte_identical(tmp_path, builtin, strategy):
    a = save_logs(run(builtin, strategy), tmp_path / "a")
    b = save_logs(run(builtin, strategy), tmp_path / "b")
    for key in a:
        assert _digest(a[key]) == _digest(b[key])


def test_seed_changes_identifiers_but_not_behaviour(builtin):
    r0 = run(builtin, StrategyKind.LicensingNotification)
    r1 = run(builtin.with_seed(99), StrategyKind.LicensingNotification)
    assert [m.kind for m in r0.messages] == [m.kind for m in r1.messages]
    assert set(r0.world.assets) != set(r1.world.assets)


def test_scenario_round_trip(tmp_path, builtin):
    path = tmp_path / "s.json"
    save_scenario(builtin, path)
    again = load_scenario(path)
    assert again.to_dict() == builtin.to_dict()
    assert dump_scenario(again) == path.read_text()


def test_byte_order_mark_is_tolerated(tmp_path, builtin):
    path = tmp_path / "bom.json"
    path.write_text("\ufeff" + dump_scenario(builtin), encoding="utf-8")
    assert load_scenario(path).name == builtin.name


def test_parse_error_reports_line_of_unknown_kind(builtin):
    text = dump_scenario(builtin)
    lines = text.splitlines()
    idx = next(i for i, ln in enumerate(lines) if '"kind": "Sell"' in ln)
    lines[idx] = lines[idx].replace("Sell", "Teleport")
    with pytest.raises(ParseError) as exc:
        parse_scenario("\n".join(lines))
    assert exc.value.line == idx + 1


def test_parse_error_on_broken_json():
    with pytest.raises(ParseError) as exc:
        parse_scenario('{\n "name": "x",\n "events": [\n}')
    assert exc.value.line == 4


@pytest.mark.parametrize(
    "mutate, which",
    [
        (lambda d: d["stakeholders"].append(dict(d["stakeholders"][0])), "duplicate stakeholder"),
        (lambda d: d["events"][0].update(actor="GHOST"), "undeclared actor"),
        (lambda d: d["events"][5].update(at=10_000), "events out of time order"),
        (lambda d: d["events"][0]["payload"].pop("asset"), "payload schema"),
    ],
)
def test_validation_errors(builtin, mutate, which):
    d = json.loads(json.dumps(builtin.to_dict()))
    mutate(d)
    with pytest.raises(ValidationError) as exc:
        validate(parse_scenario(json.dumps(d)))
    assert exc.value.which == which


@pytest.mark.parametrize("strategy", list(StrategyKind))
def test_denied_event_leaves_world_unchanged(builtin, strategy):
    world = build_world(builtin)
    engine = Engine(world, strategy)
    for ev in builtin.ordered_events()[:12]:
        engine.apply(ev)
    before = world.state_hash()
    bad = LifecycleEvent(30, "REPAIR2", EventKind.MileageUpdate, {"asset": "vehicle1", "km": 1.0})
    rec = engine.apply(bad)
    assert rec["status"] == "denied"
    assert rec["error"]["type"] == "MileageRegression"
    assert world.state_hash() == before


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.sampled_from(list(StrategyKind)))
def test_random_scenarios_keep_invariants_after_every_event(seed, strategy):
    run(random_scenario(seed), strategy, check_each_event=True)


def test_scale_is_exactly_linear():
    t = single_vehicle_template()
    one = run(t, StrategyKind.LicensingNotification, poll=False)
    per_vehicle = len(one.messages)
    r5 = scale_run(t, 5, StrategyKind.LicensingNotification, workers=1)
    r10 = scale_run(t, 10, StrategyKind.LicensingNotification, workers=1)
    assert r5.total_messages == 5 * per_vehicle
    assert r10.total_messages == 2 * r5.total_messages
    assert r10.fit_slope == pytest.approx(per_vehicle)
    assert r10.fit_r2 == pytest.approx(1.0)
    assert r10.to_dict() == scale_run(t, 10, StrategyKind.LicensingNotification, workers=1).to_dict()


def test_pull_delay_creates_staleness_then_drains(builtin):
    s = dataclasses.replace(builtin, pull_delay=3)
    res = run(s, StrategyKind.LicensingNotification)
    pulls = [fx for r in res.events for fx in r["effects"] if fx["op"] == "pull"]
    notes = [fx for r in res.events for fx in r["effects"] if fx["op"] == "notify"]
    assert len(pulls) == len(notes)
