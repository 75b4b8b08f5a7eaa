import pytest

from twinmesh.oracle import accepted_events, flat_ledger
from twinmesh.scenario import random_scenario
from twinmesh.sim import run
from twinmesh.strategies import StrategyKind, aggregate_view


def view_ledger(result):
    w = result.world
    out = {}
    for cx, asset in w.assets.items():
        view = aggregate_view(w, cx, None, result.strategy)
        for kind, content in view.contents().items():
            out[(asset.name, kind.value)] = (content[1], content[2])
    return out


@pytest.mark.parametrize("strategy", list(StrategyKind))
def test_builtin_views_equal_flat_ledger(builtin, builtin_runs, strategy):
    assert view_ledger(builtin_runs[strategy]) == flat_ledger(builtin)


@pytest.mark.parametrize("seed", range(0, 100, 7))
def test_random_views_equal_flat_ledger(seed):
    s = random_scenario(seed)
    truth = flat_ledger(s)
    accepted = accepted_events(s)
    for strategy in StrategyKind:
        res = run(s, strategy)
        applied = [r["status"] == "applied" for r in res.events if r["kind"] != "Drain"]
        assert applied == accepted
        assert view_ledger(res) == truth


def test_random_scenarios_contain_denials():
    flags = [f for seed in range(10) for f in accepted_events(random_scenario(seed))]
    assert 0 < flags.count(False) < len(flags) // 4
