import dataclasses

import pytest

from twinmesh.metrics import IncompleteLog, compute_metrics, grade, render_report
from twinmesh.sim import run
from twinmesh.strategies import SHARING_LABEL, StrategyKind

ONE, SEVERAL, LICENSING = StrategyKind.OneTwin, StrategyKind.SeveralTwins, StrategyKind.LicensingNotification

EXPECTED = {
    ONE: ("++", "--", "--"),
    SEVERAL: ("-", "+", "++"),
    LICENSING: ("++", "+", "+"),
}


@pytest.mark.parametrize("strategy", list(StrategyKind))
def test_builtin_grades(builtin_metrics, strategy):
    g = grade(builtin_metrics[strategy])
    assert (g["consistency"], g["sovereignty"], g["ownership"]) == EXPECTED[strategy]
    assert g["sharing"] == SHARING_LABEL[strategy]


def test_metric_invariants(builtin_metrics):
    for s, m in builtin_metrics.items():
        d = m.to_dict()
        for key in ("foreign_writes", "external_flag_count", "staleness", "licensed_copies", "denied_events"):
            assert d[key] >= 0
        assert all(0.0 <= v <= 1.0 for v in m.completeness_after_loss.values())
        assert (m.external_flag_count > 0) == (s is LICENSING)
    assert builtin_metrics[ONE].staleness == 0
    assert builtin_metrics[ONE].foreign_writes > 0


def test_pull_delay_downgrades_consistency(builtin):
    res = run(dataclasses.replace(builtin, pull_delay=2), LICENSING)
    m = compute_metrics(res)
    assert m.staleness == 2
    assert grade(m)["consistency"] == "+"


def test_incomplete_log_is_rejected(builtin_runs):
    res = builtin_runs[SEVERAL]
    cut = dataclasses.replace(res, events=res.events[:-3])
    with pytest.raises(IncompleteLog):
        compute_metrics(cut)


def test_single_strategy_report_has_no_comparison(builtin_metrics):
    text = render_report([builtin_metrics[ONE]], "text")
    assert "Comparison" not in text
    assert "Comparison" in render_report(list(builtin_metrics.values()), "text")


def test_csv_has_one_row_per_strategy_metric(builtin_metrics):
    ms = list(builtin_metrics.values())
    rows = render_report(ms, "csv").strip().splitlines()
    assert rows[0] == "strategy,metric,value"
    keys = {}
    for row in rows[1:]:
        s, metric, _ = row.split(",", 2)
        keys.setdefault(s, []).append(metric)
    assert set(keys) == {m.strategy.value for m in ms}
    assert all(len(v) == len(set(v)) for v in keys.values())
    assert len({tuple(v) for v in keys.values()}) == 1


def test_grades_are_pure(builtin_metrics):
    m = builtin_metrics[LICENSING]
    assert grade(m) == grade(dataclasses.replace(m))
    assert render_report([m], "json") == render_report([m], "json")
