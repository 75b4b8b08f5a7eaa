"""Command-line runner: scenario runs, strategy comparison, scale runs and loss/transfer overlays."""

from __future__ import annotations

import argparse
import bisect
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from twinmesh.events import EventKind, LifecycleEvent
from twinmesh.metrics import compute_metrics, render_report
from twinmesh.scenario import (
    ParseError,
    Scenario,
    ValidationError,
    builtin_scenario,
    load_scenario,
    single_vehicle_template,
    validate,
)
from twinmesh.sim import run, save_logs, scale_run
from twinmesh.strategies import InvariantViolation, StrategyKind

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INVARIANT = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which is reserved here
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


@dataclass(frozen=True)
class LossSpec:
    bpn: str
    at: int
    transfer_to: Optional[str] = None


@dataclass(frozen=True)
class TransferSpec:
    asset: str
    new_owner: str
    at: int


@dataclass(frozen=True)
class CliConfig:
    scenario: str = "builtin"
    approach: str = "all"
    seed: Optional[int] = None
    out_dir: Path = Path("runs/default")
    scale: Optional[int] = None
    lose_provider: Optional[LossSpec] = None
    transfer_owner: Optional[TransferSpec] = None
    format: str = "text"

    @property
    def strategies(self) -> list[StrategyKind]:
        if self.approach == "all":
            return list(StrategyKind)
        return [StrategyKind.from_approach(int(self.approach))]


def _tick(text: str) -> int:
    try:
        t = int(text)
    except ValueError:
        raise UsageError(f"tick must be an integer, got {text!r}") from None
    if t < 0:
        raise UsageError("tick must be non-negative")
    return t


def parse_loss(text: str) -> LossSpec:
    """``BPN@tick`` or ``BPN@tick:SUCCESSOR``."""
    bpn, sep, rest = text.partition("@")
    if not sep or not bpn:
        raise UsageError(f"--lose-provider expects BPN@tick[:SUCCESSOR], got {text!r}")
    tick, _, heir = rest.partition(":")
    return LossSpec(bpn, _tick(tick), heir or None)


def parse_transfer(text: str) -> TransferSpec:
    """``asset=BPN@tick``."""
    asset, sep, rest = text.partition("=")
    owner, sep2, tick = rest.partition("@")
    if not (sep and sep2 and asset and owner):
        raise UsageError(f"--transfer-owner expects asset=BPN@tick, got {text!r}")
    return TransferSpec(asset, owner, _tick(tick))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="twinmesh", description=__doc__)
    p.add_argument("--scenario", default="builtin", help='"builtin" or a scenario JSON file')
    p.add_argument("--approach", choices=["1", "2", "3", "all"], default="all")
    p.add_argument("--seed", type=int, default=None, help="overrides the scenario seed")
    p.add_argument("--out", default=None, help="output directory (default: $TWINMESH_OUT or runs/default)")
    p.add_argument("--scale", type=int, default=None, metavar="N", help="run N independent vehicle worlds")
    p.add_argument("--lose-provider", default=None, metavar="BPN@TICK[:SUCCESSOR]")
    p.add_argument("--transfer-owner", default=None, metavar="ASSET=BPN@TICK")
    p.add_argument("--format", choices=["csv", "text", "json"], default="text", help="report printed to stdout")
    return p


def parse_config(argv: Sequence[str]) -> CliConfig:
    ns = build_parser().parse_args(list(argv))
    out = ns.out or os.environ.get("TWINMESH_OUT") or "runs/default"
    if ns.scale is not None and ns.scale < 1:
        raise UsageError("--scale must be at least 1")
    return CliConfig(
        scenario=ns.scenario,
        approach=ns.approach,
        seed=ns.seed,
        out_dir=Path(out),
        scale=ns.scale,
        lose_provider=parse_loss(ns.lose_provider) if ns.lose_provider else None,
        transfer_owner=parse_transfer(ns.transfer_owner) if ns.transfer_owner else None,
        format=ns.format,
    )


def _insert(events: list[LifecycleEvent], ev: LifecycleEvent) -> None:
    idx = bisect.bisect_right([e.at for e in events], ev.at)
    events.insert(idx, ev)


def with_overlays(s: Scenario, cfg: CliConfig) -> Scenario:
    """Experiment injections go into an in-memory copy; scenario files stay untouched."""
    events = list(s.events)
    if cfg.lose_provider:
        lp = cfg.lose_provider
        payload = {"bpn": lp.bpn}
        if lp.transfer_to:
            payload["transfer_to"] = lp.transfer_to
        _insert(events, LifecycleEvent(lp.at, lp.bpn, EventKind.ProviderLoss, payload))
    if cfg.transfer_owner:
        to = cfg.transfer_owner
        payload = {"asset": to.asset, "new_owner": to.new_owner}
        _insert(events, LifecycleEvent(to.at, to.new_owner, EventKind.OwnershipTransfer, payload))
    return validate(dataclasses.replace(s, events=events))


def load(cfg: CliConfig, *, for_scale: bool = False) -> Scenario:
    if cfg.scenario == "builtin":
        seed = cfg.seed or 0
        s = single_vehicle_template().with_seed(seed) if for_scale else builtin_scenario(seed=seed)
    else:
        path = Path(cfg.scenario)
        if not path.is_file():
            raise UsageError(f"scenario file not found: {path}")
        s = load_scenario(path)
        if cfg.seed is not None:
            s = s.with_seed(cfg.seed)
    return with_overlays(s, cfg)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def run_scenario(cfg: CliConfig) -> str:
    scenario = load(cfg)
    metrics = []
    for strategy in cfg.strategies:
        result = run(scenario, strategy)
        save_logs(result, cfg.out_dir / strategy.value)
        metrics.append(compute_metrics(result))
    for fmt, name in (("csv", "report.csv"), ("text", "report.txt"), ("json", "report.json")):
        _write(cfg.out_dir / name, render_report(metrics, fmt))
    return render_report(metrics, cfg.format)


def run_scale(cfg: CliConfig) -> str:
    # per-event logs are not written in scale mode; only aggregates
    template = load(cfg, for_scale=True)
    reports = [scale_run(template, cfg.scale, strategy) for strategy in cfg.strategies]
    doc = {"template": template.name, "runs": [r.to_dict() for r in reports]}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    _write(cfg.out_dir / "scale.json", text)
    if cfg.format == "json":
        return text
    lines = []
    for r in reports:
        lines.append(
            f"{r.strategy.value}: {r.total_messages} messages over {r.n_vehicles} vehicles "
            f"(per vehicle {r.per_vehicle_min}..{r.per_vehicle_max}, slope {r.fit_slope:.3f}, "
            f"r2 {r.fit_r2:.6f}, {r.wall_seconds:.2f} s)"
        )
    return "\n".join(lines) + "\n"


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except UsageError as exc:
        print(f"twinmesh: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        out = run_scale(cfg) if cfg.scale else run_scenario(cfg)
    except UsageError as exc:
        print(f"twinmesh: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError) as exc:
        print(f"twinmesh: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InvariantViolation as exc:
        print(f"twinmesh: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    sys.stdout.write(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
