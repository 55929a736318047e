"""Command-line front end for tracking campaigns and parameter sweeps."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .experiment import (
    OVERRIDE_KEYS,
    SWEEP_PARAMS,
    RunSetup,
    apply_override,
    frange,
    resolve_setup,
    run_campaign,
    sweep_parameter,
    write_run_artifacts,
    write_summary,
    write_sweep_csv,
)
from .propagation import MODELS
from .simulate import InvalidScenarioError, corridor_scenario, load_scenario

log = logging.getLogger("tristate_dfl")


class ConfigError(Exception):
    pass


def parse_models(text: str) -> tuple[str, ...]:
    if text == "all":
        return MODELS
    models = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in models if m not in MODELS]
    if bad or not models:
        raise ConfigError(f"unknown model(s) {bad}; choose from {', '.join(MODELS)} or 'all'")
    return models


def parse_set(items) -> list[tuple[str, str]]:
    out = []
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or key not in OVERRIDE_KEYS:
            raise ConfigError(f"bad --set {item!r}; keys: {', '.join(OVERRIDE_KEYS)}")
        out.append((key, value))
    return out


def parse_sweep(text: str) -> tuple[str, list[float]]:
    name, sep, grid = text.partition("=")
    if not sep or name not in SWEEP_PARAMS:
        raise ConfigError(f"bad --sweep {text!r}; parameters: {', '.join(SWEEP_PARAMS)}")
    try:
        start, step, stop = (float(v) for v in grid.split(":"))
        return name, frange(start, step, stop)
    except ValueError as exc:
        raise ConfigError(f"bad sweep grid {grid!r}: expected start:step:stop ({exc})") from exc


def load_scenario_arg(text: str):
    """A scenario JSON path, or ``corridor:<width>`` for the built-in layout."""
    if text.startswith("corridor:"):
        try:
            return corridor_scenario(float(text.split(":", 1)[1]))
        except ValueError as exc:
            raise ConfigError(f"bad corridor width in {text!r}") from exc
    try:
        return load_scenario(text)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {text!r}: {exc.strerror or exc}") from exc
    except (InvalidScenarioError, ValueError) as exc:
        raise ConfigError(f"invalid scenario {text!r}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tristate-dfl",
        description="Simulate link crossings and track them with a particle filter.",
    )
    p.add_argument("--scenario", required=True, help="scenario JSON file, or corridor:<width>")
    p.add_argument("--model", default="all", help="three-state, exponential, exponential-rayleigh, a comma list, or all")
    p.add_argument("--runs", type=int, default=100, help="Monte-Carlo runs per model (default 100)")
    p.add_argument("--seed", type=int, default=0, help="run i uses seed + i")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a tracker parameter; repeatable")
    p.add_argument("--sweep", metavar="NAME=START:STEP:STOP", help=f"sweep one of {', '.join(SWEEP_PARAMS)}")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.runs < 1:
            raise ConfigError("--runs must be >= 1")
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        models = parse_models(args.model)
        overrides = parse_set(args.set)
        sweep = parse_sweep(args.sweep) if args.sweep else None
        setup = RunSetup(load_scenario_arg(args.scenario))
        for key, value in overrides:
            setup = apply_override(setup, key, value)
        setup = resolve_setup(setup)
    except (ConfigError, ValueError) as exc:
        print(f"tristate-dfl: error: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"tristate-dfl: error: cannot create {out}: {exc}", file=sys.stderr)
        return 2

    meta = {
        "scenario": setup.scenario.name,
        "runs": args.runs,
        "seed": args.seed,
        "overrides": dict(overrides),
        "init_shift": setup.tracker.init_shift,
    }
    if sweep:
        name, values = sweep
        log.info("sweeping %s over %s", name, values)
        rows = sweep_parameter(setup, name, values, models, args.runs, args.seed, args.jobs)
        write_sweep_csv(rows, out / "sweep.csv")
        return 0

    campaign = run_campaign(setup, models, args.runs, args.seed, args.jobs)
    for model, camp in campaign.items():
        for run, report in zip(camp.runs, camp.reports):
            write_run_artifacts(run, report, out / model)
        log.info("%s: eps_%% %.2f over %d tracked runs", model, camp.mean.eps_pct, camp.tracked)
    write_summary(campaign, out, meta)
    diverged = sum(c.mean.diverged for c in campaign.values())
    if diverged:
        log.warning("particle weights underflowed on %d steps; see summary.json", diverged)
    return 0


if __name__ == "__main__":
    sys.exit(main())
