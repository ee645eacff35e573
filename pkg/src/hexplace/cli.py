"""Command line front end: single runs, preset generation, ensembles, comparisons."""

from __future__ import annotations

import csv
import json
import logging
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from .engine import run
from .presets import PRESET_NAMES, preset
from .scenario import ScenarioConfig, ScenarioError, load_scenario, write_scenario
from .stats import Summary, write_summary, write_timeseries

log = logging.getLogger("hexplace")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
COMPARE_COLUMNS = ("scenario", "meanTotalDead", "stdTotalDead", "meanTotalImmune", "meanSimulationPeriod")


def _configure_logging() -> None:
    level = os.environ.get("HEXPLACE_LOG", "error").lower()
    logging.basicConfig(stream=sys.stderr, level=LOG_LEVELS.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(path: str) -> ScenarioConfig:
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        _fail(f"{path}: {exc}", 1)
    except OSError as exc:
        _fail(f"cannot read {path}: {exc.strerror or exc}", 2)


def _run_one(config: ScenarioConfig, seed: int, out_dir: Path | None, max_steps: int | None) -> Summary:
    """Run one seed and, given a directory, write its two output files."""
    series, summary = run(config, seed, max_steps=max_steps)
    if out_dir is None:
        return summary
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"timeseries_{seed}.csv", "w", newline="") as fh:
        write_timeseries(series.snapshots(), [r.id for r in config.regions], fh)
    with open(out_dir / f"summary_{seed}.json", "w") as fh:
        write_summary(summary, fh)
    log.info("seed %d: period %d, dead %d, immune %d", seed, summary.simulation_period,
             summary.total_dead, summary.total_immune)
    return summary


def _replicate_task(args) -> tuple[int, dict | None, str | None]:
    config, seed, out_dir, max_steps = args
    try:
        return seed, _run_one(config, seed, out_dir, max_steps).to_dict(), None
    except Exception as exc:  # reported per seed by the parent
        return seed, None, f"{type(exc).__name__}: {exc}"


def run_ensemble(config: ScenarioConfig, seeds: list[int], out_dir: Path | None, jobs: int = 1,
                 max_steps: int | None = None) -> tuple[list[dict], dict[int, str]]:
    """Summaries in seed order plus a map of failed seeds to messages."""
    tasks = [(config, s, out_dir, max_steps) for s in seeds]
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(seeds))) as pool:
            results = list(pool.map(_replicate_task, tasks))
    else:
        results = [_replicate_task(t) for t in tasks]
    summaries = [doc for _, doc, err in results if err is None]
    failures = {seed: err for seed, _, err in results if err is not None}
    return summaries, failures


def ensemble_result(name: str, summaries: list[dict]) -> dict:
    dead = [s["totalDead"] for s in summaries]
    return {
        "scenarioName": name,
        "replications": len(summaries),
        "meanTotalDead": statistics.fmean(dead),
        "meanTotalImmune": statistics.fmean(s["totalImmune"] for s in summaries),
        "meanSimulationPeriod": statistics.fmean(s["simulationPeriod"] for s in summaries),
        "stdTotalDead": statistics.pstdev(dead),
        "perSeedSummaries": summaries,
    }


def _seed_list(n: int | None, seeds: str | None) -> list[int]:
    if seeds is not None:
        if n is not None:
            _fail("give either --n or --seeds, not both", 1)
        try:
            out = [int(s) for s in seeds.split(",") if s.strip()]
        except ValueError:
            _fail(f"--seeds must be a comma separated list of integers, got {seeds!r}", 1)
        if not out or min(out) < 0:
            _fail("--seeds needs at least one non-negative seed", 1)
        if len(set(out)) != len(out):
            _fail("--seeds contains duplicates", 1)
        return out
    if n is None or n < 1:
        _fail("--n must be at least 1", 1)
    return list(range(n))


@click.group()
def main() -> None:
    """Agent-based epidemic simulation on a honeycomb of settlements."""
    _configure_logging()


@main.command("run")
@click.option("--scenario", required=True, type=click.Path(dir_okay=False), help="Scenario JSON file.")
@click.option("--seed", required=True, type=click.IntRange(min=0), help="RNG seed.")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
@click.option("--max-steps", type=click.IntRange(min=0), default=None, help="Override the scenario step limit.")
def cmd_run(scenario: str, seed: int, out: str, max_steps: int | None) -> None:
    """Run one simulation and write timeseries_<seed>.csv and summary_<seed>.json."""
    config = _load(scenario)
    try:
        summary = _run_one(config, seed, Path(out), max_steps)
    except OSError as exc:
        _fail(f"cannot write to {out}: {exc.strerror or exc}", 2)
    if summary.truncated:
        log.warning("run stopped at the step limit with infected agents remaining")


@main.command("gen-hex")
@click.option("--preset", "name", required=True, help="Experiment name.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Scenario JSON to write.")
def cmd_gen_hex(name: str, out: str) -> None:
    """Write the honeycomb scenario for a named experiment."""
    try:
        config = preset(name)
    except KeyError:
        _fail(f"unknown preset {name!r}; valid presets: {', '.join(PRESET_NAMES)}", 1)
    try:
        with open(out, "w") as fh:
            fh.write(write_scenario(config))
    except OSError as exc:
        _fail(f"cannot write {out}: {exc.strerror or exc}", 2)


@main.command("replicate")
@click.option("--scenario", required=True, type=click.Path(dir_okay=False), help="Scenario JSON file.")
@click.option("--n", type=int, default=None, help="Run seeds 0..n-1.")
@click.option("--seeds", default=None, help="Explicit comma separated seeds.")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True, help="Worker processes.")
@click.option("--max-steps", type=click.IntRange(min=0), default=None, help="Override the scenario step limit.")
def cmd_replicate(scenario: str, n: int | None, seeds: str | None, out: str, jobs: int,
                  max_steps: int | None) -> None:
    """Run an ensemble of seeds and write per-seed outputs plus ensemble.json."""
    seed_list = _seed_list(n, seeds)
    config = _load(scenario)
    out_dir = Path(out)
    summaries, failures = run_ensemble(config, seed_list, out_dir, jobs, max_steps)
    for seed, err in failures.items():
        click.echo(f"error: seed {seed} failed: {err}", err=True)
    if failures:
        sys.exit(1)
    result = ensemble_result(Path(scenario).stem, summaries)
    try:
        with open(out_dir / "ensemble.json", "w") as fh:
            fh.write(json.dumps(result, indent=2) + "\n")
    except OSError as exc:
        _fail(f"cannot write to {out}: {exc.strerror or exc}", 2)


@main.command("compare")
@click.option("--scenario", "scenarios", required=True, multiple=True, type=click.Path(dir_okay=False),
              help="Scenario JSON file; repeat for each strategy.")
@click.option("--n", type=int, required=True, help="Replications per scenario (seeds 0..n-1).")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="CSV table to write.")
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True, help="Worker processes.")
@click.option("--max-steps", type=click.IntRange(min=0), default=None, help="Override the scenario step limit.")
def cmd_compare(scenarios: tuple[str, ...], n: int, out: str, jobs: int, max_steps: int | None) -> None:
    """Rank scenarios by mean deaths over a common seed set."""
    if len(scenarios) < 2:
        _fail("compare needs at least two --scenario files", 1)
    seed_list = _seed_list(n, None)
    configs = [_load(p) for p in scenarios]
    out_path = Path(out)
    rows = []
    failed = False
    for path, config in zip(scenarios, configs):
        summaries, failures = run_ensemble(config, seed_list, None, jobs, max_steps)
        for seed, err in failures.items():
            click.echo(f"error: {path} seed {seed} failed: {err}", err=True)
        if failures:
            failed = True
            continue
        res = ensemble_result(Path(path).stem, summaries)
        rows.append([res[c] if c != "scenario" else res["scenarioName"] for c in COMPARE_COLUMNS])
    if failed:
        sys.exit(1)
    rows.sort(key=lambda r: r[1])  # stable, so ties keep the command line order
    try:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COMPARE_COLUMNS)
            writer.writerows(rows)
    except OSError as exc:
        _fail(f"cannot write {out}: {exc.strerror or exc}", 2)


if __name__ == "__main__":
    main()
