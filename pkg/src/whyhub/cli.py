"""Command line entry points: validate, replay, record, and serve scenarios."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .engine import ExplanationEngine
from .errors import WhyhubError
from .simulator import (
    HttpTarget,
    Scenario,
    build_engine,
    builtin_scenario,
    load_scenario,
    run_scenario,
)
from .timeutil import now_ms


def _load(path: str) -> Scenario:
    if path == "tv-mute":
        return builtin_scenario("tv_mute")
    return load_scenario(Path(path))


@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Explanation engine for rule-based smart environments."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING)


@main.command()
@click.argument("scenario")
def validate(scenario: str) -> None:
    """Validate a scenario file (use 'tv-mute' for the bundled one)."""
    try:
        loaded = _load(scenario)
    except WhyhubError as exc:
        click.echo(f"invalid: {exc}", err=True)
        sys.exit(1)
    click.echo(
        f"ok: {loaded.name} ({len(loaded.devices)} devices, {len(loaded.users)} users, "
        f"{len(loaded.rules)} rules, {len(loaded.timeline)} timeline entries)"
    )


@main.command()
@click.argument("scenario")
@click.option(
    "--engine",
    "engine_spec",
    default="embedded",
    show_default=True,
    help="'embedded' or the base URL of a live service.",
)
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON.")
def run(scenario: str, engine_spec: str, as_json: bool) -> None:
    """Replay a scenario and check its query expectations."""
    loaded = _load(scenario)
    if engine_spec == "embedded":
        report = run_scenario(loaded)
    else:
        report = run_scenario(loaded, target=HttpTarget(engine_spec))
    click.echo(report.to_json() if as_json else report.to_text(), nl=False)
    if not report.passed:
        sys.exit(1)


@main.command()
@click.argument("scenario")
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Write here instead of stdout.")
def record(scenario: str, output: str | None) -> None:
    """Replay a scenario's events and dump the resulting log as JSON lines."""
    loaded = _load(scenario)
    engine = build_engine(loaded)
    run_scenario(loaded, engine=engine, events_only=True)
    text = engine.log.export_ndjson()
    if output:
        Path(output).write_text(text, encoding="utf-8")
        click.echo(f"wrote {len(engine.log)} records to {output}")
    else:
        click.echo(text, nl=False)


@main.command()
@click.option("--scenario", "scenario_path", default="tv-mute", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8763, show_default=True, type=int)
@click.option(
    "--replay-events",
    default=-1,
    show_default=True,
    type=int,
    help="How many timeline events to replay at startup (-1 = all).",
)
@click.option(
    "--rebase/--no-rebase",
    default=True,
    show_default=True,
    help="Shift scenario instants so the anchor lands at startup time.",
)
@click.option("--static", "static_dir", type=click.Path(file_okay=False), default=None,
              help="Serve a built dashboard from this directory at /.")
def serve(
    scenario_path: str,
    host: str,
    port: int,
    replay_events: int,
    rebase: bool,
    static_dir: str | None,
) -> None:
    """Run the HTTP service seeded from a scenario."""
    import uvicorn

    from .service import create_app

    loaded = _load(scenario_path)
    if rebase:
        loaded = loaded.rebased(now_ms() - loaded.anchor)
    engine = build_engine(loaded)
    _replay_prefix(engine, loaded, replay_events)
    app = create_app(engine, static_dir=static_dir)
    click.echo(f"serving {loaded.name} on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


def _replay_prefix(engine: ExplanationEngine, scenario: Scenario, count: int) -> None:
    from .simulator import TimelineEvent

    replayed = 0
    for entry in scenario.timeline:
        if not isinstance(entry, TimelineEvent):
            continue
        if 0 <= count <= replayed:
            break
        engine.post_event(entry.record)
        replayed += 1


if __name__ == "__main__":
    main()
