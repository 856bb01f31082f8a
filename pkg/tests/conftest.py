from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from whyhub.causal import find_cause_path
from whyhub.model import Explanandum
from whyhub.simulator import build_engine, builtin_scenario, run_scenario
from whyhub.timeutil import parse_instant


@pytest.fixture(scope="session")
def tv_scenario():
    return builtin_scenario("tv_mute")


@pytest.fixture()
def tv_engine(tv_scenario):
    """Fresh engine with the tv-mute events already replayed (no queries)."""
    engine = build_engine(tv_scenario)
    run_scenario(tv_scenario, engine=engine, events_only=True)
    return engine


@pytest.fixture()
def tv_path(tv_engine):
    explanandum = Explanandum(
        entity="tv",
        action="tv_mute",
        requested_at=parse_instant("2024-05-13T12:05:00.000Z"),
        explainee="bob",
    )
    path = find_cause_path(explanandum, tv_engine.rules, tv_engine.log)
    assert path is not None
    return path
