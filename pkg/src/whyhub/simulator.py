"""Deterministic scenario replay.

A scenario file declares devices, users (with state schedules), rules
(with phrase maps), and a strictly time-ordered timeline mixing device
events and explanation queries. Replay runs on virtual time: events are
ingested at their declared instants (firing rules as they land), queries
execute against the same instants, and the run report compares each
query's view and text against its expectation. The report content is a
pure function of the scenario, so two runs produce identical bytes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Protocol

import httpx

from .context import (
    ContextManager,
    ExplanationHistory,
    ScheduleEntry,
    ScheduleStateProvider,
    UserDirectory,
    UserProfile,
)
from .engine import EngineConfig, ExplanationEngine
from .errors import ScenarioValidationError, ValidationError, WhyhubError
from .eventlog import EventLog, RuleTable, rule_from_dict, rule_to_dict
from .model import EventRecord, Rule, SmartObject, UserState
from .presentation import Renderer
from .timeutil import Millis, format_instant, parse_instant
from .views import ContextViewPolicy, load_preset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimelineEvent:
    at: Millis
    record: EventRecord


@dataclass(frozen=True)
class TimelineQuery:
    at: Millis
    user: str
    entity: str | None = None
    action: str | None = None
    debug: bool = False
    expect_view: str | None = None
    expect_text: str | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    anchor: Millis
    devices: tuple[SmartObject, ...]
    users: tuple[UserProfile, ...]
    schedules: tuple[ScheduleEntry, ...]
    rules: tuple[Rule, ...]
    phrases: Mapping[str, str]
    level_triggered: frozenset[str]
    timeline: tuple[TimelineEvent | TimelineQuery, ...]

    def rebased(self, offset: Millis) -> Scenario:
        """Shift every instant by ``offset`` (used to replay "as of now")."""

        def shift(entry: TimelineEvent | TimelineQuery):
            if isinstance(entry, TimelineEvent):
                return TimelineEvent(
                    entry.at + offset,
                    replace(entry.record, timestamp=entry.record.timestamp + offset),
                )
            return replace(entry, at=entry.at + offset)

        return replace(
            self,
            anchor=self.anchor + offset,
            schedules=tuple(
                replace(s, start=s.start + offset, end=s.end + offset) for s in self.schedules
            ),
            timeline=tuple(shift(e) for e in self.timeline),
        )


# ---------------------------------------------------------------------------
# Loading and validation


def load_scenario(source: str | Path | Mapping[str, Any]) -> Scenario:
    if isinstance(source, (str, Path)):
        try:
            data = json.loads(Path(source).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioValidationError(f"cannot load scenario {source}: {exc}") from exc
    else:
        data = source
    try:
        return _parse_scenario(data)
    except (KeyError, TypeError, ValueError, ValidationError) as exc:
        raise ScenarioValidationError(f"bad scenario: {exc}") from exc


def builtin_scenario(name: str = "tv_mute") -> Scenario:
    text = resources.files("whyhub").joinpath("data", "scenarios", f"{name}.json").read_text("utf-8")
    return load_scenario(json.loads(text))


def _parse_scenario(data: Mapping[str, Any]) -> Scenario:
    devices = tuple(
        SmartObject(
            id=d["id"],
            name=d.get("name", d["id"]),
            properties=frozenset(d.get("properties", ())),
            actions=frozenset(d.get("actions", ())),
        )
        for d in data.get("devices", ())
    )
    users: list[UserProfile] = []
    schedules: list[ScheduleEntry] = []
    for entry in data.get("users", ()):
        users.append(UserProfile.from_dict(entry))
        for slot in entry.get("schedule", ()):
            schedules.append(
                ScheduleEntry(
                    user_id=entry["id"],
                    start=parse_instant(slot["from"]),
                    end=parse_instant(slot["to"]),
                    state=UserState(slot["state"]),
                )
            )
    rules: list[Rule] = []
    phrases: dict[str, str] = {}
    level_triggered: set[str] = set()
    for entry in data.get("rules", ()):
        rule = rule_from_dict(entry)
        rules.append(rule)
        phrases.update(entry.get("phrases", {}))
        if entry.get("level_triggered"):
            level_triggered.add(rule.id)

    timeline: list[TimelineEvent | TimelineQuery] = []
    for entry in data.get("timeline", ()):
        at = parse_instant(entry["at"])
        if entry.get("type") == "query":
            expect = entry.get("expect") or {}
            timeline.append(
                TimelineQuery(
                    at=at,
                    user=entry["user"],
                    entity=entry.get("entity"),
                    action=entry.get("action"),
                    debug=bool(entry.get("debug", False)),
                    expect_view=expect.get("view"),
                    expect_text=expect.get("text"),
                )
            )
        else:
            payload = dict(entry)
            payload["ts"] = entry["at"]
            for drop in ("type", "at"):
                payload.pop(drop, None)
            timeline.append(TimelineEvent(at=at, record=EventRecord.from_dict(payload)))

    scenario = Scenario(
        name=data.get("name", "scenario"),
        anchor=parse_instant(data["anchor"]) if "anchor" in data else _default_anchor(timeline),
        devices=devices,
        users=tuple(users),
        schedules=tuple(schedules),
        rules=tuple(rules),
        phrases=phrases,
        level_triggered=frozenset(level_triggered),
        timeline=tuple(timeline),
    )
    _validate_scenario(scenario)
    return scenario


def _default_anchor(timeline: list[TimelineEvent | TimelineQuery]) -> Millis:
    events = [e.at for e in timeline if isinstance(e, TimelineEvent)]
    return max(events) if events else 0


def _validate_scenario(scenario: Scenario) -> None:
    device_ids = {d.id: d for d in scenario.devices}
    user_ids = {u.id for u in scenario.users}

    previous: Millis | None = None
    for entry in scenario.timeline:
        if previous is not None and entry.at <= previous:
            raise ScenarioValidationError(
                f"timeline must be strictly time-ordered; {format_instant(entry.at)} "
                f"does not follow {format_instant(previous)}"
            )
        previous = entry.at
        if isinstance(entry, TimelineEvent):
            record = entry.record
            device = device_ids.get(record.entity)
            if device is None:
                raise ScenarioValidationError(f"timeline references unknown entity {record.entity!r}")
            if record.kind.value == "property_change" and record.name not in device.properties:
                raise ScenarioValidationError(
                    f"{record.entity!r} has no property {record.name!r}"
                )
            if record.kind.value == "action_executed" and record.name not in device.actions:
                raise ScenarioValidationError(f"{record.entity!r} has no action {record.name!r}")
        else:
            if entry.user not in user_ids:
                raise ScenarioValidationError(f"query references unknown user {entry.user!r}")
            if (entry.entity is None) != (entry.action is None):
                raise ScenarioValidationError("query needs both entity and action, or neither")
            if entry.entity is not None:
                device = device_ids.get(entry.entity)
                if device is None or entry.action not in device.actions:
                    raise ScenarioValidationError(
                        f"query references unknown action {entry.entity}.{entry.action}"
                    )

    for rule in scenario.rules:
        if rule.owner not in user_ids:
            raise ScenarioValidationError(f"rule {rule.id!r} owner {rule.owner!r} is not a user")
        for leaf in rule.preconditions.leaves():
            device = device_ids.get(leaf.entity)
            if device is None or leaf.property not in device.properties:
                raise ScenarioValidationError(
                    f"rule {rule.id!r} references unknown property {leaf.entity}.{leaf.property}"
                )
        for action in rule.actions:
            device = device_ids.get(action.entity)
            if device is None or action.action not in device.actions:
                raise ScenarioValidationError(
                    f"rule {rule.id!r} references unknown action {action.entity}.{action.action}"
                )


# ---------------------------------------------------------------------------
# Engine wiring


def build_engine(
    scenario: Scenario,
    *,
    policies: tuple[ContextViewPolicy, ...] | None = None,
    config: EngineConfig | None = None,
) -> ExplanationEngine:
    """Fresh embedded engine with the scenario's static setup loaded."""
    users = UserDirectory(scenario.users)
    rules = RuleTable()
    for rule in scenario.rules:
        rules.put(rule, at=0)
    renderer = Renderer(
        phrases=scenario.phrases,
        user_names=users.names(),
        entity_names={d.id: d.name for d in scenario.devices},
    )
    context = ContextManager(
        users,
        ExplanationHistory(),
        ScheduleStateProvider(scenario.schedules),
    )
    engine_config = config if config is not None else EngineConfig()
    engine_config = replace(engine_config, level_triggered=scenario.level_triggered)
    return ExplanationEngine(
        log=EventLog(),
        rules=rules,
        users=users,
        context=context,
        renderer=renderer,
        policies=policies if policies is not None else load_preset(),
        devices={d.id: d for d in scenario.devices},
        config=engine_config,
    )


# ---------------------------------------------------------------------------
# Replay targets (embedded engine or live HTTP service)


class ReplayTarget(Protocol):
    def post_event(self, record: EventRecord) -> Any: ...

    def explain_query(self, query: TimelineQuery) -> tuple[str | None, str]: ...


class EmbeddedTarget:
    def __init__(self, engine: ExplanationEngine) -> None:
        self.engine = engine

    def post_event(self, record: EventRecord) -> Any:
        return self.engine.post_event(record)

    def explain_query(self, query: TimelineQuery) -> tuple[str | None, str]:
        outcome = self.engine.explain(
            query.user,
            entity=query.entity,
            action=query.action,
            at=query.at,
            debug=query.debug,
        )
        return (outcome.view.value if outcome.view else None, outcome.text)


class HttpTarget:
    """Drives a live service over its JSON API."""

    def __init__(self, base_url: str, *, setup: bool = True, timeout: float = 10.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.client = httpx.Client(base_url=self.base_url, timeout=timeout)
        self.setup = setup

    def prepare(self, scenario: Scenario) -> None:
        if not self.setup:
            return
        for user in scenario.users:
            self.client.put("/users", json=user.to_dict()).raise_for_status()
        for rule in scenario.rules:
            response = self.client.put("/rules", json=rule_to_dict(rule))
            if response.status_code not in (200, 409):
                response.raise_for_status()

    def post_event(self, record: EventRecord) -> Any:
        response = self.client.post("/events", json=record.to_dict())
        response.raise_for_status()
        return response.json()

    def explain_query(self, query: TimelineQuery) -> tuple[str | None, str]:
        payload: dict[str, Any] = {"user_id": query.user, "at": format_instant(query.at)}
        if query.entity is not None:
            payload["entity"] = query.entity
            payload["action"] = query.action
        if query.debug:
            payload["debug"] = True
        response = self.client.post("/explanations", json=payload)
        response.raise_for_status()
        data = response.json()
        return (data.get("view"), data.get("text", ""))


# ---------------------------------------------------------------------------
# Run report


@dataclass
class QueryResult:
    at: Millis
    user: str
    entity: str | None
    action: str | None
    expected_view: str | None
    expected_text: str | None
    actual_view: str | None
    actual_text: str
    error: str | None = None

    @property
    def checked(self) -> bool:
        return self.expected_view is not None or self.expected_text is not None

    @property
    def passed(self) -> bool:
        if self.error is not None:
            return False
        if self.expected_view is not None and self.expected_view != self.actual_view:
            return False
        if self.expected_text is not None and self.expected_text != self.actual_text:
            return False
        return True

    def to_dict(self) -> dict[str, Any]:
        return {
            "at": format_instant(self.at),
            "user": self.user,
            "entity": self.entity,
            "action": self.action,
            "expected_view": self.expected_view,
            "expected_text": self.expected_text,
            "actual_view": self.actual_view,
            "actual_text": self.actual_text,
            "error": self.error,
            "passed": self.passed,
        }


@dataclass
class RunReport:
    scenario: str
    results: list[QueryResult] = field(default_factory=list)
    fired: list[tuple[str, Millis]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> int:
        return sum(1 for r in self.results if not r.passed)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "passed": self.passed,
            "queries": [r.to_dict() for r in self.results],
            "fired_rules": [
                {"rule": rule_id, "at": format_instant(at)} for rule_id, at in self.fired
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"scenario: {self.scenario}"]
        for rule_id, at in self.fired:
            lines.append(f"  fired {rule_id} at {format_instant(at)}")
        for result in self.results:
            mark = "PASS" if result.passed else "FAIL"
            if not result.checked and result.error is None:
                mark = "OK  "
            target = f"{result.entity}.{result.action}" if result.entity else "(latest)"
            lines.append(
                f"  [{mark}] {format_instant(result.at)} {result.user} {target} "
                f"-> {result.actual_view or 'no-cause'}: {result.actual_text}"
            )
            if result.error is not None:
                lines.append(f"         error: {result.error}")
            elif not result.passed:
                if result.expected_view is not None and result.expected_view != result.actual_view:
                    lines.append(f"         expected view: {result.expected_view}")
                if result.expected_text is not None and result.expected_text != result.actual_text:
                    lines.append(f"         expected text: {result.expected_text}")
        lines.append(f"result: {'PASS' if self.passed else 'FAIL'} ({self.failures} failing)")
        return "\n".join(lines) + "\n"


def run_scenario(
    scenario: Scenario,
    target: ReplayTarget | None = None,
    *,
    engine: ExplanationEngine | None = None,
    events_only: bool = False,
) -> RunReport:
    """Replay a scenario and report per-query outcomes.

    By default builds a fresh embedded engine; pass a target to drive a
    live service instead. Failed expectations are recorded, not raised.
    """
    if target is None:
        target = EmbeddedTarget(engine if engine is not None else build_engine(scenario))
    if isinstance(target, HttpTarget):
        target.prepare(scenario)

    report = RunReport(scenario=scenario.name)
    for entry in scenario.timeline:
        if isinstance(entry, TimelineEvent):
            result = target.post_event(entry.record)
            firings = getattr(result, "firings", None)
            if firings is not None:
                report.fired.extend((f.rule.id, f.fired_at) for f in firings)
            elif isinstance(result, Mapping):
                report.fired.extend((rid, entry.at) for rid in result.get("fired_rules", ()))
            continue
        if events_only:
            continue
        error = None
        view: str | None = None
        text = ""
        try:
            view, text = target.explain_query(entry)
        except WhyhubError as exc:
            error = f"{exc.code}: {exc}"
        except httpx.HTTPStatusError as exc:
            body = exc.response.json() if exc.response.content else {}
            error = f"{body.get('code', exc.response.status_code)}: {body.get('message', '')}"
        report.results.append(
            QueryResult(
                at=entry.at,
                user=entry.user,
                entity=entry.entity,
                action=entry.action,
                expected_view=entry.expect_view,
                expected_text=entry.expect_text,
                actual_view=view,
                actual_text=text,
                error=error,
            )
        )
    return report
