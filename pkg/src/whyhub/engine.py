"""Request orchestration: one object wiring the log, rules, context, and
rendering together.

``explain`` runs the full pipeline for one request: resolve the device
action to explain, search its cause path, assemble the construct set,
snapshot the explainee's context, infer the view, project, render, and
record the delivery in the occurrence history. Debug requests skip the
history write so exploration stays side-effect free, and only debug
requests may carry context overrides.

``post_event`` ingests an event and, for property changes, runs the
edge-triggered rules so automations behave live, the same way a hub
would execute them.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .causal import (
    DEFAULT_LOOKBACK_MINUTES,
    DEFAULT_SIMULTANEITY_MS,
    CausePath,
    find_cause_path,
)
from .context import ContextManager, UserDirectory, UserProfile
from .errors import NothingToExplainError, ValidationError
from .eventlog import ABSENT, EventLog, RuleTable
from .firing import DEFAULT_ACTION_DELAY_MS, RuleFiring, simulate_rules
from .model import (
    ContextSnapshot,
    EventKind,
    EventRecord,
    Explanandum,
    Explanation,
    ExplanationConstruct,
    Rule,
    Scalar,
    SmartObject,
    ViewKind,
    assemble_constructs,
    project_view,
)
from .presentation import Renderer
from .timeutil import MINUTE_MS, Millis, now_ms
from .views import ContextViewPolicy, infer_view, load_preset

logger = logging.getLogger(__name__)


@dataclass
class EngineConfig:
    lookback_minutes: int = DEFAULT_LOOKBACK_MINUTES
    simultaneity_ms: Millis = DEFAULT_SIMULTANEITY_MS
    action_delay_ms: Millis = DEFAULT_ACTION_DELAY_MS
    strict_window: bool = False
    fire_rules_on_ingest: bool = True
    level_triggered: frozenset[str] = frozenset()


@dataclass(frozen=True)
class ExplanationOutcome:
    """Everything one explain request produced.

    ``explanation`` is None when no rule caused the action; ``text`` then
    carries the no-cause wording.
    """

    explanandum: Explanandum
    view: ViewKind | None
    text: str
    snapshot: ContextSnapshot
    cause_path: CausePath | None
    constructs: frozenset[ExplanationConstruct] | None
    explanation: Explanation | None

    def to_dict(self, *, debug: bool = False) -> dict[str, Any]:
        out: dict[str, Any] = {
            "view": self.view.value if self.view else None,
            "text": self.text,
        }
        if debug:
            out["explanandum"] = {
                "entity": self.explanandum.entity,
                "action": self.explanandum.action,
                "explainee": self.explanandum.explainee,
            }
            out["snapshot"] = self.snapshot.to_dict()
            out["cause_path"] = self.cause_path.to_dict() if self.cause_path else None
            constructs = sorted(
                (c.to_dict() for c in self.constructs or ()),
                key=lambda c: (c["category"], c["kind"], c.get("position", 0)),
            )
            out["constructs"] = constructs
        return out


@dataclass
class PostResult:
    seq: int
    firings: list[RuleFiring] = field(default_factory=list)


class ExplanationEngine:
    """Shared core behind the HTTP service and the scenario runner."""

    def __init__(
        self,
        *,
        log: EventLog | None = None,
        rules: RuleTable | None = None,
        users: UserDirectory | None = None,
        context: ContextManager | None = None,
        renderer: Renderer | None = None,
        policies: tuple[ContextViewPolicy, ...] | None = None,
        devices: Mapping[str, SmartObject] | None = None,
        config: EngineConfig | None = None,
        clock: Callable[[], Millis] = now_ms,
    ) -> None:
        self.log = log if log is not None else EventLog()
        self.rules = rules if rules is not None else RuleTable()
        self.users = users if users is not None else UserDirectory()
        self.context = context if context is not None else ContextManager(self.users)
        self.renderer = renderer if renderer is not None else Renderer()
        self.policies = policies if policies is not None else load_preset()
        self.devices: dict[str, SmartObject] = dict(devices or {})
        self.config = config if config is not None else EngineConfig()
        self.clock = clock
        self._mutate = threading.RLock()
        self._state: dict[tuple[str, str], Scalar] = {}
        self._rebuild_state()
        for device in self.devices.values():
            self.renderer.entity_names.setdefault(device.id, device.name)
        for profile in self.users.all():
            self.renderer.user_names.setdefault(profile.id, profile.name)

    def _rebuild_state(self) -> None:
        for record in self.log.all_records():
            if record.kind is EventKind.PROPERTY_CHANGE:
                self._state[(record.entity, record.name)] = record.value

    # -- devices -----------------------------------------------------------

    def register_device(self, device: SmartObject) -> None:
        with self._mutate:
            self.devices[device.id] = device
            self.renderer.entity_names.setdefault(device.id, device.name)

    def _check_event_refs(self, record: EventRecord) -> None:
        if not self.devices:
            return
        device = self.devices.get(record.entity)
        if device is None:
            raise ValidationError(f"unknown entity {record.entity!r}")
        if record.kind is EventKind.PROPERTY_CHANGE and record.name not in device.properties:
            raise ValidationError(f"{record.entity!r} has no property {record.name!r}")
        if record.kind is EventKind.ACTION_EXECUTED and record.name not in device.actions:
            raise ValidationError(f"{record.entity!r} has no action {record.name!r}")

    def _check_rule_refs(self, rule: Rule) -> None:
        if not self.devices:
            return
        for leaf in rule.preconditions.leaves():
            device = self.devices.get(leaf.entity)
            if device is None or leaf.property not in device.properties:
                raise ValidationError(
                    f"rule {rule.id!r} references unknown property {leaf.entity}.{leaf.property}"
                )
        for action in rule.actions:
            device = self.devices.get(action.entity)
            if device is None or action.action not in device.actions:
                raise ValidationError(
                    f"rule {rule.id!r} references unknown action {action.entity}.{action.action}"
                )

    # -- ingestion and rule firing ------------------------------------------

    def post_event(self, record: EventRecord, *, fire_rules: bool | None = None) -> PostResult:
        """Ingest one event; property changes run the edge-triggered rules."""
        self._check_event_refs(record)
        fire = self.config.fire_rules_on_ingest if fire_rules is None else fire_rules
        with self._mutate:
            seq = self.log.ingest(record)
            result = PostResult(seq=seq)
            if not fire or record.kind is not EventKind.PROPERTY_CHANGE:
                return result
            key = (record.entity, record.name)
            previous = dict(self._state)
            self._state[key] = record.value

            def before(entity: str, name: str):
                return previous.get((entity, name), ABSENT)

            def after(entity: str, name: str):
                return self._state.get((entity, name), ABSENT)

            firings = simulate_rules(
                before,
                after,
                self.rules.active_at(record.timestamp),
                record.timestamp,
                action_delay_ms=self.config.action_delay_ms,
                level_triggered=self.config.level_triggered,
            )
            for firing in firings:
                for emitted in firing.records:
                    self.log.ingest(emitted)
            result.firings = firings
            return result

    # -- rule and user management -------------------------------------------

    def put_rule(self, rule: Rule, at: Millis | None = None) -> None:
        self._check_rule_refs(rule)
        with self._mutate:
            self.rules.put(rule, at if at is not None else self.clock())

    def delete_rule(self, rule_id: str, at: Millis | None = None) -> None:
        with self._mutate:
            self.rules.delete(rule_id, at if at is not None else self.clock())

    def put_user(self, profile: UserProfile) -> None:
        with self._mutate:
            self.users.put(profile)
            self.renderer.user_names[profile.id] = profile.name

    # -- explanation ---------------------------------------------------------

    def explain(
        self,
        user_id: str,
        *,
        entity: str | None = None,
        action: str | None = None,
        at: Millis | None = None,
        debug: bool = False,
        context_overrides: Mapping[str, str] | None = None,
    ) -> ExplanationOutcome:
        if (entity is None) != (action is None):
            raise ValidationError("entity and action must be given together or both omitted")
        if context_overrides and not debug:
            raise ValidationError("context overrides are only accepted in debug mode")
        self.users.get(user_id)  # raises UnknownUserError early
        requested_at = at if at is not None else self.clock()

        if entity is None:
            latest = self.log.latest_action(
                requested_at - self.config.lookback_minutes * MINUTE_MS,
                requested_at,
                exclude_user=user_id,
            )
            if latest is None:
                raise NothingToExplainError(
                    f"no recent system action within {self.config.lookback_minutes} minutes"
                )
            entity, action = latest.entity, latest.name
        assert action is not None

        explanandum = Explanandum(entity, action, requested_at, user_id)
        path = find_cause_path(
            explanandum,
            self.rules,
            self.log,
            lookback_minutes=self.config.lookback_minutes,
            simultaneity_ms=self.config.simultaneity_ms,
            strict_window=self.config.strict_window,
        )

        snapshot = self.context.snapshot(user_id, (entity, action), requested_at)
        if context_overrides:
            snapshot = snapshot.with_overrides(context_overrides)

        if path is None:
            outcome = ExplanationOutcome(
                explanandum=explanandum,
                view=None,
                text=self.renderer.render_no_cause(explanandum, snapshot),
                snapshot=snapshot,
                cause_path=None,
                constructs=None,
                explanation=None,
            )
        else:
            constructs = assemble_constructs(path, self.rules)
            view = infer_view(snapshot, self.policies)
            projected = project_view(constructs, view)
            text = self.renderer.render(projected, view, snapshot)
            outcome = ExplanationOutcome(
                explanandum=explanandum,
                view=view,
                text=text,
                snapshot=snapshot,
                cause_path=path,
                constructs=constructs,
                explanation=Explanation(explanandum, constructs, view, text),
            )

        if not debug:
            self.context.record_delivery(user_id, (entity, action), requested_at)
        return outcome
