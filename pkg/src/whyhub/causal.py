"""Cause-path search over the event log.

Given a device action to explain, the search walks the rule table and
the log window to find the single rule whose firing accounts for it.
A rule qualifies only if

  1. the action belongs to the rule's action list,
  2. every action of the rule was executed within the simultaneity
     tolerance of the explained one (multi-action rules execute as a
     block),
  3. each satisfying precondition fact was established strictly before
     the execution, and
  4. the whole precondition tree evaluates true at execution time.

Precondition trees evaluate bottom-up: each leaf reads the reconstructed
property state just before the execution instant, groups combine by
AND/OR. A property that was never written makes its leaf false.

Explicit rule-firing log entries are never required; when present they
are only cross-checked against the semantic result and a mismatch is
logged as a warning.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Iterable

from .errors import ActionNotFoundError, AmbiguousCauseError
from .eventlog import EventLog, LogWindow, RuleTable
from .model import (
    EventKind,
    EventRecord,
    Explanandum,
    GroupOperator,
    Precondition,
    PreconditionGroup,
    PreconditionNode,
    Rule,
    RuleAction,
    Scalar,
)
from .timeutil import MINUTE_MS, Millis

logger = logging.getLogger(__name__)

DEFAULT_LOOKBACK_MINUTES = 30
DEFAULT_SIMULTANEITY_MS = 2000


@dataclass(frozen=True)
class CausePath:
    """The fired rule plus the evidence that explains one executed action."""

    fired_rule: str
    satisfying_events: tuple[tuple[Precondition, EventRecord], ...]
    sibling_actions: tuple[tuple[RuleAction, EventRecord], ...]
    fired_at: Millis
    explanandum_event: EventRecord

    def to_dict(self) -> dict[str, Any]:
        return {
            "fired_rule": self.fired_rule,
            "fired_at": self.explanandum_event.to_dict()["ts"],
            "satisfying_events": [
                {"precondition": p.key(), "event": e.to_dict()}
                for p, e in self.satisfying_events
            ],
            "sibling_actions": [
                {"action": f"{a.entity}.{a.action}", "event": e.to_dict()}
                for a, e in self.sibling_actions
            ],
            "explanandum_event": self.explanandum_event.to_dict(),
        }


# ---------------------------------------------------------------------------
# Leaf and tree evaluation


def _plain_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def leaf_satisfied(leaf: Precondition, state: Scalar) -> bool:
    """Compare a reconstructed property value against one leaf condition.

    Equality requires matching value classes (bool, number, string);
    ordering comparators require plain numbers on both sides and are
    false otherwise.
    """
    op = leaf.comparator.value
    if op in ("=", "!="):
        if isinstance(state, bool) or isinstance(leaf.value, bool):
            equal = isinstance(state, bool) and isinstance(leaf.value, bool) and state == leaf.value
        elif _plain_number(state) and _plain_number(leaf.value):
            equal = state == leaf.value
        elif isinstance(state, str) and isinstance(leaf.value, str):
            equal = state == leaf.value
        else:
            equal = False
        return equal if op == "=" else not equal
    if not (_plain_number(state) and _plain_number(leaf.value)):
        return False
    if op == "<":
        return state < leaf.value
    if op == "<=":
        return state <= leaf.value
    if op == ">":
        return state > leaf.value
    return state >= leaf.value


def _walk(
    node: PreconditionNode, window: LogWindow, t: Millis, strict_window: bool
) -> tuple[bool, list[tuple[Precondition, EventRecord]]]:
    """Evaluate a tree and collect the leaf facts supporting its truth."""
    if isinstance(node, Precondition):
        record = window.state_record_before(
            node.entity, node.property, t, strict_window=strict_window
        )
        if record is None or not leaf_satisfied(node, record.value):
            return False, []
        return True, [(node, record)]
    if node.operator is GroupOperator.AND:
        collected: list[tuple[Precondition, EventRecord]] = []
        for child in node.children:
            ok, facts = _walk(child, window, t, strict_window)
            if not ok:
                return False, []
            collected.extend(facts)
        return True, collected
    # OR: true if any child is true; keep the facts of every true branch
    # (declaration order) so the path is deterministic.
    any_true = False
    collected = []
    for child in node.children:
        ok, facts = _walk(child, window, t, strict_window)
        if ok:
            any_true = True
            collected.extend(facts)
    return any_true, collected if any_true else []


def eval_preconditions(
    group: PreconditionGroup,
    window: LogWindow,
    t: Millis,
    *,
    strict_window: bool = False,
) -> bool:
    """Truth value of a precondition tree against state strictly before ``t``."""
    ok, _ = _walk(group, window, t, strict_window)
    return ok


# ---------------------------------------------------------------------------
# Cause-path search


def _action_witness(
    action: RuleAction, window: LogWindow, t: Millis, tolerance: Millis
) -> EventRecord | None:
    """Execution record for one rule action within the simultaneity tolerance.

    Picks the record closest to ``t`` (earlier wins a tie) so repeated
    executions resolve deterministically. When the rule action carries an
    argument the record value must match it.
    """
    best: EventRecord | None = None
    best_key: tuple[int, Millis] | None = None
    for record in window.records:
        if record.kind is not EventKind.ACTION_EXECUTED:
            continue
        if record.entity != action.entity or record.name != action.action:
            continue
        if abs(record.timestamp - t) > tolerance:
            continue
        if action.value is not None and record.value != action.value:
            continue
        key = (abs(record.timestamp - t), record.timestamp)
        if best_key is None or key < best_key:
            best, best_key = record, key
    return best


def _candidate_rules(rules: Any, entity: str, action: str, t: Millis) -> list[Rule]:
    if isinstance(rules, RuleTable):
        pool: Iterable[Rule] = rules.active_at(t)
    else:
        pool = rules
    return sorted((r for r in pool if r.triggers(entity, action)), key=lambda r: r.id)


def find_cause_path(
    explanandum: Explanandum,
    rules: RuleTable | Iterable[Rule],
    log: EventLog,
    *,
    lookback_minutes: int = DEFAULT_LOOKBACK_MINUTES,
    simultaneity_ms: Millis = DEFAULT_SIMULTANEITY_MS,
    strict_window: bool = False,
) -> CausePath | None:
    """Identify the rule firing behind an executed action, or None.

    Returns None when no rule satisfies all four conditions (the action
    was manual or external). Raises ActionNotFoundError when the action
    itself never executed inside the lookback window, and
    AmbiguousCauseError when more than one rule qualifies.
    """
    if lookback_minutes <= 0:
        raise ValueError("lookback_minutes must be positive")
    requested = explanandum.requested_at
    window = log.window(requested - lookback_minutes * MINUTE_MS, requested)

    execution = _latest_execution(window, explanandum.entity, explanandum.action)
    if execution is None:
        raise ActionNotFoundError(
            f"no execution of {explanandum.entity}.{explanandum.action} in the last "
            f"{lookback_minutes} minutes before {requested}"
        )
    t = execution.timestamp

    matches: list[CausePath] = []
    for rule in _candidate_rules(rules, explanandum.entity, explanandum.action, t):
        siblings: list[tuple[RuleAction, EventRecord]] = []
        for action in rule.actions:
            witness = _action_witness(action, window, t, simultaneity_ms)
            if witness is None:
                siblings = []
                break
            siblings.append((action, witness))
        if not siblings:
            continue
        satisfied, facts = _walk(rule.preconditions, window, t, strict_window)
        if not satisfied:
            continue
        matches.append(
            CausePath(
                fired_rule=rule.id,
                satisfying_events=tuple(facts),
                sibling_actions=tuple(siblings),
                fired_at=t,
                explanandum_event=execution,
            )
        )

    _cross_check_firing_records(window, t, simultaneity_ms, matches)

    if not matches:
        return None
    if len(matches) > 1:
        raise AmbiguousCauseError([m.fired_rule for m in matches])
    return matches[0]


def _latest_execution(window: LogWindow, entity: str, action: str) -> EventRecord | None:
    for record in reversed(window.records):
        if (
            record.kind is EventKind.ACTION_EXECUTED
            and record.entity == entity
            and record.name == action
        ):
            return record
    return None


def _cross_check_firing_records(
    window: LogWindow, t: Millis, tolerance: Millis, matches: list[CausePath]
) -> None:
    """Warn when explicit firing log entries disagree with the semantic result."""
    logged = {
        record.name
        for record in window.records
        if record.kind is EventKind.RULE_FIRED and abs(record.timestamp - t) <= tolerance
    }
    if not logged:
        return
    found = {m.fired_rule for m in matches}
    if found and not (found & logged):
        logger.warning(
            "firing records %s disagree with resolved cause %s", sorted(logged), sorted(found)
        )
