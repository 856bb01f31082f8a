"""Edge-triggered rule execution.

A rule fires when its precondition tree flips from false to true as a
property change lands. Fired actions are logged a short, configurable
delay after the trigger so the triggering fact is strictly earlier than
the executions, which is exactly the shape the cause-path search
expects. Rules marked level-triggered instead fire on every property
change arriving while their tree is true.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable

from .causal import leaf_satisfied
from .eventlog import Absent
from .model import (
    Cause,
    EventKind,
    EventRecord,
    GroupOperator,
    Precondition,
    PreconditionGroup,
    PreconditionNode,
    Rule,
    Scalar,
)
from .timeutil import Millis

logger = logging.getLogger(__name__)

DEFAULT_ACTION_DELAY_MS = 100

StateLookup = Callable[[str, str], "Scalar | Absent"]


def evaluate_with_state(node: PreconditionNode, lookup: StateLookup) -> bool:
    """Evaluate a precondition tree against a point-in-time state lookup."""
    if isinstance(node, Precondition):
        value = lookup(node.entity, node.property)
        if isinstance(value, Absent):
            return False
        return leaf_satisfied(node, value)
    results = (evaluate_with_state(child, lookup) for child in node.children)
    if node.operator is GroupOperator.AND:
        return all(results)
    return any(results)


@dataclass(frozen=True)
class RuleFiring:
    """One firing: the rule, when it fired, and the records it emitted."""

    rule: Rule
    fired_at: Millis
    records: tuple[EventRecord, ...]


def simulate_rules(
    before: StateLookup,
    after: StateLookup,
    rules: Iterable[Rule],
    t: Millis,
    *,
    action_delay_ms: Millis = DEFAULT_ACTION_DELAY_MS,
    level_triggered: frozenset[str] = frozenset(),
) -> list[RuleFiring]:
    """Fire every rule whose tree transitions false->true between the
    ``before`` and ``after`` states at instant ``t``.

    Emits one firing record at ``t`` and the rule's actions at
    ``t + action_delay_ms``. The delay must be positive so executions sit
    strictly after their triggering fact.
    """
    if action_delay_ms <= 0:
        raise ValueError("action_delay_ms must be positive")
    firings: list[RuleFiring] = []
    for rule in sorted(rules, key=lambda r: r.id):
        now_true = evaluate_with_state(rule.preconditions, after)
        if not now_true:
            continue
        if rule.id not in level_triggered and evaluate_with_state(rule.preconditions, before):
            continue  # already true: no edge, no re-fire
        records = [
            EventRecord(
                timestamp=t,
                entity=rule.actions[0].entity,
                kind=EventKind.RULE_FIRED,
                name=rule.id,
                value=True,
                caused_by=Cause.none(),
            )
        ]
        for action in rule.actions:
            records.append(
                EventRecord(
                    timestamp=t + action_delay_ms,
                    entity=action.entity,
                    kind=EventKind.ACTION_EXECUTED,
                    name=action.action,
                    value=True if action.value is None else action.value,
                    caused_by=Cause.rule(rule.id),
                )
            )
        logger.debug("rule %s fired at %s", rule.id, t)
        firings.append(RuleFiring(rule=rule, fired_at=t, records=tuple(records)))
    return firings
