"""Shared test fixtures: random generators and independent oracles.

The oracles deliberately re-derive results from raw record lists with
plain scans and recursion so they share no code path with the engine
under test.
"""

from __future__ import annotations

import random
from typing import Any, Iterable, Sequence

from whyhub.model import (
    Cause,
    Comparator,
    EventKind,
    EventRecord,
    GroupOperator,
    Precondition,
    PreconditionGroup,
    PreconditionNode,
    Rule,
    RuleAction,
)

BASE_MS = 1_700_000_000_000  # fixed test epoch

STRING_VALUES = ("on", "off", "idle")
INT_VALUES = (0, 1, 2, 3)


# ---------------------------------------------------------------------------
# Generators


def gen_leaf(rng: random.Random, slots: Sequence[tuple[str, str]]) -> Precondition:
    entity, prop = rng.choice(list(slots))
    kind = rng.choice(("bool", "int", "str"))
    if kind == "bool":
        comparator = rng.choice((Comparator.EQ, Comparator.NE))
        value: Any = rng.choice((True, False))
    elif kind == "int":
        comparator = rng.choice(list(Comparator))
        value = rng.choice(INT_VALUES)
    else:
        comparator = rng.choice((Comparator.EQ, Comparator.NE))
        value = rng.choice(STRING_VALUES)
    return Precondition(entity=entity, property=prop, comparator=comparator, value=value)


def gen_tree(
    rng: random.Random,
    slots: Sequence[tuple[str, str]],
    max_depth: int = 4,
) -> PreconditionGroup:
    def node(depth: int) -> PreconditionNode:
        if depth >= max_depth or rng.random() < 0.4:
            return gen_leaf(rng, slots)
        children = tuple(node(depth + 1) for _ in range(rng.randint(1, 3)))
        return PreconditionGroup(rng.choice(list(GroupOperator)), children)

    root = node(1)
    if isinstance(root, Precondition):
        root = PreconditionGroup(GroupOperator.AND, (root,))
    return root


def gen_property_events(
    rng: random.Random,
    slots: Sequence[tuple[str, str]],
    count: int,
    start: int = BASE_MS,
    spacing: int | None = None,
) -> list[EventRecord]:
    records = []
    t = start
    for _ in range(count):
        t += spacing if spacing is not None else rng.randint(1, 5000)
        entity, prop = rng.choice(list(slots))
        value = rng.choice((True, False) + STRING_VALUES + INT_VALUES)
        records.append(
            EventRecord(
                timestamp=t,
                entity=entity,
                kind=EventKind.PROPERTY_CHANGE,
                name=prop,
                value=value,
                caused_by=Cause.none(),
            )
        )
    return records


def gen_rules(
    rng: random.Random,
    slots: Sequence[tuple[str, str]],
    count: int,
    *,
    max_depth: int = 4,
) -> list[Rule]:
    """Rules with globally unique action names, so systems are conflict-free."""
    entities = sorted({entity for entity, _ in slots})
    rules = []
    for i in range(count):
        actions = tuple(
            RuleAction(
                entity=rng.choice(entities),
                action=f"act_{i}_{j}",
                value=rng.choice((None, None, None, True, "on", 2)),
            )
            for j in range(rng.randint(1, 2))
        )
        rules.append(
            Rule(
                id=f"rule_{i:02d}",
                name=f"Rule {i}",
                description=f"generated rule number {i}",
                owner="u1",
                preconditions=gen_tree(rng, slots, max_depth),
                actions=actions,
            )
        )
    return rules


# ---------------------------------------------------------------------------
# Oracles (independent reimplementations)


def oracle_state_before(
    records: Iterable[EventRecord],
    entity: str,
    prop: str,
    t: int,
    *,
    not_before: int | None = None,
) -> Any:
    """Last property write strictly before t, via a plain forward fold."""
    value = None
    seen = False
    for record in records:  # ingestion order; later same-ts writes win
        if record.kind is not EventKind.PROPERTY_CHANGE:
            continue
        if record.entity != entity or record.name != prop:
            continue
        if record.timestamp >= t:
            continue
        if not_before is not None and record.timestamp < not_before:
            continue
        if not seen or record.timestamp >= _ts_of(value):
            value = record
            seen = True
    return value


def _ts_of(record: EventRecord | None) -> int:
    return record.timestamp if record is not None else -(10**18)


def oracle_leaf(leaf: Precondition, state: Any) -> bool:
    """Leaf comparison re-derived from the documented value-class rules."""
    v = leaf.value
    op = leaf.comparator.value
    classes = {bool: "bool", int: "num", float: "num", str: "str"}

    def cls(x: Any) -> str:
        if isinstance(x, bool):
            return "bool"
        return classes[type(x)]

    if op in ("=", "!="):
        same = cls(state) == cls(v) and state == v
        return same if op == "=" else not same
    if cls(state) != "num" or cls(v) != "num":
        return False
    return {"<": state < v, "<=": state <= v, ">": state > v, ">=": state >= v}[op]


def oracle_eval(
    node: PreconditionNode,
    records: Sequence[EventRecord],
    t: int,
    *,
    not_before: int | None = None,
) -> bool:
    """Substitute reconstructed leaf values, then fold the formula."""
    if isinstance(node, Precondition):
        witness = oracle_state_before(records, node.entity, node.property, t, not_before=not_before)
        return witness is not None and oracle_leaf(node, witness.value)
    truths = [oracle_eval(child, records, t, not_before=not_before) for child in node.children]
    return all(truths) if node.operator is GroupOperator.AND else any(truths)


def oracle_cause_rules(
    rules: Sequence[Rule],
    records: Sequence[EventRecord],
    entity: str,
    action: str,
    requested_at: int,
    *,
    lookback_ms: int,
    tolerance_ms: int,
    strict_window: bool = False,
) -> tuple[str | None, list[str]]:
    """Brute-force qualification of every rule.

    Returns ("action_not_found", []) when the explained action never ran
    in the window, else (None, [qualifying rule ids]).
    """
    start = requested_at - lookback_ms
    windowed = [r for r in records if start <= r.timestamp <= requested_at]

    executions = [
        r
        for r in windowed
        if r.kind is EventKind.ACTION_EXECUTED and r.entity == entity and r.name == action
    ]
    if not executions:
        return "action_not_found", []
    t = max(r.timestamp for r in executions)

    def action_ran(rule_action: RuleAction) -> bool:
        for r in windowed:
            if r.kind is not EventKind.ACTION_EXECUTED:
                continue
            if r.entity != rule_action.entity or r.name != rule_action.action:
                continue
            if abs(r.timestamp - t) > tolerance_ms:
                continue
            if rule_action.value is not None and r.value != rule_action.value:
                continue
            return True
        return False

    qualifying = []
    for rule in rules:
        if not any(a.entity == entity and a.action == action for a in rule.actions):
            continue
        if not all(action_ran(a) for a in rule.actions):
            continue
        source = windowed if strict_window else records
        bound = start if strict_window else None
        if not oracle_eval(rule.preconditions, source, t, not_before=bound):
            continue
        qualifying.append(rule.id)
    return None, sorted(qualifying)
