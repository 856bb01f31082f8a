"""Event log store and versioned rule table.

The log is an append-only sequence of event records. Ingestion order is
the durable tiebreak for identical timestamps, windows slice by
``(timestamp, sequence)``, and ``state_at`` reconstructs a property with
last-write-wins semantics. An optional file path turns the in-memory
store into an embedded on-disk one: each ingest appends a JSON line and
the file is replayed on open, which reproduces the exact sequence.

Rules live in a separate table that versions instead of overwriting, so
explanations of past firings stay correct after a rule is edited or
removed.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from .errors import ConflictError, RangeError, StorageError, UnknownRuleError, ValidationError
from .model import (
    EventKind,
    EventRecord,
    GroupOperator,
    Precondition,
    PreconditionGroup,
    PreconditionNode,
    Rule,
    RuleAction,
    Scalar,
    parse_comparator,
    validate_scalar,
)
from .timeutil import DAY_MS, Millis

logger = logging.getLogger(__name__)


class Absent:
    """Sentinel for 'this property has never been written'."""

    _instance: Absent | None = None

    def __new__(cls) -> Absent:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ABSENT"

    def __bool__(self) -> bool:
        return False


ABSENT = Absent()


@dataclass(frozen=True)
class LogWindow:
    """Time slice of the log, sorted ascending by (timestamp, sequence).

    Windows built by :meth:`EventLog.window` keep a handle on their
    source log so state reconstruction can see writes that predate the
    window; standalone windows fall back to their own records.
    """

    records: tuple[EventRecord, ...]
    start: Millis
    end: Millis
    source: "EventLog | None" = None

    def state_record_before(
        self, entity: str, name: str, t: Millis, *, strict_window: bool = False
    ) -> EventRecord | None:
        """Latest property change for (entity, name) strictly before ``t``.

        With ``strict_window`` (or no source log) only records inside the
        window count, so state established earlier is invisible.
        """
        if not strict_window and self.source is not None:
            return self.source.state_record_at(entity, name, t, before=True)
        for record in reversed(self.records):
            if (
                record.timestamp < t
                and record.kind is EventKind.PROPERTY_CHANGE
                and record.entity == entity
                and record.name == name
            ):
                return record
        return None

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


class EventLog:
    """Append-only event store with windowed queries and state reconstruction."""

    def __init__(self, path: str | Path | None = None, *, retention_days: int | None = None):
        self._records: list[EventRecord] = []
        self._lock = threading.Lock()
        self._path = Path(path) if path is not None else None
        self.retention_days = retention_days
        if self._path is not None and self._path.exists():
            self._replay_file()

    # -- persistence -------------------------------------------------------

    def _replay_file(self) -> None:
        assert self._path is not None
        try:
            with self._path.open("r", encoding="utf-8") as fp:
                for line in fp:
                    line = line.strip()
                    if line:
                        self._records.append(EventRecord.from_dict(json.loads(line)))
        except OSError as exc:
            raise StorageError(f"cannot read event log {self._path}: {exc}") from exc
        except (json.JSONDecodeError, ValidationError) as exc:
            raise StorageError(f"corrupt event log {self._path}: {exc}") from exc

    def _append_file(self, record: EventRecord) -> None:
        assert self._path is not None
        try:
            with self._path.open("a", encoding="utf-8") as fp:
                fp.write(json.dumps(record.to_dict()) + "\n")
        except OSError as exc:
            raise StorageError(f"cannot append to event log {self._path}: {exc}") from exc

    # -- operations --------------------------------------------------------

    def ingest(self, record: EventRecord) -> int:
        """Store one record; returns its sequence number."""
        if not isinstance(record, EventRecord):
            raise ValidationError(f"not an event record: {record!r}")
        with self._lock:
            if self._path is not None:
                self._append_file(record)
            self._records.append(record)
            return len(self._records) - 1

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    def all_records(self) -> tuple[EventRecord, ...]:
        """Snapshot of every record in ingestion order."""
        with self._lock:
            return tuple(self._records)

    def _sorted_snapshot(self) -> list[tuple[EventRecord, int]]:
        with self._lock:
            indexed = list(zip(self._records, range(len(self._records))))
        indexed.sort(key=lambda pair: (pair[0].timestamp, pair[1]))
        return indexed

    def window(self, start: Millis, end: Millis) -> LogWindow:
        """All records with timestamp in [start, end], sorted ascending."""
        if start > end:
            raise RangeError(f"window start {start} is after end {end}")
        selected = [
            record
            for record, _ in self._sorted_snapshot()
            if start <= record.timestamp <= end
        ]
        return LogWindow(tuple(selected), start, end, source=self)

    def state_record_at(
        self, entity: str, name: str, t: Millis, *, before: bool = False
    ) -> EventRecord | None:
        """Latest property change for (entity, name) at or before ``t``.

        ``before=True`` makes the bound strict (timestamp < t).
        """
        best: EventRecord | None = None
        for record, _ in self._sorted_snapshot():
            if record.timestamp > t or (before and record.timestamp >= t):
                break
            if (
                record.kind is EventKind.PROPERTY_CHANGE
                and record.entity == entity
                and record.name == name
            ):
                best = record
        return best

    def state_at(self, entity: str, name: str, t: Millis) -> Scalar | Absent:
        """Last-write-wins value of a property at instant ``t``; ABSENT if never set."""
        record = self.state_record_at(entity, name, t)
        return ABSENT if record is None else record.value

    def latest_action(
        self,
        start: Millis,
        end: Millis,
        *,
        entity: str | None = None,
        action: str | None = None,
        exclude_user: str | None = None,
    ) -> EventRecord | None:
        """Most recent action execution in [start, end] matching the filters."""
        window = self.window(start, end)
        for record in reversed(window.records):
            if record.kind is not EventKind.ACTION_EXECUTED:
                continue
            if entity is not None and record.entity != entity:
                continue
            if action is not None and record.name != action:
                continue
            if (
                exclude_user is not None
                and record.caused_by.kind.value == "user"
                and record.caused_by.actor == exclude_user
            ):
                continue
            return record
        return None

    def trim(self, now: Millis) -> int:
        """Drop records older than the retention horizon; returns the count removed."""
        if self.retention_days is None:
            return 0
        horizon = now - self.retention_days * DAY_MS
        with self._lock:
            keep = [r for r in self._records if r.timestamp >= horizon]
            removed = len(self._records) - len(keep)
            self._records = keep
        if removed:
            logger.info("trimmed %d records older than %s", removed, horizon)
        return removed

    # -- newline-delimited JSON import/export ------------------------------

    def export_ndjson(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.all_records())

    def import_ndjson(self, text: str) -> int:
        count = 0
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"bad JSON line: {line[:80]!r}") from exc
            self.ingest(EventRecord.from_dict(payload))
            count += 1
        return count


# ---------------------------------------------------------------------------
# Rule table


@dataclass(frozen=True)
class RuleVersion:
    rule: Rule
    valid_from: Millis
    valid_to: Millis | None = None  # None = still active

    def active_at(self, t: Millis) -> bool:
        return self.valid_from <= t and (self.valid_to is None or t < self.valid_to)


class RuleTable:
    """Append-only rule store with validity intervals.

    Edits close the previous version and open a new one; deletes close
    the current version. Lookups therefore work both for "rules in force
    now" and "rules in force when this action fired".
    """

    def __init__(self) -> None:
        self._versions: list[RuleVersion] = []
        self._lock = threading.Lock()

    def put(self, rule: Rule, at: Millis = 0) -> None:
        """Insert or update a rule effective from ``at``.

        Raises ConflictError when another active rule duplicates the
        precondition tree and action set, or when the identical rule is
        submitted again.
        """
        with self._lock:
            current = {v.rule.id: v for v in self._versions if v.active_at(at)}
            for version in current.values():
                other = version.rule
                if other.id != rule.id and other.signature() == rule.signature():
                    raise ConflictError(
                        f"rule {rule.id!r} duplicates {other.id!r} "
                        "(identical preconditions and actions)"
                    )
                if other.id == rule.id and other == rule:
                    raise ConflictError(f"rule {rule.id!r} already exists unchanged")
            self._close(rule.id, at)
            self._versions.append(RuleVersion(rule, valid_from=at))

    def delete(self, rule_id: str, at: Millis) -> None:
        with self._lock:
            if not self._close(rule_id, at):
                raise UnknownRuleError(f"no active rule {rule_id!r}")

    def _close(self, rule_id: str, at: Millis) -> bool:
        closed = False
        for i, version in enumerate(self._versions):
            if version.rule.id == rule_id and version.active_at(at):
                self._versions[i] = RuleVersion(version.rule, version.valid_from, at)
                closed = True
        return closed

    def active_at(self, t: Millis) -> tuple[Rule, ...]:
        with self._lock:
            rules = [v.rule for v in self._versions if v.active_at(t)]
        return tuple(sorted(rules, key=lambda r: r.id))

    def current(self) -> tuple[Rule, ...]:
        with self._lock:
            rules = [v.rule for v in self._versions if v.valid_to is None]
        return tuple(sorted(rules, key=lambda r: r.id))

    def get_at(self, rule_id: str, t: Millis) -> Rule | None:
        """Rule version in force at ``t``; falls back to the newest version."""
        with self._lock:
            versions = [v for v in self._versions if v.rule.id == rule_id]
        for version in versions:
            if version.active_at(t):
                return version.rule
        return versions[-1].rule if versions else None

    def get(self, rule_id: str) -> Rule | None:
        with self._lock:
            versions = [v for v in self._versions if v.rule.id == rule_id]
        return versions[-1].rule if versions else None

    def __len__(self) -> int:
        with self._lock:
            return len({v.rule.id for v in self._versions if v.valid_to is None})


# ---------------------------------------------------------------------------
# Rule JSON codec (precondition trees as nested {op, children} objects)


def precondition_node_from_dict(data: Mapping[str, Any]) -> PreconditionNode:
    if "op" in data:
        try:
            op = GroupOperator(str(data["op"]).lower())
        except ValueError as exc:
            raise ValidationError(f"unknown group operator {data['op']!r}") from exc
        children = data.get("children")
        if not isinstance(children, list) or not children:
            raise ValidationError("precondition group needs a non-empty children list")
        return PreconditionGroup(op, tuple(precondition_node_from_dict(c) for c in children))
    missing = {"entity", "property", "comparator", "value"} - set(data)
    if missing:
        raise ValidationError(f"precondition missing fields: {sorted(missing)}")
    return Precondition(
        entity=str(data["entity"]),
        property=str(data["property"]),
        comparator=parse_comparator(str(data["comparator"])),
        value=validate_scalar(data["value"], "precondition value"),
    )


def precondition_node_to_dict(node: PreconditionNode) -> dict[str, Any]:
    if isinstance(node, PreconditionGroup):
        return {
            "op": node.operator.value,
            "children": [precondition_node_to_dict(c) for c in node.children],
        }
    return {
        "entity": node.entity,
        "property": node.property,
        "comparator": node.comparator.value,
        "value": node.value,
    }


def rule_from_dict(data: Mapping[str, Any]) -> Rule:
    missing = {"id", "name", "description", "owner", "preconditions", "actions"} - set(data)
    if missing:
        raise ValidationError(f"rule missing fields: {sorted(missing)}")
    preconditions = precondition_node_from_dict(data["preconditions"])
    if isinstance(preconditions, Precondition):
        preconditions = PreconditionGroup(GroupOperator.AND, (preconditions,))
    actions = []
    for entry in data["actions"]:
        if "entity" not in entry or "action" not in entry:
            raise ValidationError(f"rule action missing entity/action: {entry!r}")
        actions.append(
            RuleAction(
                entity=str(entry["entity"]),
                action=str(entry["action"]),
                value=entry.get("value"),
            )
        )
    return Rule(
        id=str(data["id"]),
        name=str(data["name"]),
        description=str(data["description"]),
        owner=str(data["owner"]),
        preconditions=preconditions,
        actions=tuple(actions),
    )


def rule_to_dict(rule: Rule) -> dict[str, Any]:
    return {
        "id": rule.id,
        "name": rule.name,
        "description": rule.description,
        "owner": rule.owner,
        "preconditions": precondition_node_to_dict(rule.preconditions),
        "actions": [
            {"entity": a.entity, "action": a.action, "value": a.value} for a in rule.actions
        ],
    }


def rules_from_json(document: str | Mapping[str, Any] | Iterable[Mapping[str, Any]]) -> list[Rule]:
    """Parse a rule table document: a list of rules or {"rules": [...]}."""
    if isinstance(document, str):
        document = json.loads(document)
    if isinstance(document, Mapping):
        document = document.get("rules", [])
    return [rule_from_dict(entry) for entry in document]
