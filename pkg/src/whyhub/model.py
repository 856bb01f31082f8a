"""Domain model for rule-based smart environment explanations.

Everything here is an immutable value object; collections are tuples or
frozensets so instances hash and can be shared freely across threads.
The two pure operations at the bottom build the full explanation
construct set for a resolved cause path and project it down to one of
the four named views.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Any, Iterable, Mapping, Union

from .errors import UnknownRuleError, ValidationError
from .timeutil import Millis, format_instant, parse_instant

if TYPE_CHECKING:
    from .causal import CausePath

Scalar = Union[bool, int, float, str]

_SCALAR_TYPES = (bool, int, float, str)


def validate_scalar(value: Any, what: str = "value") -> Scalar:
    if not isinstance(value, _SCALAR_TYPES):
        raise ValidationError(f"{what} must be a boolean, number, or string, got {value!r}")
    return value


def canonical_scalar(value: Scalar) -> str:
    """Stable textual form used in phrase keys and rendered fallbacks."""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


# ---------------------------------------------------------------------------
# Devices, preconditions, rules


@dataclass(frozen=True)
class SmartObject:
    """A device or space with named properties (state) and actions (operations)."""

    id: str
    name: str
    properties: frozenset[str] = frozenset()
    actions: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "properties", frozenset(self.properties))
        object.__setattr__(self, "actions", frozenset(self.actions))
        if not self.id:
            raise ValidationError("smart object id must be non-empty")


class Comparator(str, Enum):
    EQ = "="
    NE = "!="
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="


_ORDERING = frozenset({Comparator.LT, Comparator.LE, Comparator.GT, Comparator.GE})

# Unicode spellings accepted on input, canonicalized to the ASCII enum.
_COMPARATOR_ALIASES = {"≠": "!=", "≤": "<=", "≥": ">=", "==": "="}


def parse_comparator(text: str) -> Comparator:
    text = _COMPARATOR_ALIASES.get(text, text)
    try:
        return Comparator(text)
    except ValueError as exc:
        raise ValidationError(f"unknown comparator {text!r}") from exc


def _is_plain_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass(frozen=True)
class Precondition:
    """Leaf condition on a single device property."""

    entity: str
    property: str
    comparator: Comparator
    value: Scalar

    def __post_init__(self) -> None:
        validate_scalar(self.value, "precondition value")
        if self.comparator in _ORDERING and not _is_plain_number(self.value):
            raise ValidationError(
                f"comparator {self.comparator.value!r} requires a numeric value, got {self.value!r}"
            )

    def key(self) -> str:
        """Canonical lookup key, e.g. ``room1.meeting=true``."""
        return f"{self.entity}.{self.property}{self.comparator.value}{canonical_scalar(self.value)}"


class GroupOperator(str, Enum):
    AND = "and"
    OR = "or"


@dataclass(frozen=True)
class PreconditionGroup:
    """AND/OR node over preconditions and nested groups; always non-empty."""

    operator: GroupOperator
    children: tuple[PreconditionNode, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ValidationError("precondition group must have at least one child")
        for child in self.children:
            if not isinstance(child, (Precondition, PreconditionGroup)):
                raise ValidationError(f"bad precondition node: {child!r}")

    def leaves(self) -> tuple[Precondition, ...]:
        """Leaf preconditions in declaration order (depth-first)."""
        out: list[Precondition] = []
        for child in self.children:
            if isinstance(child, Precondition):
                out.append(child)
            else:
                out.extend(child.leaves())
        return tuple(out)


PreconditionNode = Union[Precondition, PreconditionGroup]


@dataclass(frozen=True)
class RuleAction:
    """One action a rule triggers, with an optional scalar argument."""

    entity: str
    action: str
    value: Scalar | None = None

    def __post_init__(self) -> None:
        if self.value is not None:
            validate_scalar(self.value, "action value")


@dataclass(frozen=True)
class Rule:
    id: str
    name: str
    description: str
    owner: str
    preconditions: PreconditionGroup
    actions: tuple[RuleAction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(self.actions))
        if not self.id:
            raise ValidationError("rule id must be non-empty")
        if not self.actions:
            raise ValidationError(f"rule {self.id!r} must have at least one action")

    def triggers(self, entity: str, action: str) -> bool:
        return any(a.entity == entity and a.action == action for a in self.actions)

    def signature(self) -> tuple:
        """Identity used by the duplicate-rule check: tree plus action set."""
        return (self.preconditions, frozenset(self.actions))


# ---------------------------------------------------------------------------
# Events


class EventKind(str, Enum):
    PROPERTY_CHANGE = "property_change"
    ACTION_EXECUTED = "action_executed"
    RULE_FIRED = "rule_fired"


class CauseKind(str, Enum):
    NONE = "none"
    RULE = "rule"
    API = "api"
    REMOTE = "remote"
    USER = "user"


@dataclass(frozen=True)
class Cause:
    """Origin tag on an event: nothing, a rule, an API call, a remote, or a user."""

    kind: CauseKind
    actor: str | None = None

    def __post_init__(self) -> None:
        needs_actor = self.kind in (CauseKind.RULE, CauseKind.USER)
        if needs_actor and not self.actor:
            raise ValidationError(f"cause {self.kind.value!r} requires an actor id")
        if not needs_actor and self.actor is not None:
            raise ValidationError(f"cause {self.kind.value!r} does not take an actor")

    @staticmethod
    def none() -> Cause:
        return Cause(CauseKind.NONE)

    @staticmethod
    def api() -> Cause:
        return Cause(CauseKind.API)

    @staticmethod
    def remote() -> Cause:
        return Cause(CauseKind.REMOTE)

    @staticmethod
    def rule(rule_id: str) -> Cause:
        return Cause(CauseKind.RULE, rule_id)

    @staticmethod
    def user(user_id: str) -> Cause:
        return Cause(CauseKind.USER, user_id)

    def encode(self) -> str:
        if self.actor is not None:
            return f"{self.kind.value}:{self.actor}"
        return self.kind.value

    @staticmethod
    def decode(text: str) -> Cause:
        if not isinstance(text, str):
            raise ValidationError(f"bad cause tag: {text!r}")
        kind_text, _, actor = text.partition(":")
        try:
            kind = CauseKind(kind_text)
        except ValueError as exc:
            raise ValidationError(f"unknown cause kind {kind_text!r}") from exc
        return Cause(kind, actor or None)


@dataclass(frozen=True)
class EventRecord:
    """One log entry: a property change, an action execution, or a rule firing."""

    timestamp: Millis
    entity: str
    kind: EventKind
    name: str
    value: Scalar
    caused_by: Cause = field(default_factory=Cause.none)

    def __post_init__(self) -> None:
        if not isinstance(self.timestamp, int) or isinstance(self.timestamp, bool):
            raise ValidationError(f"timestamp must be integer milliseconds, got {self.timestamp!r}")
        if not self.entity:
            raise ValidationError("event entity must be non-empty")
        if not self.name:
            raise ValidationError("event name must be non-empty")
        validate_scalar(self.value, "event value")

    def to_dict(self) -> dict[str, Any]:
        return {
            "ts": format_instant(self.timestamp),
            "entity": self.entity,
            "kind": self.kind.value,
            "name": self.name,
            "value": self.value,
            "caused_by": self.caused_by.encode(),
        }

    @staticmethod
    def from_dict(data: Mapping[str, Any]) -> EventRecord:
        try:
            kind = EventKind(data["kind"])
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"bad event kind in {data!r}") from exc
        missing = {"ts", "entity", "name", "value"} - set(data)
        if missing:
            raise ValidationError(f"event record missing fields: {sorted(missing)}")
        return EventRecord(
            timestamp=parse_instant(data["ts"]),
            entity=str(data["entity"]),
            kind=kind,
            name=str(data["name"]),
            value=validate_scalar(data["value"], "event value"),
            caused_by=Cause.decode(data.get("caused_by", "none")),
        )


@dataclass(frozen=True)
class Explanandum:
    """The device action a user asked to have explained."""

    entity: str
    action: str
    requested_at: Millis
    explainee: str


# ---------------------------------------------------------------------------
# Context


class UserState(str, Enum):
    MEETING = "meeting"
    BREAK = "break"
    WORKING = "working"


class Occurrence(str, Enum):
    FIRST_TIME = "first_time"
    SECOND_TIME = "second_time"
    MORE = "more"


class Technicality(str, Enum):
    TECHNICAL = "technical"
    MEDIUM = "medium"
    NON_TECHNICAL = "non_technical"


class Role(str, Enum):
    OWNER = "owner"
    COWORKER = "coworker"
    GUEST = "guest"


class ContextAttribute(str, Enum):
    ROLE = "role"
    USER_STATE = "user_state"
    OCCURRENCE = "occurrence"
    TECHNICALITY = "technicality"


ATTRIBUTE_VALUES: dict[ContextAttribute, type[Enum]] = {
    ContextAttribute.ROLE: Role,
    ContextAttribute.USER_STATE: UserState,
    ContextAttribute.OCCURRENCE: Occurrence,
    ContextAttribute.TECHNICALITY: Technicality,
}


@dataclass(frozen=True)
class ContextSnapshot:
    """All context attributes for one user at explanation time.

    ``degraded`` marks snapshots where the live state provider was
    unreachable and the documented fallback state was substituted.
    """

    user_name: str
    user_state: UserState
    occurrence: Occurrence
    technicality: Technicality
    role: Role
    degraded: bool = False

    def attribute(self, attr: ContextAttribute) -> Enum:
        return {
            ContextAttribute.ROLE: self.role,
            ContextAttribute.USER_STATE: self.user_state,
            ContextAttribute.OCCURRENCE: self.occurrence,
            ContextAttribute.TECHNICALITY: self.technicality,
        }[attr]

    def with_overrides(self, overrides: Mapping[str, str]) -> ContextSnapshot:
        """Return a copy with the given attribute values replaced."""
        parsers: dict[str, Any] = {
            "user_name": str,
            "user_state": UserState,
            "occurrence": Occurrence,
            "technicality": Technicality,
            "role": Role,
        }
        changes: dict[str, Any] = {}
        for key, raw in overrides.items():
            if key not in parsers:
                raise ValidationError(f"unknown context attribute {key!r}")
            try:
                changes[key] = parsers[key](raw)
            except ValueError as exc:
                raise ValidationError(f"bad value {raw!r} for {key}") from exc
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "user_name": self.user_name,
            "user_state": self.user_state.value,
            "occurrence": self.occurrence.value,
            "technicality": self.technicality.value,
            "role": self.role.value,
            "degraded": self.degraded,
        }


# ---------------------------------------------------------------------------
# Views and explanation constructs


class ViewKind(str, Enum):
    FULL = "full"
    FACT = "fact"
    RULE = "rule"
    SIMPLIFIED = "simplified"

    @property
    def expressiveness(self) -> int:
        return _EXPRESSIVENESS[self]


# Fixed global order; the inference step returns the most expressive survivor.
_EXPRESSIVENESS = {
    ViewKind.FULL: 4,
    ViewKind.FACT: 3,
    ViewKind.RULE: 2,
    ViewKind.SIMPLIFIED: 1,
}

ALL_VIEWS = frozenset(ViewKind)


def most_expressive(views: Iterable[ViewKind]) -> ViewKind:
    candidates = list(views)
    if not candidates:
        raise ValidationError("no views to choose from")
    return max(candidates, key=lambda v: v.expressiveness)


class ConstructCategory(str, Enum):
    ALGORITHMIC = "algorithmic"
    CONTEXTUAL = "contextual"


class ConstructKind(str, Enum):
    RULE_FIRED = "rule_fired"
    PRECONDITION_FACT = "precondition_fact"
    ACTION_FACT = "action_fact"
    RULE_DESCRIPTION = "rule_description"
    RULE_OWNER = "rule_owner"


CATEGORY_FOR_KIND = {
    ConstructKind.RULE_FIRED: ConstructCategory.ALGORITHMIC,
    ConstructKind.PRECONDITION_FACT: ConstructCategory.ALGORITHMIC,
    ConstructKind.ACTION_FACT: ConstructCategory.ALGORITHMIC,
    ConstructKind.RULE_DESCRIPTION: ConstructCategory.CONTEXTUAL,
    ConstructKind.RULE_OWNER: ConstructCategory.CONTEXTUAL,
}


@dataclass(frozen=True)
class ExplanationConstruct:
    """One fact inside an explanation.

    Algorithmic constructs carry the causal mechanism (the firing, the
    precondition facts, the co-executed actions); contextual constructs
    carry meta-information (the rule's description and its owner).
    ``position`` preserves declaration order for facts so rendering is
    deterministic even though the construct set itself is unordered.
    """

    kind: ConstructKind
    rule: Rule | None = None
    precondition: Precondition | None = None
    action: RuleAction | None = None
    event: EventRecord | None = None
    owner: str | None = None
    position: int = 0

    @property
    def category(self) -> ConstructCategory:
        return CATEGORY_FOR_KIND[self.kind]

    @staticmethod
    def rule_fired(rule: Rule, event: EventRecord) -> ExplanationConstruct:
        return ExplanationConstruct(ConstructKind.RULE_FIRED, rule=rule, event=event)

    @staticmethod
    def precondition_fact(
        precondition: Precondition, event: EventRecord, position: int
    ) -> ExplanationConstruct:
        return ExplanationConstruct(
            ConstructKind.PRECONDITION_FACT,
            precondition=precondition,
            event=event,
            position=position,
        )

    @staticmethod
    def action_fact(action: RuleAction, event: EventRecord, position: int) -> ExplanationConstruct:
        return ExplanationConstruct(
            ConstructKind.ACTION_FACT, action=action, event=event, position=position
        )

    @staticmethod
    def rule_description(rule: Rule) -> ExplanationConstruct:
        return ExplanationConstruct(ConstructKind.RULE_DESCRIPTION, rule=rule)

    @staticmethod
    def rule_owner(owner: str, rule: Rule) -> ExplanationConstruct:
        return ExplanationConstruct(ConstructKind.RULE_OWNER, rule=rule, owner=owner)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"category": self.category.value, "kind": self.kind.value}
        if self.rule is not None:
            out["rule"] = self.rule.id
        if self.precondition is not None:
            out["precondition"] = self.precondition.key()
        if self.action is not None:
            out["action"] = f"{self.action.entity}.{self.action.action}"
        if self.event is not None:
            out["event"] = self.event.to_dict()
        if self.owner is not None:
            out["owner"] = self.owner
        if self.kind in (ConstructKind.PRECONDITION_FACT, ConstructKind.ACTION_FACT):
            out["position"] = self.position
        return out


@dataclass(frozen=True)
class Explanation:
    """A fully resolved explanation: construct set, chosen view, rendered text."""

    explanandum: Explanandum
    constructs: frozenset[ExplanationConstruct]
    view: ViewKind
    text: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "constructs", frozenset(self.constructs))
        if not self.constructs:
            raise ValidationError("explanation must carry at least one construct")


# ---------------------------------------------------------------------------
# Construct assembly and view projection


def assemble_constructs(path: CausePath, rules: Any) -> frozenset[ExplanationConstruct]:
    """Build the complete construct set for a resolved cause path.

    Produces one firing anchor, one precondition fact per satisfying
    event, one action fact per co-executed action, plus the rule's
    description and owner. ``rules`` is a rule table (or plain mapping)
    used to resolve the fired rule id.
    """
    get_at = getattr(rules, "get_at", None)
    if get_at is not None:
        rule = get_at(path.fired_rule, path.fired_at)
    else:
        rule = rules.get(path.fired_rule)
    if rule is None:
        raise UnknownRuleError(f"rule {path.fired_rule!r} is not in the rule table")

    constructs: set[ExplanationConstruct] = {
        ExplanationConstruct.rule_fired(rule, path.explanandum_event),
        ExplanationConstruct.rule_description(rule),
        ExplanationConstruct.rule_owner(rule.owner, rule),
    }
    for i, (precondition, event) in enumerate(path.satisfying_events):
        constructs.add(ExplanationConstruct.precondition_fact(precondition, event, i))
    for i, (action, event) in enumerate(path.sibling_actions):
        constructs.add(ExplanationConstruct.action_fact(action, event, i))
    return frozenset(constructs)


_VIEW_KINDS = {
    ViewKind.FULL: None,  # everything
    ViewKind.RULE: frozenset({ConstructKind.RULE_FIRED, ConstructKind.RULE_DESCRIPTION}),
    ViewKind.FACT: frozenset({ConstructKind.RULE_FIRED, ConstructKind.PRECONDITION_FACT}),
    ViewKind.SIMPLIFIED: frozenset({ConstructKind.RULE_FIRED, ConstructKind.RULE_OWNER}),
}


def project_view(
    constructs: frozenset[ExplanationConstruct], view: ViewKind
) -> frozenset[ExplanationConstruct]:
    """Select the subset of constructs a view exposes.

    The full view is the whole set; every partial view keeps the firing
    anchor plus its own slice. The simplified view keeps the firing but
    masks rule identity at render time.
    """
    keep = _VIEW_KINDS[view]
    if keep is None:
        return frozenset(constructs)
    return frozenset(c for c in constructs if c.kind in keep)
