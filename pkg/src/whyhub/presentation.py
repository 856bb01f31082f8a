"""Natural-language rendering of projected views.

Each view has one English template with named slots: {user}, {action},
{rule_name}, {rule_description}, {owner}, and {facts}. Slot values come
from the projected construct set; precondition facts are phrased via a
per-precondition phrase map (falling back to a mechanical
"entity property is value" form) and joined in declaration order.

The simplified view's template may not reference the rule's name or
description, which is what keeps the rule masked for guests.
"""

from __future__ import annotations

import json
import string
from importlib import resources
from pathlib import Path
from typing import Mapping

from .errors import TemplateSlotError, ValidationError
from .model import (
    ConstructKind,
    ContextSnapshot,
    Explanandum,
    ExplanationConstruct,
    Precondition,
    ViewKind,
    canonical_scalar,
)

KNOWN_SLOTS = frozenset({"user", "action", "rule_name", "rule_description", "owner", "facts"})

NO_CAUSE_KEY = "no_cause"

_FORMATTER = string.Formatter()


def template_slots(template: str) -> frozenset[str]:
    return frozenset(
        field for _, field, _, _ in _FORMATTER.parse(template) if field is not None
    )


def validate_templates(templates: Mapping[str, str]) -> dict[str, str]:
    required = {v.value for v in ViewKind} | {NO_CAUSE_KEY}
    missing = required - set(templates)
    if missing:
        raise ValidationError(f"template file missing entries: {sorted(missing)}")
    for key in required:
        slots = template_slots(templates[key])
        unknown = slots - KNOWN_SLOTS
        if unknown:
            raise ValidationError(f"template {key!r} uses unknown slots {sorted(unknown)}")
    for key in (ViewKind.FULL.value, ViewKind.FACT.value):
        if "facts" not in template_slots(templates[key]):
            raise ValidationError(f"template {key!r} must reference {{facts}}")
    masked = template_slots(templates[ViewKind.SIMPLIFIED.value])
    if masked & {"rule_name", "rule_description"}:
        raise ValidationError("the simplified template must not reveal the rule")
    return dict(templates)


def load_templates(source: str | Path | Mapping[str, str]) -> dict[str, str]:
    if isinstance(source, (str, Path)):
        try:
            data = json.loads(Path(source).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot load templates {source}: {exc}") from exc
    else:
        data = source
    if not isinstance(data, Mapping):
        raise ValidationError("template document must be a JSON object")
    return validate_templates(data)


def default_templates() -> dict[str, str]:
    text = resources.files("whyhub").joinpath("data", "templates.json").read_text("utf-8")
    return validate_templates(json.loads(text))


def join_phrases(items: list[str]) -> str:
    if not items:
        return ""
    if len(items) == 1:
        return items[0]
    return ", ".join(items[:-1]) + " and " + items[-1]


class Renderer:
    """Fills view templates from construct sets.

    ``phrases`` maps canonical precondition keys (see
    :meth:`Precondition.key`) to human phrasings; ``user_names`` and
    ``entity_names`` resolve ids to display names. With
    ``use_display_names`` the explained action renders with underscores
    replaced by spaces instead of as a raw identifier.
    """

    def __init__(
        self,
        templates: Mapping[str, str] | None = None,
        *,
        phrases: Mapping[str, str] | None = None,
        user_names: Mapping[str, str] | None = None,
        entity_names: Mapping[str, str] | None = None,
        use_display_names: bool = False,
    ) -> None:
        self.templates = validate_templates(templates) if templates else default_templates()
        self.phrases = dict(phrases or {})
        self.user_names = dict(user_names or {})
        self.entity_names = dict(entity_names or {})
        self.use_display_names = use_display_names

    # -- phrasing ----------------------------------------------------------

    def phrase_for(self, precondition: Precondition) -> str:
        phrase = self.phrases.get(precondition.key())
        if phrase:
            return phrase
        entity = self.entity_names.get(precondition.entity, precondition.entity)
        value = canonical_scalar(precondition.value)
        op = precondition.comparator.value
        if op == "=":
            return f"{entity} {precondition.property} is {value}"
        if op == "!=":
            return f"{entity} {precondition.property} is not {value}"
        return f"{entity} {precondition.property} is {op} {value}"

    def _action_label(self, action_name: str) -> str:
        if self.use_display_names:
            return action_name.replace("_", " ")
        return action_name

    def _greeting_name(self, user_name: str | None) -> str:
        return user_name if user_name else "there"

    # -- rendering ---------------------------------------------------------

    def render(
        self,
        constructs: frozenset[ExplanationConstruct],
        view: ViewKind,
        snapshot: ContextSnapshot,
    ) -> str:
        template = self.templates[view.value]
        needed = template_slots(template)
        values = self._slot_values(constructs, snapshot)
        missing = [slot for slot in sorted(needed) if values.get(slot) is None]
        if missing:
            raise TemplateSlotError(
                f"view {view.value!r} has no backing construct for slots {missing}"
            )
        return template.format(**{k: v for k, v in values.items() if v is not None})

    def _slot_values(
        self,
        constructs: frozenset[ExplanationConstruct],
        snapshot: ContextSnapshot,
    ) -> dict[str, str | None]:
        anchor = next((c for c in constructs if c.kind is ConstructKind.RULE_FIRED), None)
        description = next(
            (c for c in constructs if c.kind is ConstructKind.RULE_DESCRIPTION), None
        )
        owner = next((c for c in constructs if c.kind is ConstructKind.RULE_OWNER), None)
        facts = sorted(
            (c for c in constructs if c.kind is ConstructKind.PRECONDITION_FACT),
            key=lambda c: c.position,
        )
        values: dict[str, str | None] = {
            "user": self._greeting_name(snapshot.user_name),
            "action": None,
            "rule_name": None,
            "rule_description": None,
            "owner": None,
            "facts": None,
        }
        if anchor is not None and anchor.event is not None:
            values["action"] = self._action_label(anchor.event.name)
        if description is not None and description.rule is not None:
            values["rule_name"] = description.rule.name
            values["rule_description"] = description.rule.description
        if owner is not None and owner.owner is not None:
            values["owner"] = self.user_names.get(owner.owner, owner.owner)
        if facts:
            values["facts"] = join_phrases(
                [self.phrase_for(c.precondition) for c in facts if c.precondition is not None]
            )
        return values

    def render_no_cause(self, explanandum: Explanandum, snapshot: ContextSnapshot | None) -> str:
        """Fixed wording for actions no rule accounts for."""
        template = self.templates[NO_CAUSE_KEY]
        user = self._greeting_name(snapshot.user_name if snapshot else None)
        return template.format(user=user, action=self._action_label(explanandum.action))
