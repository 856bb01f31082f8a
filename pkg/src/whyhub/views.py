"""Context-to-view inference.

Policies map one context attribute to the set of views suitable for each
of its values. Inference starts from all four views and applies policies
in priority order: when a policy's suitable set intersects the running
set, the running set becomes that intersection; an empty intersection
skips the policy, which guarantees the running set never empties. The
most expressive survivor wins.

Two presets ship with the package. ``privacy_first`` evaluates the role
policy first so guest visitors always land on the simplified view; it is
the default. ``state_first`` evaluates user state, occurrence,
technicality, then role. Both encode the same per-attribute suitability
matrix and differ only in priority order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import PolicyConfigError
from .model import (
    ATTRIBUTE_VALUES,
    ContextAttribute,
    ContextSnapshot,
    ViewKind,
    most_expressive,
)

PRESET_PRIVACY_FIRST = "privacy_first"
PRESET_STATE_FIRST = "state_first"
DEFAULT_PRESET = PRESET_PRIVACY_FIRST


@dataclass(frozen=True)
class ContextViewPolicy:
    """Suitable views per value of one context attribute."""

    attribute: ContextAttribute
    priority: int
    mapping: tuple[tuple[str, frozenset[ViewKind]], ...]

    def suitable_views(self, snapshot: ContextSnapshot) -> frozenset[ViewKind]:
        value = snapshot.attribute(self.attribute).value
        for key, views in self.mapping:
            if key == value:
                return views
        raise PolicyConfigError(
            f"policy for {self.attribute.value!r} has no mapping for {value!r}"
        )

    def mapping_dict(self) -> dict[str, frozenset[ViewKind]]:
        return dict(self.mapping)


def make_policy(
    attribute: ContextAttribute,
    priority: int,
    mapping: Mapping[str, Iterable[ViewKind]],
) -> ContextViewPolicy:
    """Build and validate one policy: full value coverage, non-empty sets."""
    if priority < 1:
        raise PolicyConfigError(f"priority must be >= 1, got {priority}")
    value_enum = ATTRIBUTE_VALUES[attribute]
    expected = {member.value for member in value_enum}
    got = set(mapping)
    if got != expected:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        detail = []
        if missing:
            detail.append(f"missing values {missing}")
        if extra:
            detail.append(f"unknown values {extra}")
        raise PolicyConfigError(f"policy for {attribute.value!r}: " + "; ".join(detail))
    rows: list[tuple[str, frozenset[ViewKind]]] = []
    for member in value_enum:
        views = frozenset(ViewKind(v) for v in mapping[member.value])
        if not views:
            raise PolicyConfigError(
                f"policy for {attribute.value!r}: value {member.value!r} maps to no views"
            )
        rows.append((member.value, views))
    return ContextViewPolicy(attribute, priority, tuple(rows))


def apply_policies(
    snapshot: ContextSnapshot, policies: Iterable[ContextViewPolicy]
) -> frozenset[ViewKind]:
    """Run the intersection loop and return the final running set."""
    running = frozenset(ViewKind)
    for policy in sorted(policies, key=lambda p: p.priority):
        suitable = policy.suitable_views(snapshot)
        narrowed = running & suitable
        if narrowed:
            running = narrowed
    return running


def infer_view(
    snapshot: ContextSnapshot, policies: Iterable[ContextViewPolicy]
) -> ViewKind:
    """Most suitable view for a snapshot under the given policies."""
    return most_expressive(apply_policies(snapshot, policies))


# ---------------------------------------------------------------------------
# Policy documents


def load_policies(
    source: str | Path | Mapping[str, Any],
) -> tuple[ContextViewPolicy, ...]:
    """Load and validate a policy document.

    The document is JSON of the form
    ``{"policies": [{"attribute", "priority", "mapping": {value: [views]}}]}``
    and must cover all four context attributes with distinct priorities.
    """
    if isinstance(source, (str, Path)):
        try:
            data = json.loads(Path(source).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise PolicyConfigError(f"cannot load policy document {source}: {exc}") from exc
    else:
        data = source
    entries = data.get("policies") if isinstance(data, Mapping) else data
    if not isinstance(entries, list) or not entries:
        raise PolicyConfigError("policy document must contain a non-empty 'policies' list")

    policies: list[ContextViewPolicy] = []
    for entry in entries:
        try:
            attribute = ContextAttribute(entry["attribute"])
        except (KeyError, ValueError):
            raise PolicyConfigError(f"bad policy attribute in {entry!r}") from None
        priority = entry.get("priority")
        if not isinstance(priority, int):
            raise PolicyConfigError(f"policy for {attribute.value!r} needs an integer priority")
        mapping = entry.get("mapping")
        if not isinstance(mapping, Mapping):
            raise PolicyConfigError(f"policy for {attribute.value!r} needs a mapping object")
        try:
            policies.append(make_policy(attribute, priority, mapping))
        except ValueError as exc:
            raise PolicyConfigError(f"policy for {attribute.value!r}: {exc}") from exc

    attributes = [p.attribute for p in policies]
    if len(set(attributes)) != len(ContextAttribute):
        missing = sorted(a.value for a in set(ContextAttribute) - set(attributes))
        raise PolicyConfigError(f"policy document must cover all attributes; missing {missing}")
    priorities = [p.priority for p in policies]
    if len(set(priorities)) != len(priorities):
        raise PolicyConfigError(f"duplicate policy priorities: {sorted(priorities)}")
    return tuple(sorted(policies, key=lambda p: p.priority))


def dump_policies(policies: Iterable[ContextViewPolicy]) -> dict[str, Any]:
    return {
        "policies": [
            {
                "attribute": p.attribute.value,
                "priority": p.priority,
                "mapping": {
                    value: sorted(v.value for v in views) for value, views in p.mapping
                },
            }
            for p in sorted(policies, key=lambda p: p.priority)
        ]
    }


def load_preset(name: str = DEFAULT_PRESET) -> tuple[ContextViewPolicy, ...]:
    """Load one of the policy presets shipped with the package."""
    try:
        text = (
            resources.files("whyhub").joinpath("data", "policies", f"{name}.json").read_text("utf-8")
        )
    except (FileNotFoundError, ModuleNotFoundError) as exc:
        raise PolicyConfigError(f"unknown policy preset {name!r}") from exc
    return load_policies(json.loads(text))
