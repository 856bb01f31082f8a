"""Exception hierarchy shared across the package.

Every error carries a stable machine-readable ``code`` so the HTTP layer
can emit ``{code, message}`` bodies without per-endpoint mapping tables.
"""

from __future__ import annotations


class WhyhubError(Exception):
    """Base class for all domain errors."""

    code = "error"


class ValidationError(WhyhubError):
    code = "validation_error"


class StorageError(WhyhubError):
    code = "storage_error"


class RangeError(WhyhubError):
    """Query range is inverted (from > to)."""

    code = "range_error"


class UnknownRuleError(WhyhubError):
    code = "unknown_rule"


class UnknownUserError(WhyhubError):
    code = "unknown_user"


class ActionNotFoundError(WhyhubError):
    """The explanandum has no execution record inside the lookback window."""

    code = "action_not_found"


class AmbiguousCauseError(WhyhubError):
    """More than one rule satisfies every cause-path condition.

    Should be impossible in a conflict-free rule set; surfaced as a
    diagnostic with the full candidate list instead of silently picking one.
    """

    code = "ambiguous_cause"

    def __init__(self, candidates: list[str]) -> None:
        self.candidates = sorted(candidates)
        super().__init__(
            "multiple rules explain the action: " + ", ".join(self.candidates)
        )


class ProviderUnavailableError(WhyhubError):
    code = "provider_unavailable"


class PolicyConfigError(WhyhubError):
    code = "policy_config_error"


class TemplateSlotError(WhyhubError):
    code = "template_slot_error"


class ConflictError(WhyhubError):
    code = "conflict"


class NothingToExplainError(WhyhubError):
    code = "nothing_to_explain"


class ScenarioValidationError(WhyhubError):
    code = "scenario_validation_error"
