"""whyhub: causal "why did this happen?" explanations for rule-based
smart environments, personalized by user context."""

from .causal import CausePath, eval_preconditions, find_cause_path, leaf_satisfied
from .context import (
    ContextManager,
    ExplanationHistory,
    ScheduleEntry,
    ScheduleStateProvider,
    UserDirectory,
    UserProfile,
    classify_occurrence,
)
from .engine import EngineConfig, ExplanationEngine, ExplanationOutcome
from .errors import (
    ActionNotFoundError,
    AmbiguousCauseError,
    ConflictError,
    NothingToExplainError,
    PolicyConfigError,
    ProviderUnavailableError,
    RangeError,
    ScenarioValidationError,
    StorageError,
    TemplateSlotError,
    UnknownRuleError,
    UnknownUserError,
    ValidationError,
    WhyhubError,
)
from .eventlog import ABSENT, EventLog, LogWindow, RuleTable, rules_from_json
from .firing import RuleFiring, simulate_rules
from .model import (
    Cause,
    Comparator,
    ContextSnapshot,
    EventKind,
    EventRecord,
    Explanandum,
    Explanation,
    ExplanationConstruct,
    GroupOperator,
    Occurrence,
    Precondition,
    PreconditionGroup,
    Role,
    Rule,
    RuleAction,
    SmartObject,
    Technicality,
    UserState,
    ViewKind,
    assemble_constructs,
    project_view,
)
from .presentation import Renderer
from .simulator import Scenario, build_engine, builtin_scenario, load_scenario, run_scenario
from .views import (
    ContextViewPolicy,
    apply_policies,
    dump_policies,
    infer_view,
    load_policies,
    load_preset,
)

__version__ = "0.1.0"
