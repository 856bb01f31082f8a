"""Context assembly for the explainee.

A snapshot joins three sources: static profile attributes, the dynamic
user state from a pluggable provider, and the occurrence count derived
from the explanation delivery history. Occurrence counts deliveries of
the same (user, entity, action) inside a half-open 90-day window ending
at the query instant: an entry exactly 90 days old no longer counts, an
entry at the query instant already does.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol

from .errors import (
    ProviderUnavailableError,
    StorageError,
    UnknownUserError,
    ValidationError,
)
from .model import ContextSnapshot, Occurrence, Role, Technicality, UserState
from .timeutil import DAY_MS, Millis, format_instant, parse_instant

logger = logging.getLogger(__name__)

OCCURRENCE_WINDOW_DAYS = 90

ExplanandumKey = tuple[str, str]  # (entity id, action name)


@dataclass(frozen=True)
class UserProfile:
    id: str
    name: str
    technicality: Technicality
    role: Role

    @staticmethod
    def from_dict(data: Mapping[str, Any]) -> UserProfile:
        missing = {"id", "name", "technicality", "role"} - set(data)
        if missing:
            raise ValidationError(f"user profile missing fields: {sorted(missing)}")
        try:
            return UserProfile(
                id=str(data["id"]),
                name=str(data["name"]),
                technicality=Technicality(data["technicality"]),
                role=Role(data["role"]),
            )
        except ValueError as exc:
            raise ValidationError(f"bad user profile {data!r}: {exc}") from exc

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "technicality": self.technicality.value,
            "role": self.role.value,
        }


class UserDirectory:
    """In-memory profile store keyed by user id."""

    def __init__(self, profiles: Iterable[UserProfile] = ()) -> None:
        self._profiles: dict[str, UserProfile] = {}
        for profile in profiles:
            self.put(profile)

    def put(self, profile: UserProfile) -> None:
        self._profiles[profile.id] = profile

    def get(self, user_id: str) -> UserProfile:
        try:
            return self._profiles[user_id]
        except KeyError:
            raise UnknownUserError(f"unknown user {user_id!r}") from None

    def maybe(self, user_id: str) -> UserProfile | None:
        return self._profiles.get(user_id)

    def all(self) -> tuple[UserProfile, ...]:
        return tuple(sorted(self._profiles.values(), key=lambda p: p.id))

    def names(self) -> dict[str, str]:
        return {p.id: p.name for p in self._profiles.values()}

    @staticmethod
    def from_json(document: str | list | Mapping[str, Any]) -> UserDirectory:
        if isinstance(document, str):
            document = json.loads(document)
        if isinstance(document, Mapping):
            document = document.get("users", [])
        return UserDirectory(UserProfile.from_dict(entry) for entry in document)


# ---------------------------------------------------------------------------
# Delivery history and occurrence


@dataclass(frozen=True)
class ExplanationHistoryEntry:
    user_id: str
    entity: str
    action: str
    explained_at: Millis


class ExplanationHistory:
    """Append-only record of delivered explanations, optionally file-backed."""

    def __init__(self, path: str | Path | None = None) -> None:
        self._entries: list[ExplanationHistoryEntry] = []
        self._lock = threading.Lock()
        self._path = Path(path) if path is not None else None
        if self._path is not None and self._path.exists():
            self._replay_file()

    def _replay_file(self) -> None:
        assert self._path is not None
        try:
            with self._path.open("r", encoding="utf-8") as fp:
                for line in fp:
                    line = line.strip()
                    if not line:
                        continue
                    data = json.loads(line)
                    self._entries.append(
                        ExplanationHistoryEntry(
                            user_id=data["user_id"],
                            entity=data["entity"],
                            action=data["action"],
                            explained_at=parse_instant(data["at"]),
                        )
                    )
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise StorageError(f"cannot read history {self._path}: {exc}") from exc

    def record(self, user_id: str, key: ExplanandumKey, at: Millis) -> None:
        entry = ExplanationHistoryEntry(user_id, key[0], key[1], at)
        with self._lock:
            if self._path is not None:
                try:
                    with self._path.open("a", encoding="utf-8") as fp:
                        fp.write(
                            json.dumps(
                                {
                                    "user_id": entry.user_id,
                                    "entity": entry.entity,
                                    "action": entry.action,
                                    "at": format_instant(entry.explained_at),
                                }
                            )
                            + "\n"
                        )
                except OSError as exc:
                    raise StorageError(f"cannot append history: {exc}") from exc
            self._entries.append(entry)

    def count(
        self, user_id: str, key: ExplanandumKey, at: Millis, *, window_days: int
    ) -> int:
        """Deliveries for (user, key) with ``at - window < t <= at``."""
        horizon = at - window_days * DAY_MS
        with self._lock:
            return sum(
                1
                for e in self._entries
                if e.user_id == user_id
                and (e.entity, e.action) == key
                and horizon < e.explained_at <= at
            )

    def all_entries(self) -> tuple[ExplanationHistoryEntry, ...]:
        with self._lock:
            return tuple(self._entries)


def classify_occurrence(count: int) -> Occurrence:
    if count <= 0:
        return Occurrence.FIRST_TIME
    if count == 1:
        return Occurrence.SECOND_TIME
    return Occurrence.MORE


# ---------------------------------------------------------------------------
# User state providers


class UserStateProvider(Protocol):
    def fetch(self, user_id: str, at: Millis) -> UserState: ...


@dataclass(frozen=True)
class ScheduleEntry:
    user_id: str
    start: Millis
    end: Millis
    state: UserState


class ScheduleStateProvider:
    """State feed backed by per-user interval schedules.

    Intervals are half-open [start, end); an instant with no entry maps
    to WORKING, the documented default.
    """

    def __init__(self, entries: Iterable[ScheduleEntry] = ()) -> None:
        self._entries = list(entries)

    def fetch(self, user_id: str, at: Millis) -> UserState:
        for entry in self._entries:
            if entry.user_id == user_id and entry.start <= at < entry.end:
                return entry.state
        return UserState.WORKING


class HttpStateProvider:
    """Client for a remote state feed: GET {base}/state?user_id=..&at=ISO."""

    def __init__(self, base_url: str, timeout: float = 5.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def fetch(self, user_id: str, at: Millis) -> UserState:
        import httpx

        try:
            response = httpx.get(
                f"{self.base_url}/state",
                params={"user_id": user_id, "at": format_instant(at)},
                timeout=self.timeout,
            )
            response.raise_for_status()
            return UserState(response.json()["state"])
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise ProviderUnavailableError(f"state provider failed: {exc}") from exc


# ---------------------------------------------------------------------------
# Snapshot assembly


class ContextManager:
    """Joins profile, live state, and occurrence into one snapshot."""

    def __init__(
        self,
        users: UserDirectory,
        history: ExplanationHistory | None = None,
        provider: UserStateProvider | None = None,
        *,
        occurrence_window_days: int = OCCURRENCE_WINDOW_DAYS,
        state_fallback: bool = True,
    ) -> None:
        self.users = users
        self.history = history if history is not None else ExplanationHistory()
        self.provider = provider
        self.occurrence_window_days = occurrence_window_days
        self.state_fallback = state_fallback

    def fetch_user_state(self, user_id: str, at: Millis) -> UserState:
        if self.provider is None:
            raise ProviderUnavailableError("no user state provider configured")
        return self.provider.fetch(user_id, at)

    def snapshot(self, user_id: str, key: ExplanandumKey, at: Millis) -> ContextSnapshot:
        profile = self.users.get(user_id)
        degraded = False
        try:
            state = self.fetch_user_state(user_id, at)
        except ProviderUnavailableError:
            if not self.state_fallback:
                raise
            logger.warning("state provider unavailable for %s; defaulting to working", user_id)
            state = UserState.WORKING
            degraded = True
        count = self.history.count(user_id, key, at, window_days=self.occurrence_window_days)
        return ContextSnapshot(
            user_name=profile.name,
            user_state=state,
            occurrence=classify_occurrence(count),
            technicality=profile.technicality,
            role=profile.role,
            degraded=degraded,
        )

    def record_delivery(self, user_id: str, key: ExplanandumKey, at: Millis) -> None:
        self.history.record(user_id, key, at)
