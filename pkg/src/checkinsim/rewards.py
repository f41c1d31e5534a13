"""Progressive reward mechanics: points, achievement badges, and the
60-day mayorship competition.

Mutated only from the world's single submission sequence.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

DAY_S = 86_400


class BadgeKind(str, Enum):
    DISTINCT_VENUES = "distinct_venues"
    CHECKINS_IN_WINDOW = "checkins_in_window"


@dataclass(frozen=True)
class BadgeSpec:
    badge_id: str
    kind: BadgeKind
    threshold: int
    window_days: Optional[int] = None

    def __post_init__(self) -> None:
        if self.threshold < 1:
            raise ValueError("badge threshold must be >= 1")
        if (self.kind == BadgeKind.CHECKINS_IN_WINDOW) != (self.window_days is not None):
            raise ValueError("window_days is required exactly for checkins_in_window badges")

    @classmethod
    def from_dict(cls, data: Mapping) -> "BadgeSpec":
        return cls(
            badge_id=data["badge_id"],
            kind=BadgeKind(data["kind"]),
            threshold=int(data["threshold"]),
            window_days=None if data.get("window_days") is None else int(data["window_days"]),
        )

    def to_dict(self) -> dict:
        d = {"badge_id": self.badge_id, "kind": self.kind.value, "threshold": self.threshold}
        if self.window_days is not None:
            d["window_days"] = self.window_days
        return d


DEFAULT_BADGE_CATALOG: tuple[BadgeSpec, ...] = (
    BadgeSpec("adventurer", BadgeKind.DISTINCT_VENUES, 10),
    BadgeSpec("marathon-month", BadgeKind.CHECKINS_IN_WINDOW, 30, window_days=30),
)


class _BadgeProgress:
    __slots__ = ("venues", "windows", "complete")

    def __init__(self, window_badges: Sequence[BadgeSpec]) -> None:
        self.venues: set[int] = set()
        self.windows: dict[str, deque[int]] = {spec.badge_id: deque() for spec in window_badges}
        self.complete = False


class MayorState:
    """Per-venue mayorship bookkeeping.

    ``days`` maps user id to a deque of (day, latest check-in timestamp that
    day) for the user's valid check-ins at this venue; the window prune keys
    off the stored timestamps so partial days age out correctly.
    """

    __slots__ = ("venue_id", "mayor_id", "days")

    def __init__(self, venue_id: int) -> None:
        self.venue_id = venue_id
        self.mayor_id: Optional[int] = None
        self.days: dict[int, deque[tuple[int, int]]] = {}

    def note_checkin(self, user_id: int, t: int) -> None:
        day = t // DAY_S
        dq = self.days.get(user_id)
        if dq is None:
            dq = deque()
            self.days[user_id] = dq
        if dq and dq[-1][0] == day:
            dq[-1] = (day, t)
        else:
            dq.append((day, t))

    def distinct_day_counts(self, t: int, window_days: int = 60) -> dict[int, int]:
        """Distinct check-in days per user within (t - window, t]."""
        self._prune(t - window_days * DAY_S)
        return {user_id: len(dq) for user_id, dq in self.days.items()}

    def _prune(self, window_start: int) -> None:
        stale = []
        for user_id, dq in self.days.items():
            while dq and dq[0][1] <= window_start:
                dq.popleft()
            if not dq:
                stale.append(user_id)
        for user_id in stale:
            del self.days[user_id]


class RewardsEngine:
    """Applies points, badges and mayorship updates for valid check-ins."""

    def __init__(
        self,
        catalog: Iterable[BadgeSpec] = DEFAULT_BADGE_CATALOG,
        base_points: int = 1,
        mayor_window_days: int = 60,
    ) -> None:
        self.catalog = tuple(catalog)
        if len({spec.badge_id for spec in self.catalog}) != len(self.catalog):
            raise ValueError("duplicate badge ids in catalog")
        self.base_points = base_points
        self.mayor_window_days = mayor_window_days
        self._window_badges = tuple(
            s for s in self.catalog if s.kind == BadgeKind.CHECKINS_IN_WINDOW
        )
        self._venue_badges = tuple(
            s for s in self.catalog if s.kind == BadgeKind.DISTINCT_VENUES
        )
        self._progress: dict[int, _BadgeProgress] = {}
        self._mayors: dict[int, MayorState] = {}

    # -- points ------------------------------------------------------------

    def award_points(self, user) -> int:
        """Credit the flat per-check-in points; only valid check-ins get here."""
        user.points += self.base_points
        return self.base_points

    # -- badges ------------------------------------------------------------

    def update_badges(self, user, t: int) -> tuple[str, ...]:
        """Grant any catalog badges whose predicate now holds. Permanent."""
        progress = self._progress.get(user.user_id)
        if progress is None or progress.complete:
            return ()
        new: list[str] = []
        for spec in self._venue_badges:
            if spec.badge_id not in user.badges and len(progress.venues) >= spec.threshold:
                user.badges.add(spec.badge_id)
                new.append(spec.badge_id)
        for spec in self._window_badges:
            if spec.badge_id in user.badges:
                continue
            dq = progress.windows[spec.badge_id]
            window_start = t - spec.window_days * DAY_S
            while dq and dq[0] <= window_start:
                dq.popleft()
            if len(dq) >= spec.threshold:
                user.badges.add(spec.badge_id)
                new.append(spec.badge_id)
        if len(user.badges) >= len(self.catalog):
            progress.complete = True
        return tuple(new)

    # -- mayorship ----------------------------------------------------------

    def mayor_state(self, venue_id: int) -> MayorState:
        state = self._mayors.get(venue_id)
        if state is None:
            state = MayorState(venue_id)
            self._mayors[venue_id] = state
        return state

    def recompute_mayor(self, venue_id: int, t: int) -> Optional[int]:
        """Recompute the 60-day mayor for a venue at time t.

        The title goes to the user with the most distinct check-in days in
        the trailing window; an incumbent keeps it on ties, otherwise the
        lowest user id wins. With no qualifying days at all the incumbent
        retains the title.
        """
        state = self.mayor_state(venue_id)
        state._prune(t - self.mayor_window_days * DAY_S)
        best_user: Optional[int] = None
        best_count = 0
        for user_id, dq in state.days.items():
            count = len(dq)
            if count > best_count or (count == best_count and (best_user is None or user_id < best_user)):
                best_user = user_id
                best_count = count
        incumbent = state.mayor_id
        if best_count == 0:
            return incumbent
        if incumbent is not None:
            dq = state.days.get(incumbent)
            if dq is not None and len(dq) == best_count:
                return incumbent
        state.mayor_id = best_user
        return best_user

    # -- pipeline hook -------------------------------------------------------

    def on_valid_checkin(self, user, venue_id: int, t: int) -> tuple[int, tuple[str, ...], Optional[int]]:
        """Apply all reward effects of one valid check-in.

        Returns (points awarded, newly granted badge ids, mayor after update).
        """
        points = self.award_points(user)
        progress = self._progress.get(user.user_id)
        if progress is None:
            progress = _BadgeProgress(self._window_badges)
            self._progress[user.user_id] = progress
        if not progress.complete:
            progress.venues.add(venue_id)
            for dq in progress.windows.values():
                dq.append(t)
        badges = self.update_badges(user, t)
        self.mayor_state(venue_id).note_checkin(user.user_id, t)
        mayor = self.recompute_mayor(venue_id, t)
        return points, badges, mayor
