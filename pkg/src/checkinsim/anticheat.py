"""Server-side check-in validation rules.

Four rules run on every submitted check-in: a same-venue cooldown, an implied
travel-speed bound, a rapid-fire cluster rule, and a reported-GPS distance
check. Rules see only reported data, never simulation ground truth, and only
previously *valid* check-ins feed their state.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Mapping, NamedTuple, Optional, Sequence

from .geo import GeoPoint, MILE_M, OutOfProjectionRange, fits_square, haversine_m

# Relative slack so an exactly-at-the-limit pace is never flagged by float noise.
_SPEED_SLACK = 1e-9


class Flag(str, Enum):
    FREQUENT_CHECKIN = "FrequentCheckin"
    SUPER_HUMAN_SPEED = "SuperHumanSpeed"
    RAPID_FIRE = "RapidFire"
    GPS_MISMATCH = "GpsMismatch"


@dataclass(frozen=True)
class RuleConfig:
    """Tunable rule thresholds (SI units, seconds/meters)."""

    frequent_window_s: int = 3600
    max_speed_m_per_s: float = MILE_M / 300.0  # one mile per five minutes
    rapidfire_side_m: float = 180.0
    rapidfire_window_s: int = 60
    rapidfire_count: int = 4
    gps_radius_m: float = 500.0

    def __post_init__(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"RuleConfig.{f.name} must be strictly positive")

    @classmethod
    def from_dict(cls, data: Mapping) -> "RuleConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown rule config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_EMPTY_DETAIL: dict = {}


@dataclass(frozen=True)
class RuleVerdict:
    valid: bool
    flags: tuple[Flag, ...] = ()
    detail: Mapping[Flag, float] = field(default_factory=lambda: _EMPTY_DETAIL)

    def flag_names(self) -> list[str]:
        return [f.value for f in self.flags]


VALID_VERDICT = RuleVerdict(True)


class PriorCheckin(NamedTuple):
    """One earlier submission by the same user, as the rules see it."""

    t: int
    venue_id: int
    venue_location: GeoPoint
    valid: bool


def rule_frequent(
    history: Sequence[PriorCheckin], venue_id: int, t: int, config: RuleConfig
) -> Optional[tuple[Flag, float]]:
    """Flag a repeat check-in to the same venue inside the cooldown window."""
    for prior in reversed(history):
        if prior.valid and prior.venue_id == venue_id:
            elapsed = t - prior.t
            if elapsed < config.frequent_window_s:
                return Flag.FREQUENT_CHECKIN, float(elapsed)
            return None
    return None


def rule_speed(
    last_valid: Optional[PriorCheckin],
    venue_location: GeoPoint,
    t: int,
    config: RuleConfig,
) -> Optional[tuple[Flag, float]]:
    """Flag travel between consecutive valid check-ins beyond the speed limit."""
    if last_valid is None:
        return None
    dist = haversine_m(last_valid.venue_location, venue_location)
    dt = t - last_valid.t
    if dt <= 0:
        # Same-instant submissions at distinct locations imply infinite speed.
        if dist > 0.0:
            return Flag.SUPER_HUMAN_SPEED, float("inf")
        return None
    speed = dist / dt
    if speed > config.max_speed_m_per_s * (1.0 + _SPEED_SLACK):
        return Flag.SUPER_HUMAN_SPEED, speed
    return None


def rule_rapidfire(
    recent: Sequence[PriorCheckin],
    candidate_location: GeoPoint,
    config: RuleConfig,
) -> Optional[tuple[Flag, float]]:
    """Flag the Nth check-in of a tight cluster inside the rapid-fire window.

    ``recent`` must contain only valid check-ins already inside the window.
    """
    if len(recent) < config.rapidfire_count - 1:
        return None
    points = [prior.venue_location for prior in recent]
    points.append(candidate_location)
    if _cluster_fits(points, config.rapidfire_side_m):
        return Flag.RAPID_FIRE, float(len(points))
    return None


def _cluster_fits(points: list[GeoPoint], side_m: float) -> bool:
    try:
        return fits_square(points, side_m)
    except OutOfProjectionRange:
        # spread beyond the local projection range cannot fit any small square
        return False


def rule_gps(
    reported_gps: GeoPoint, venue_location: GeoPoint, config: RuleConfig
) -> Optional[tuple[Flag, float]]:
    """Flag a reported device position too far from the venue."""
    offset = haversine_m(reported_gps, venue_location)
    if offset > config.gps_radius_m:
        return Flag.GPS_MISMATCH, offset
    return None


def evaluate(
    history: Sequence[PriorCheckin],
    venue_id: int,
    venue_location: GeoPoint,
    reported_gps: GeoPoint,
    t: int,
    config: RuleConfig,
) -> RuleVerdict:
    """Run all rules against a submission given the user's prior check-ins.

    Pure function of its arguments; identical replay yields identical verdicts.
    """
    last_valid = None
    for prior in reversed(history):
        if prior.valid:
            last_valid = prior
            break
    window_start = t - config.rapidfire_window_s
    recent = [p for p in history if p.valid and p.t > window_start]

    results = [
        rule_frequent(history, venue_id, t, config),
        rule_speed(last_valid, venue_location, t, config),
        rule_rapidfire(recent, venue_location, config),
        rule_gps(reported_gps, venue_location, config),
    ]
    hits = [r for r in results if r is not None]
    if not hits:
        return VALID_VERDICT
    return RuleVerdict(
        valid=False,
        flags=tuple(flag for flag, _ in hits),
        detail={flag: value for flag, value in hits},
    )


class UserRuleState:
    """Streaming per-user rule state: O(1) evaluation per submission.

    Holds only what the rules need from valid history: the last valid
    check-in time per venue, the most recent valid check-in, and the valid
    check-ins inside the rapid-fire window. Equivalent to ``evaluate`` over
    the full history (see the test suite's replay properties).
    """

    __slots__ = ("last_valid_t_by_venue", "last_valid", "recent")

    def __init__(self) -> None:
        self.last_valid_t_by_venue: dict[int, int] = {}
        self.last_valid: Optional[tuple[int, GeoPoint]] = None
        self.recent: deque[tuple[int, GeoPoint]] = deque()

    def evaluate_next(
        self,
        venue_id: int,
        venue_location: GeoPoint,
        reported_gps: GeoPoint,
        t: int,
        config: RuleConfig,
    ) -> RuleVerdict:
        flags: list[Flag] = []
        detail: dict[Flag, float] = {}

        prev_t = self.last_valid_t_by_venue.get(venue_id)
        if prev_t is not None and t - prev_t < config.frequent_window_s:
            flags.append(Flag.FREQUENT_CHECKIN)
            detail[Flag.FREQUENT_CHECKIN] = float(t - prev_t)

        if self.last_valid is not None:
            t_prev, loc_prev = self.last_valid
            dist = haversine_m(loc_prev, venue_location)
            dt = t - t_prev
            if dt <= 0:
                if dist > 0.0:
                    flags.append(Flag.SUPER_HUMAN_SPEED)
                    detail[Flag.SUPER_HUMAN_SPEED] = float("inf")
            else:
                speed = dist / dt
                if speed > config.max_speed_m_per_s * (1.0 + _SPEED_SLACK):
                    flags.append(Flag.SUPER_HUMAN_SPEED)
                    detail[Flag.SUPER_HUMAN_SPEED] = speed

        recent = self.recent
        window_start = t - config.rapidfire_window_s
        while recent and recent[0][0] <= window_start:
            recent.popleft()
        if len(recent) >= config.rapidfire_count - 1:
            points = [loc for _, loc in recent]
            points.append(venue_location)
            if _cluster_fits(points, config.rapidfire_side_m):
                flags.append(Flag.RAPID_FIRE)
                detail[Flag.RAPID_FIRE] = float(len(points))

        offset = haversine_m(reported_gps, venue_location)
        if offset > config.gps_radius_m:
            flags.append(Flag.GPS_MISMATCH)
            detail[Flag.GPS_MISMATCH] = offset

        if not flags:
            return VALID_VERDICT
        return RuleVerdict(valid=False, flags=tuple(flags), detail=detail)

    def record_valid(self, venue_id: int, venue_location: GeoPoint, t: int) -> None:
        """Fold an accepted check-in into the rule state."""
        self.last_valid_t_by_venue[venue_id] = t
        self.last_valid = (t, venue_location)
        self.recent.append((t, venue_location))


def offline_verdicts(
    trace: Sequence[tuple[int, int, GeoPoint, GeoPoint]],
    config: RuleConfig,
    prior_valid: Optional[Sequence[bool]] = None,
) -> list[RuleVerdict]:
    """Recompute every verdict of a full trace by brute-force rescan.

    ``trace`` rows are (t, venue_id, venue_location, reported_gps), time
    ordered. By default validity chains through the recomputed verdicts;
    passing ``prior_valid`` pins each row's validity-for-state to a recorded
    outcome instead (used when replaying logs whose acceptance was also
    gated by presence attestation).
    """
    history: list[PriorCheckin] = []
    verdicts: list[RuleVerdict] = []
    for i, (t, venue_id, venue_location, reported_gps) in enumerate(trace):
        verdict = evaluate(history, venue_id, venue_location, reported_gps, t, config)
        verdicts.append(verdict)
        was_valid = verdict.valid if prior_valid is None else prior_valid[i]
        history.append(PriorCheckin(t, venue_id, venue_location, was_valid))
    return verdicts
