"""Authoritative simulated-service state.

Holds venues, users and the append-only check-in log, and runs every
submission through the anticheat -> attestation -> rewards pipeline. All
mutation flows through a single logical submission sequence; exports and
analytics read immutable projections.
"""

from __future__ import annotations

import csv
import hashlib
import json
import pickle
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .anticheat import RuleConfig, RuleVerdict, UserRuleState
from .geo import GeoPoint, validate_point
from .rewards import BadgeSpec, DEFAULT_BADGE_CATALOG, RewardsEngine
from .verify import RouterRegistration, attest_checkin

# Flag string used in exports for check-ins rejected by strict presence
# verification; not part of the anticheat rule set.
PRESENCE_UNVERIFIED = "PresenceUnverified"

_SNAPSHOT_FORMAT = "checkinsim-snapshot"
_SNAPSHOT_VERSION = 1


class UnknownUser(Exception):
    pass


class UnknownVenue(Exception):
    pass


class ClockRegression(Exception):
    """Submission timestamp earlier than the simulation clock."""


class CorruptSnapshot(Exception):
    """Snapshot file is truncated, malformed, or fails its checksum."""


@dataclass(slots=True)
class SimClock:
    now: int = 0

    def advance(self, t: int) -> None:
        if t < self.now:
            raise ClockRegression(f"t={t} is before simulation clock {self.now}")
        self.now = t


@dataclass(slots=True)
class Venue:
    venue_id: int
    name: str
    location: GeoPoint
    has_mayor_special: bool = False
    total_checkins: int = 0
    unique_visitors: int = 0
    mayor_id: Optional[int] = None
    recent_visitors: list[int] = field(default_factory=list)
    visitor_ids: set[int] = field(default_factory=set)


@dataclass(slots=True)
class UserProfile:
    user_id: int
    home: GeoPoint
    total_checkins: int = 0
    points: int = 0
    badges: set[str] = field(default_factory=set)
    total_mayorships: int = 0
    is_cheater_ground_truth: bool = False


@dataclass(slots=True)
class CheckInRecord:
    t: int
    user_id: int
    venue_id: int
    reported_gps: GeoPoint
    true_gps: GeoPoint
    verdict: RuleVerdict
    attested: Optional[bool] = None
    accepted: bool = False

    def export_flags(self) -> list[str]:
        flags = self.verdict.flag_names()
        if self.verdict.valid and not self.accepted:
            flags.append(PRESENCE_UNVERIFIED)
        return flags


class World:
    """One simulated deployment of the service."""

    def __init__(
        self,
        rule_config: Optional[RuleConfig] = None,
        badge_catalog: Iterable[BadgeSpec] = DEFAULT_BADGE_CATALOG,
        recent_list_len: int = 10,
        seed: int = 0,
        strict_verify: bool = False,
    ) -> None:
        self.rule_config = rule_config or RuleConfig()
        self.rewards = RewardsEngine(badge_catalog)
        self.recent_list_len = recent_list_len
        self.strict_verify = strict_verify
        self.clock = SimClock()
        self.rng = random.Random(seed)
        self.venues: list[Venue] = []
        self.users: list[UserProfile] = []
        self.events: list[CheckInRecord] = []
        self.routers: dict[int, RouterRegistration] = {}
        self._rule_states: dict[int, UserRuleState] = {}

    # -- registration --------------------------------------------------------

    def register_venue(self, name: str, location: GeoPoint, has_mayor_special: bool = False) -> int:
        validate_point(location)
        venue_id = len(self.venues) + 1
        self.venues.append(Venue(venue_id, name, GeoPoint(*location), has_mayor_special))
        return venue_id

    def register_user(self, home: GeoPoint, is_cheater: bool = False) -> int:
        validate_point(home)
        user_id = len(self.users) + 1
        self.users.append(UserProfile(user_id, GeoPoint(*home), is_cheater_ground_truth=is_cheater))
        return user_id

    def register_router(self, router: RouterRegistration) -> None:
        self.venue(router.venue_id)  # must refer to a known venue
        self.routers[router.venue_id] = router

    def venue(self, venue_id: int) -> Venue:
        if not 1 <= venue_id <= len(self.venues):
            raise UnknownVenue(f"venue {venue_id} is not registered")
        return self.venues[venue_id - 1]

    def user(self, user_id: int) -> UserProfile:
        if not 1 <= user_id <= len(self.users):
            raise UnknownUser(f"user {user_id} is not registered")
        return self.users[user_id - 1]

    # -- check-in pipeline -----------------------------------------------------

    def submit_checkin(
        self,
        user_id: int,
        venue_id: int,
        reported_gps: GeoPoint,
        t: int,
        true_gps: Optional[GeoPoint] = None,
    ) -> CheckInRecord:
        """Submit one check-in: evaluate rules, then apply counters and rewards.

        The rules receive only reported data. ``true_gps`` (defaulting to the
        reported position) exists for ground-truth bookkeeping and presence
        attestation only.
        """
        user = self.user(user_id)
        venue = self.venue(venue_id)
        validate_point(reported_gps)
        if true_gps is None:
            true_gps = reported_gps
        self.clock.advance(t)

        state = self._rule_states.get(user_id)
        if state is None:
            state = UserRuleState()
            self._rule_states[user_id] = state
        verdict = state.evaluate_next(venue_id, venue.location, reported_gps, t, self.rule_config)

        attested: Optional[bool] = None
        if self.routers:
            attested = attest_checkin(venue_id, true_gps, self.routers)
        accepted = verdict.valid and (not self.strict_verify or bool(attested))

        user.total_checkins += 1
        if accepted:
            state.record_valid(venue_id, venue.location, t)
            venue.total_checkins += 1
            if user_id not in venue.visitor_ids:
                venue.visitor_ids.add(user_id)
                venue.unique_visitors += 1
            recent = venue.recent_visitors
            if user_id in recent:
                recent.remove(user_id)
            recent.insert(0, user_id)
            del recent[self.recent_list_len:]
            _, _, mayor = self.rewards.on_valid_checkin(user, venue_id, t)
            self._apply_mayor(venue, mayor)

        record = CheckInRecord(t, user_id, venue_id, reported_gps, true_gps, verdict, attested, accepted)
        self.events.append(record)
        return record

    def _apply_mayor(self, venue: Venue, mayor: Optional[int]) -> None:
        old = venue.mayor_id
        if mayor == old:
            return
        if old is not None:
            self.users[old - 1].total_mayorships -= 1
        if mayor is not None:
            self.users[mayor - 1].total_mayorships += 1
        venue.mayor_id = mayor

    def mayor_of(self, venue_id: int, t: Optional[int] = None) -> Optional[int]:
        """Current mayor, recomputed lazily at time t (default: clock now)."""
        venue = self.venue(venue_id)
        mayor = self.rewards.recompute_mayor(venue_id, self.clock.now if t is None else t)
        self._apply_mayor(venue, mayor)
        return mayor

    # -- exports ---------------------------------------------------------------

    def export_public_profiles(self, destination: str | Path) -> dict[str, Path]:
        """Write the crawlable projection: UserInfo, VenueInfo, RecentCheckin.

        Recent-visitor rows deliberately carry no timestamp, and nothing
        derived from ground truth is written.
        """
        dest = Path(destination)
        dest.mkdir(parents=True, exist_ok=True)
        paths = {
            "UserInfo": dest / "UserInfo.csv",
            "VenueInfo": dest / "VenueInfo.csv",
            "RecentCheckin": dest / "RecentCheckin.csv",
        }

        recent_counts: dict[int, int] = {}
        for venue in self.venues:
            for uid in venue.recent_visitors:
                recent_counts[uid] = recent_counts.get(uid, 0) + 1

        with open(paths["UserInfo"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user_id", "total_checkins", "total_badges", "total_mayorships", "recent_checkins"])
            for u in self.users:
                w.writerow([u.user_id, u.total_checkins, len(u.badges), u.total_mayorships,
                            recent_counts.get(u.user_id, 0)])

        with open(paths["VenueInfo"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["venue_id", "name", "lat", "lon", "total_checkins", "unique_visitors",
                        "mayor_id", "has_mayor_special"])
            for v in self.venues:
                w.writerow([v.venue_id, v.name, repr(v.location.lat), repr(v.location.lon),
                            v.total_checkins, v.unique_visitors,
                            "" if v.mayor_id is None else v.mayor_id,
                            1 if v.has_mayor_special else 0])

        with open(paths["RecentCheckin"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["venue_id", "user_id"])
            for v in self.venues:
                for uid in v.recent_visitors:
                    w.writerow([v.venue_id, uid])

        return paths

    def export_events(self, path: str | Path) -> Path:
        """Write the append-only event log as JSON lines."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.events:
                fh.write(json.dumps({
                    "t": r.t,
                    "user_id": r.user_id,
                    "venue_id": r.venue_id,
                    "reported_lat": r.reported_gps.lat,
                    "reported_lon": r.reported_gps.lon,
                    "valid": r.accepted,
                    "flags": r.export_flags(),
                }, separators=(",", ":")))
                fh.write("\n")
        return path

    # -- snapshots ---------------------------------------------------------------

    def save_state(self, path: str | Path) -> Path:
        """Persist the full world (including RNG and clock) with a checksum."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = pickle.dumps(self, protocol=pickle.HIGHEST_PROTOCOL)
        header = json.dumps({
            "format": _SNAPSHOT_FORMAT,
            "version": _SNAPSHOT_VERSION,
            "payload_bytes": len(payload),
            "sha256": hashlib.sha256(payload).hexdigest(),
        }, sort_keys=True)
        with open(path, "wb") as fh:
            fh.write(header.encode("utf-8"))
            fh.write(b"\n")
            fh.write(payload)
        return path

    @staticmethod
    def load_state(path: str | Path) -> "World":
        with open(path, "rb") as fh:
            header_line = fh.readline()
            payload = fh.read()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptSnapshot(f"unreadable snapshot header: {exc}") from exc
        if header.get("format") != _SNAPSHOT_FORMAT or header.get("version") != _SNAPSHOT_VERSION:
            raise CorruptSnapshot(f"unsupported snapshot header: {header}")
        if len(payload) != header.get("payload_bytes"):
            raise CorruptSnapshot(
                f"truncated snapshot: expected {header.get('payload_bytes')} bytes, got {len(payload)}"
            )
        if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
            raise CorruptSnapshot("snapshot checksum mismatch")
        world = pickle.loads(payload)
        if not isinstance(world, World):
            raise CorruptSnapshot("snapshot payload is not a world")
        return world

    # -- integrity helpers ----------------------------------------------------------

    def fingerprint(self) -> str:
        """Stable digest of all observable state; equal worlds hash equal."""
        h = hashlib.sha256()

        def feed(obj) -> None:
            h.update(repr(obj).encode("utf-8"))

        feed(("clock", self.clock.now))
        feed(("rng", self.rng.getstate()))
        feed(("config", self.rule_config.to_dict(), self.recent_list_len, self.strict_verify))
        for u in self.users:
            feed((u.user_id, u.home, u.total_checkins, u.points, sorted(u.badges),
                  u.total_mayorships, u.is_cheater_ground_truth))
        for v in self.venues:
            feed((v.venue_id, v.name, v.location, v.has_mayor_special, v.total_checkins,
                  v.unique_visitors, v.mayor_id, v.recent_visitors))
        for r in self.events:
            feed((r.t, r.user_id, r.venue_id, r.reported_gps, r.true_gps,
                  r.verdict.valid, r.verdict.flags, r.attested, r.accepted))
        for uid in sorted(self._rule_states):
            s = self._rule_states[uid]
            feed((uid, sorted(s.last_valid_t_by_venue.items()), s.last_valid, list(s.recent)))
        for vid, router in sorted(self.routers.items()):
            feed((vid, router))
        return h.hexdigest()

    def valid_count(self) -> int:
        return sum(1 for r in self.events if r.accepted)

    def invalid_by_flag(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.events:
            if not r.accepted:
                for name in r.export_flags():
                    counts[name] = counts.get(name, 0) + 1
        return counts
