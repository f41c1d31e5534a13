"""Public-profile table model: the crawlable projection of a world.

Loads the CSV exports (UserInfo, VenueInfo, RecentCheckin) and the event
log, for consumption by the attacker planner and the offline detectors.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

from .geo import GeoPoint


class MissingTables(Exception):
    """An expected export file is absent."""


class UserRow(NamedTuple):
    user_id: int
    total_checkins: int
    total_badges: int
    total_mayorships: int
    recent_checkins: int


class VenueRow(NamedTuple):
    venue_id: int
    name: str
    lat: float
    lon: float
    total_checkins: int
    unique_visitors: int
    mayor_id: Optional[int]
    has_mayor_special: bool

    @property
    def location(self) -> GeoPoint:
        return GeoPoint(self.lat, self.lon)


class EventRow(NamedTuple):
    t: int
    user_id: int
    venue_id: int
    reported_lat: float
    reported_lon: float
    valid: bool
    flags: tuple[str, ...]


@dataclass
class PublicTables:
    users: dict[int, UserRow]
    venues: dict[int, VenueRow]
    recent: list[tuple[int, int]]  # (venue_id, user_id)


def load_tables(directory: str | Path) -> PublicTables:
    """Read the three public CSV exports from a directory."""
    directory = Path(directory)
    for name in ("UserInfo.csv", "VenueInfo.csv", "RecentCheckin.csv"):
        if not (directory / name).is_file():
            raise MissingTables(f"{name} not found in {directory}")

    users: dict[int, UserRow] = {}
    with open(directory / "UserInfo.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            u = UserRow(int(row["user_id"]), int(row["total_checkins"]), int(row["total_badges"]),
                        int(row["total_mayorships"]), int(row["recent_checkins"]))
            users[u.user_id] = u

    venues: dict[int, VenueRow] = {}
    with open(directory / "VenueInfo.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            v = VenueRow(int(row["venue_id"]), row["name"], float(row["lat"]), float(row["lon"]),
                         int(row["total_checkins"]), int(row["unique_visitors"]),
                         int(row["mayor_id"]) if row["mayor_id"] else None,
                         row["has_mayor_special"] == "1")
            venues[v.venue_id] = v

    recent: list[tuple[int, int]] = []
    with open(directory / "RecentCheckin.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            recent.append((int(row["venue_id"]), int(row["user_id"])))

    return PublicTables(users, venues, recent)


def tables_from_world(world) -> PublicTables:
    """Build the same projection directly from a live world (no file round trip)."""
    recent_counts: dict[int, int] = {}
    recent: list[tuple[int, int]] = []
    for v in world.venues:
        for uid in v.recent_visitors:
            recent.append((v.venue_id, uid))
            recent_counts[uid] = recent_counts.get(uid, 0) + 1
    users = {
        u.user_id: UserRow(u.user_id, u.total_checkins, len(u.badges), u.total_mayorships,
                           recent_counts.get(u.user_id, 0))
        for u in world.users
    }
    venues = {
        v.venue_id: VenueRow(v.venue_id, v.name, v.location.lat, v.location.lon,
                             v.total_checkins, v.unique_visitors, v.mayor_id, v.has_mayor_special)
        for v in world.venues
    }
    return PublicTables(users, venues, recent)


def load_events(path: str | Path) -> list[EventRow]:
    """Read an events.jsonl log."""
    path = Path(path)
    if not path.is_file():
        raise MissingTables(f"event log not found: {path}")
    events: list[EventRow] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            events.append(EventRow(obj["t"], obj["user_id"], obj["venue_id"],
                                   obj["reported_lat"], obj["reported_lon"],
                                   obj["valid"], tuple(obj["flags"])))
    return events
