"""Location-cheating attacker: target selection from crawled profiles,
virtual-path planning over the venue map, and rule-evading schedules.

The attacker spoofs reported coordinates (reported GPS = venue location)
while its true position never moves; schedules space check-ins so that no
anticheat rule can fire.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

from .geo import GeoPoint, MILE_M, haversine_m, offset_point
from .spatial import VenueGridIndex
from .tables import PublicTables

MIN_INTERVAL_S = 300  # five minutes between check-ins up to one mile apart
SAME_VENUE_GAP_S = 3600  # cooldown safety gap for repeat visits
TOUR_STEP_DEG = 0.005


class NoVenuesAvailable(Exception):
    pass


class UnknownVictim(Exception):
    pass


class BBox(NamedTuple):
    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    def contains(self, p: GeoPoint) -> bool:
        return self.min_lat <= p.lat <= self.max_lat and self.min_lon <= p.lon <= self.max_lon


@dataclass(frozen=True)
class TargetCriteria:
    require_mayor_special: bool = False
    require_vacant_mayor: bool = False
    region: Optional[BBox] = None
    name_filter: Optional[str] = None


class ScheduleEntry(NamedTuple):
    venue_id: int
    fire_time: int


@dataclass
class AttackSchedule:
    """Ordered (venue, fire time) plan; reported GPS is the venue location."""

    entries: list[ScheduleEntry]

    def validate(self, location_of) -> None:
        """Check the timing invariants against venue positions."""
        prev: Optional[ScheduleEntry] = None
        last_fire: dict[int, int] = {}
        for entry in self.entries:
            if prev is not None:
                if entry.fire_time <= prev.fire_time:
                    raise ValueError("fire times must be strictly increasing")
                d_miles = haversine_m(location_of(prev.venue_id), location_of(entry.venue_id)) / MILE_M
                required = MIN_INTERVAL_S if d_miles <= 1.0 else d_miles * MIN_INTERVAL_S
                if entry.fire_time - prev.fire_time + 1e-6 < required:
                    raise ValueError(
                        f"interval {entry.fire_time - prev.fire_time}s under "
                        f"{required:.0f}s required for {d_miles:.2f} miles"
                    )
            seen = last_fire.get(entry.venue_id)
            if seen is not None and entry.fire_time - seen < SAME_VENUE_GAP_S:
                raise ValueError(f"venue {entry.venue_id} revisited within the cooldown window")
            last_fire[entry.venue_id] = entry.fire_time
            prev = entry


def _location(venue) -> GeoPoint:
    loc = getattr(venue, "location", None)
    if loc is not None:
        return GeoPoint(*loc)
    return GeoPoint(venue.lat, venue.lon)


def select_targets(venues: Iterable, criteria: TargetCriteria) -> list[int]:
    """Venue ids satisfying every set criterion, in id order.

    Works over live venues or rows loaded from a VenueInfo export.
    """
    needle = criteria.name_filter.lower() if criteria.name_filter else None
    out = []
    for v in venues:
        if criteria.require_mayor_special and not v.has_mayor_special:
            continue
        if criteria.require_vacant_mayor and v.mayor_id is not None:
            continue
        if criteria.region is not None and not criteria.region.contains(_location(v)):
            continue
        if needle is not None and needle not in v.name.lower():
            continue
        out.append(v.venue_id)
    out.sort()
    return out


def plan_step(
    current: GeoPoint,
    bearing_deg: float,
    step_m: float,
    index: VenueGridIndex,
    exclude: frozenset[int] | set[int] = frozenset(),
) -> int:
    """Venue closest to the point step_m along bearing_deg from current."""
    target = offset_point(current, bearing_deg, step_m)
    hit = index.nearest(target, exclude=exclude)
    if hit is None:
        raise NoVenuesAvailable("no venue available for the planned step")
    return hit[0]


def plan_tour(
    index: VenueGridIndex,
    start: GeoPoint,
    steps: int,
    step_deg: float = TOUR_STEP_DEG,
    avoid_revisit: bool = True,
    location_of=None,
) -> list[int]:
    """Virtual walking tour: snap to the nearest venue, then advance in
    axis-aligned degree steps, turning right in an outward spiral.

    Each move targets a point step_deg away in latitude or longitude from the
    previously chosen venue and checks into the venue nearest that target.
    """
    if steps < 1:
        raise ValueError("tour needs at least one step")
    if location_of is None:
        location_of = index.location_of
    exclude: set[int] = set()
    hit = index.nearest(start)
    if hit is None:
        raise NoVenuesAvailable("no venues to tour")
    tour = [hit[0]]
    if avoid_revisit:
        exclude.add(hit[0])
    current = location_of(hit[0])
    # Headings cycle N -> E -> S -> W with spiral leg lengths 1,1,2,2,3,3,...
    moves = _spiral_moves()
    while len(tour) < steps:
        dlat, dlon = next(moves)
        target = GeoPoint(current.lat + dlat * step_deg, current.lon + dlon * step_deg)
        hit = index.nearest(target, exclude=exclude)
        if hit is None:
            raise NoVenuesAvailable("ran out of venues during the tour")
        tour.append(hit[0])
        if avoid_revisit:
            exclude.add(hit[0])
        current = location_of(hit[0])
    return tour


def _spiral_moves():
    headings = [(1, 0), (0, 1), (-1, 0), (0, -1)]  # N, E, S, W (right turns)
    leg = 1
    i = 0
    while True:
        for _ in range(2):
            for _ in range(leg):
                yield headings[i % 4]
            i += 1
        leg += 1


def build_schedule(
    venues: Sequence[tuple[int, GeoPoint]],
    start_time: int,
    min_interval_s: int = MIN_INTERVAL_S,
    same_venue_gap_s: int = SAME_VENUE_GAP_S,
) -> AttackSchedule:
    """Turn an ordered venue sequence into a rule-safe firing schedule.

    Consecutive waits are five minutes up to one mile, then five minutes per
    mile (rounded up); repeat visits additionally wait out the same-venue
    cooldown.
    """
    if not venues:
        raise ValueError("cannot schedule an empty venue list")
    entries: list[ScheduleEntry] = []
    last_fire: dict[int, int] = {}
    t = int(start_time)
    prev_loc: Optional[GeoPoint] = None
    for venue_id, loc in venues:
        if prev_loc is not None:
            d_miles = haversine_m(prev_loc, loc) / MILE_M
            t += min_interval_s if d_miles <= 1.0 else int(math.ceil(d_miles * min_interval_s))
        seen = last_fire.get(venue_id)
        if seen is not None and t - seen < same_venue_gap_s:
            t = seen + same_venue_gap_s
        entries.append(ScheduleEntry(venue_id, t))
        last_fire[venue_id] = t
        prev_loc = loc
    return AttackSchedule(entries)


def execute(
    world,
    user_id: int,
    schedule: AttackSchedule,
    true_location: GeoPoint,
) -> list:
    """Fire the schedule: report each venue's own coordinates while the
    attacker's true position stays fixed. Returns the produced records."""
    records = []
    for venue_id, fire_time in schedule.entries:
        venue = world.venue(venue_id)
        records.append(
            world.submit_checkin(user_id, venue_id, venue.location, fire_time, true_gps=true_location)
        )
    return records


def plan_mayor_denial(victim_user_id: int, tables: PublicTables) -> list[int]:
    """Venues where the victim is visible: recent visitor lists or mayorships."""
    if victim_user_id not in tables.users:
        raise UnknownVictim(f"user {victim_user_id} not present in UserInfo")
    venue_ids = {vid for vid, uid in tables.recent if uid == victim_user_id}
    venue_ids.update(v.venue_id for v in tables.venues.values() if v.mayor_id == victim_user_id)
    return sorted(venue_ids)


def save_schedule(schedule: AttackSchedule, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for venue_id, fire_time in schedule.entries:
            fh.write(json.dumps({"venue_id": venue_id, "fire_time": fire_time}))
            fh.write("\n")
    return path


def load_schedule(path: str | Path) -> AttackSchedule:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            entries.append(ScheduleEntry(int(obj["venue_id"]), int(obj["fire_time"])))
    return AttackSchedule(entries)
