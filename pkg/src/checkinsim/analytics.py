"""Offline cheater detection over exported profiles and event logs.

Four detectors: badge-to-checkin anomaly, sustained daily check-in rate,
physically infeasible travel between consecutive check-ins, and geographic
dispersion of the check-in history. Everything here is recomputable from the
export files alone; ground truth never feeds a detector.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

from .geo import GeoPoint, haversine_m
from .tables import EventRow, PublicTables


class CurvePoint(NamedTuple):
    total_checkins: int
    mean_value: float
    n_users: int


@dataclass(frozen=True)
class DetectionThresholds:
    """Detector tuning; defaults separate the bundled honest/cheater fixtures."""

    v_travel_m_per_s: float = 250.0
    cluster_radius_m: float = 50_000.0
    dispersion_min_clusters: int = 10
    badge_min_checkins: int = 1000
    badge_max_badges: int = 10
    daily_rate_max: float = 16.0
    curve_max_total: int = 2000
    registration_span_days: float = 365.0
    min_account_age_days: float = 30.0


@dataclass(frozen=True)
class SuspicionRecord:
    user_id: int
    recent_ratio: float
    badge_flag: bool
    daily_rate: float
    infeasible_pairs: int
    clusters: int
    suspicious: bool
    reasons: tuple[str, ...]


def compute_recent_ratio_curve(
    tables: PublicTables, max_total: int = 2000
) -> list[CurvePoint]:
    """Mean recent-list appearances per total-check-in count (totals <= cap)."""
    sums: dict[int, int] = {}
    counts: dict[int, int] = {}
    for u in tables.users.values():
        if u.total_checkins > max_total:
            continue
        sums[u.total_checkins] = sums.get(u.total_checkins, 0) + u.recent_checkins
        counts[u.total_checkins] = counts.get(u.total_checkins, 0) + 1
    return [
        CurvePoint(total, sums[total] / counts[total], counts[total])
        for total in sorted(sums)
    ]


def compute_badge_curve(tables: PublicTables, max_total: int = 2000) -> list[CurvePoint]:
    """Mean badge count per total-check-in count (totals <= cap)."""
    sums: dict[int, int] = {}
    counts: dict[int, int] = {}
    for u in tables.users.values():
        if u.total_checkins > max_total:
            continue
        sums[u.total_checkins] = sums.get(u.total_checkins, 0) + u.total_badges
        counts[u.total_checkins] = counts.get(u.total_checkins, 0) + 1
    return [
        CurvePoint(total, sums[total] / counts[total], counts[total])
        for total in sorted(sums)
    ]


def flag_badge_anomaly(
    total_checkins: int, total_badges: int, thresholds: DetectionThresholds = DetectionThresholds()
) -> bool:
    """Heavy check-in volume with almost no badges: rewards were withheld."""
    return total_checkins > thresholds.badge_min_checkins and total_badges < thresholds.badge_max_badges


def flag_daily_rate(
    total_checkins: int, account_age_days: float, thresholds: DetectionThresholds = DetectionThresholds()
) -> bool:
    """Average check-ins per day over the account lifetime above the bound."""
    if account_age_days < 1:
        raise ValueError("account age must be at least one day")
    return total_checkins / account_age_days > thresholds.daily_rate_max


def account_age_days(
    user_id: int, n_users: int, thresholds: DetectionThresholds = DetectionThresholds()
) -> float:
    """Estimated account age from the sequential user id.

    Ids are assumed to be handed out at a uniform rate over the registration
    span, so low ids are old accounts; a floor keeps brand-new accounts from
    producing divide-by-nothing rates.
    """
    if n_users < 1:
        return thresholds.min_account_age_days
    age = thresholds.registration_span_days * (n_users - user_id + 1) / n_users
    return max(thresholds.min_account_age_days, age)


def speed_feasibility(
    trace: Sequence[tuple[int, GeoPoint]], v_travel_m_per_s: float = 250.0
) -> int:
    """Count consecutive check-in pairs no physical journey could connect."""
    infeasible = 0
    prev_t: Optional[int] = None
    prev_loc: Optional[GeoPoint] = None
    for t, loc in trace:
        if prev_loc is not None:
            dist = haversine_m(prev_loc, loc)
            dt = t - prev_t
            if dt <= 0:
                if dist > 0.0:
                    infeasible += 1
            elif dist / dt > v_travel_m_per_s:
                infeasible += 1
        prev_t, prev_loc = t, loc
    return infeasible


def dispersion(
    trace: Sequence[tuple[int, GeoPoint]], cluster_radius_m: float = 50_000.0
) -> int:
    """Number of geographic clusters in a check-in history.

    Greedy leader clustering over a canonical ordering (time, then position),
    so duplicates and reordering of same-time points cannot change the count.
    """
    if not trace:
        raise ValueError("dispersion needs a non-empty trace")
    ordered = sorted(trace, key=lambda row: (row[0], row[1][0], row[1][1]))
    leaders: list[GeoPoint] = []
    for _, loc in ordered:
        for leader in leaders:
            if haversine_m(leader, loc) <= cluster_radius_m:
                break
        else:
            leaders.append(loc)
    return len(leaders)


def user_traces(
    tables: PublicTables, events: Sequence[EventRow]
) -> dict[int, list[tuple[int, GeoPoint]]]:
    """Per-user, time-ordered (t, venue location) traces from the event log."""
    venues = tables.venues
    traces: dict[int, list[tuple[int, GeoPoint]]] = {}
    for e in events:
        v = venues.get(e.venue_id)
        loc = GeoPoint(v.lat, v.lon) if v is not None else GeoPoint(e.reported_lat, e.reported_lon)
        traces.setdefault(e.user_id, []).append((e.t, loc))
    for trace in traces.values():
        trace.sort(key=lambda row: row[0])
    return traces


def build_report(
    tables: PublicTables,
    events: Sequence[EventRow],
    thresholds: DetectionThresholds = DetectionThresholds(),
) -> list[SuspicionRecord]:
    """Run every detector for every user; rank by reason count, then id."""
    traces = user_traces(tables, events)
    n_users = max(tables.users) if tables.users else 0
    report: list[SuspicionRecord] = []
    for user_id in sorted(tables.users):
        u = tables.users[user_id]
        assert u.recent_checkins <= u.total_checkins or u.total_checkins == 0
        ratio = u.recent_checkins / u.total_checkins if u.total_checkins else 0.0

        reasons: list[str] = []
        badge_flag = flag_badge_anomaly(u.total_checkins, u.total_badges, thresholds)
        if badge_flag:
            reasons.append("badge_rate")
        age = account_age_days(user_id, n_users, thresholds)
        rate = u.total_checkins / age
        if flag_daily_rate(u.total_checkins, age, thresholds):
            reasons.append("daily_rate")

        trace = traces.get(user_id, [])
        infeasible = speed_feasibility(trace, thresholds.v_travel_m_per_s)
        clusters = dispersion(trace, thresholds.cluster_radius_m) if trace else 0
        if infeasible > 0:
            reasons.append("speed")
        if clusters >= thresholds.dispersion_min_clusters:
            reasons.append("dispersion")

        report.append(SuspicionRecord(
            user_id=user_id,
            recent_ratio=ratio,
            badge_flag=badge_flag,
            daily_rate=rate,
            infeasible_pairs=infeasible,
            clusters=clusters,
            suspicious=bool(reasons),
            reasons=tuple(reasons),
        ))
    report.sort(key=lambda r: (-len(r.reasons), r.user_id))
    return report


def write_report_csv(report: Sequence[SuspicionRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "recent_ratio", "badge_flag", "daily_rate",
                    "infeasible_pairs", "clusters", "suspicious", "reasons"])
        for r in report:
            w.writerow([r.user_id, f"{r.recent_ratio:.6f}", int(r.badge_flag), f"{r.daily_rate:.4f}",
                        r.infeasible_pairs, r.clusters, int(r.suspicious), ";".join(r.reasons)])
    return path


def write_curve_csv(curve: Sequence[CurvePoint], path: str | Path, value_name: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["total_checkins", value_name, "n_users"])
        for point in curve:
            w.writerow([point.total_checkins, f"{point.mean_value:.6f}", point.n_users])
    return path
