"""Spherical geometry primitives used by the rules, planners and detectors.

All distances are meters on a spherical Earth (R = 6,371,000 m); coordinates
are latitude/longitude in decimal degrees.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

EARTH_RADIUS_M = 6_371_000.0
METERS_PER_DEG = math.pi * EARTH_RADIUS_M / 180.0  # meters per degree of latitude
MILE_M = 1609.344  # international mile
PROJECTION_RANGE_M = 50_000.0


class OutOfProjectionRange(Exception):
    """Point too far from the projection origin for the local flat model."""


class GeoPoint(NamedTuple):
    lat: float
    lon: float


class LocalOffset(NamedTuple):
    """Flat east/north offset in meters about a stated origin."""

    east_m: float
    north_m: float


def validate_point(p: GeoPoint) -> GeoPoint:
    """Check latitude/longitude ranges and finiteness, returning the point."""
    lat, lon = p
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise ValueError(f"coordinates must be finite, got ({lat}, {lon})")
    if not -90.0 <= lat <= 90.0:
        raise ValueError(f"latitude {lat} outside [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise ValueError(f"longitude {lon} outside [-180, 180]")
    return p


def _wrap_lon(lon: float) -> float:
    if -180.0 <= lon <= 180.0:
        return lon
    return (lon + 180.0) % 360.0 - 180.0


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters between two lat/lon points."""
    lat1 = math.radians(a[0])
    lat2 = math.radians(b[0])
    dlat = lat2 - lat1
    dlon = math.radians(b[1] - a[1])
    h = (
        math.sin(dlat * 0.5) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin(dlon * 0.5) ** 2
    )
    if h > 1.0:  # guard rounding at antipodes
        h = 1.0
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(h))


def project_local(origin: GeoPoint, p: GeoPoint) -> LocalOffset:
    """Equirectangular projection of ``p`` about ``origin``.

    Only valid near the origin; raises OutOfProjectionRange beyond 50 km.
    """
    if haversine_m(origin, p) > PROJECTION_RANGE_M:
        raise OutOfProjectionRange(
            f"{p} is farther than {PROJECTION_RANGE_M} m from origin {origin}"
        )
    dlon = _wrap_lon(p[1] - origin[1])
    east = dlon * math.cos(math.radians(origin[0])) * METERS_PER_DEG
    north = (p[0] - origin[0]) * METERS_PER_DEG
    return LocalOffset(east, north)


def unproject_local(origin: GeoPoint, offset: LocalOffset) -> GeoPoint:
    """Inverse of project_local for the same origin."""
    lat = origin[0] + offset.north_m / METERS_PER_DEG
    lon = origin[1] + offset.east_m / (math.cos(math.radians(origin[0])) * METERS_PER_DEG)
    return GeoPoint(lat, _wrap_lon(lon))


def fits_square(points: Sequence[GeoPoint], side_m: float) -> bool:
    """True iff the bounding box of the points fits in a side_m x side_m square.

    The box is axis-aligned in a local projection anchored at the points
    themselves (their own bounding box, not a fixed grid).
    """
    if not 1 <= len(points) <= 1000:
        raise ValueError(f"fits_square expects 1..1000 points, got {len(points)}")
    origin = points[0]
    min_e = max_e = 0.0
    min_n = max_n = 0.0
    for p in points[1:]:
        east, north = project_local(origin, p)
        if east < min_e:
            min_e = east
        elif east > max_e:
            max_e = east
        if north < min_n:
            min_n = north
        elif north > max_n:
            max_n = north
    return (max_e - min_e) <= side_m and (max_n - min_n) <= side_m


_MAX_OFFSET_M = math.pi * EARTH_RADIUS_M  # antipode


def offset_point(origin: GeoPoint, bearing_deg: float, dist_m: float) -> GeoPoint:
    """Destination point at dist_m along a compass bearing from origin.

    Exact on the sphere, so a haversine back-check reproduces dist_m to well
    under the 0.1% contract.
    """
    if not math.isfinite(dist_m) or dist_m < 0:
        raise ValueError(f"distance must be finite and non-negative, got {dist_m}")
    if dist_m > _MAX_OFFSET_M:
        raise OutOfProjectionRange(f"step of {dist_m} m exceeds the antipodal distance")
    if dist_m == 0:
        return origin
    delta = dist_m / EARTH_RADIUS_M
    theta = math.radians(bearing_deg)
    lat1 = math.radians(origin[0])
    lon1 = math.radians(origin[1])
    sin_lat2 = math.sin(lat1) * math.cos(delta) + math.cos(lat1) * math.sin(delta) * math.cos(theta)
    lat2 = math.asin(max(-1.0, min(1.0, sin_lat2)))
    lon2 = lon1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(lat1),
        math.cos(delta) - math.sin(lat1) * sin_lat2,
    )
    return GeoPoint(math.degrees(lat2), _wrap_lon(math.degrees(lon2)))
