import random

import pytest

from checkinsim.rewards import (
    BadgeKind,
    BadgeSpec,
    DAY_S,
    DEFAULT_BADGE_CATALOG,
    RewardsEngine,
)
from checkinsim.world import UserProfile
from checkinsim.geo import GeoPoint

HOME = GeoPoint(40.0, -100.0)


def make_user(user_id=1):
    return UserProfile(user_id=user_id, home=HOME)


class TestPoints:
    def test_one_valid_checkin_one_point(self):
        engine = RewardsEngine()
        user = make_user()
        points, _, _ = engine.on_valid_checkin(user, 1, 100)
        assert points == 1 and user.points == 1

    def test_twenty_five_checkins_twenty_five_points(self):
        engine = RewardsEngine()
        user = make_user()
        t = 0
        for venue_id in range(1, 26):
            engine.on_valid_checkin(user, venue_id, t)
            t += 400
        assert user.points == 25


class TestBadges:
    def test_tenth_distinct_venue_grants_adventurer(self):
        engine = RewardsEngine()
        user = make_user()
        for venue_id in range(1, 10):
            engine.on_valid_checkin(user, venue_id, venue_id * 1000)
        assert "adventurer" not in user.badges
        _, new, _ = engine.on_valid_checkin(user, 10, 10_000)
        assert "adventurer" in new and "adventurer" in user.badges

    def test_revisits_do_not_count_as_distinct(self):
        engine = RewardsEngine()
        user = make_user()
        t = 0
        for _ in range(15):  # same venue over and over
            engine.on_valid_checkin(user, 1, t)
            t += 4000
        assert "adventurer" not in user.badges

    def test_thirty_checkins_in_thirty_days_grants_window_badge(self):
        engine = RewardsEngine()
        user = make_user()
        t = 0
        for i in range(30):
            _, new, _ = engine.on_valid_checkin(user, 1, t)
            t += DAY_S - 2000  # just under a day apart, all inside 30 days
        assert "marathon-month" in user.badges

    def test_slow_checkins_never_fill_the_window(self):
        engine = RewardsEngine()
        user = make_user()
        t = 0
        for _ in range(40):
            engine.on_valid_checkin(user, 1, t)
            t += 2 * DAY_S  # 40 check-ins over 80 days: at most 16 in any 30d
        assert "marathon-month" not in user.badges

    def test_badges_are_permanent_and_monotone(self):
        engine = RewardsEngine()
        user = make_user()
        granted = set()
        rng = random.Random(3)
        t = 0
        for _ in range(200):
            engine.on_valid_checkin(user, rng.randint(1, 12), t)
            assert granted <= user.badges
            granted = set(user.badges)
            t += rng.randint(1000, 50_000)

    def test_badge_spec_validation(self):
        with pytest.raises(ValueError):
            BadgeSpec("x", BadgeKind.DISTINCT_VENUES, 0)
        with pytest.raises(ValueError):
            BadgeSpec("x", BadgeKind.DISTINCT_VENUES, 5, window_days=10)
        with pytest.raises(ValueError):
            BadgeSpec("x", BadgeKind.CHECKINS_IN_WINDOW, 5)

    def test_badge_spec_round_trip(self):
        for spec in DEFAULT_BADGE_CATALOG:
            assert BadgeSpec.from_dict(spec.to_dict()) == spec


class TestMayorship:
    def test_four_distinct_days_wins_vacant_venue(self):
        engine = RewardsEngine()
        user = make_user(5)
        mayor = None
        for day in range(4):
            _, _, mayor = engine.on_valid_checkin(user, 1, day * DAY_S + 100)
        assert mayor == 5
        assert engine.mayor_state(1).mayor_id == 5

    def test_single_checkin_takes_unvisited_venue(self):
        engine = RewardsEngine()
        user = make_user(9)
        _, _, mayor = engine.on_valid_checkin(user, 3, 500)
        assert mayor == 9

    def test_same_day_checkins_count_once(self):
        engine = RewardsEngine()
        a, b = make_user(1), make_user(2)
        # b: two distinct days; a: five check-ins on one day
        engine.on_valid_checkin(b, 1, 0)
        engine.on_valid_checkin(b, 1, DAY_S + 10)
        for i in range(5):
            _, _, mayor = engine.on_valid_checkin(a, 1, 2 * DAY_S + i * 3700)
        assert mayor == 2  # b still leads 2 days to 1

    def test_duplicating_same_day_checkin_never_changes_mayor(self):
        rng = random.Random(8)
        base_engine, dup_engine = RewardsEngine(), RewardsEngine()
        users_a = {uid: make_user(uid) for uid in (1, 2, 3)}
        users_b = {uid: make_user(uid) for uid in (1, 2, 3)}
        t = 0
        for _ in range(120):
            uid = rng.randint(1, 3)
            t += rng.randint(1, DAY_S)
            base_engine.on_valid_checkin(users_a[uid], 1, t)
            dup_engine.on_valid_checkin(users_b[uid], 1, t)
            dup_engine.on_valid_checkin(users_b[uid], 1, t + 1)  # same-day duplicate
            assert base_engine.mayor_state(1).mayor_id == dup_engine.mayor_state(1).mayor_id

    def test_tie_keeps_incumbent(self):
        engine = RewardsEngine()
        a, b = make_user(7), make_user(2)
        for day in range(5):
            engine.on_valid_checkin(a, 1, day * DAY_S + 50)
        for day in range(5):
            _, _, mayor = engine.on_valid_checkin(b, 1, day * DAY_S + 60_000)
        assert mayor == 7  # challenger only tied, user 7 keeps the title

    def test_expired_incumbent_loses_to_active_challenger(self):
        engine = RewardsEngine()
        a, b = make_user(1), make_user(2)
        engine.on_valid_checkin(a, 1, 0)
        assert engine.mayor_state(1).mayor_id == 1
        t = 70 * DAY_S  # a's single day is now outside the window
        _, _, mayor = engine.on_valid_checkin(b, 1, t)
        assert mayor == 2

    def test_expired_incumbent_tie_breaks_to_lowest_id(self):
        engine = RewardsEngine()
        a, b, c = make_user(1), make_user(3), make_user(2)
        engine.on_valid_checkin(a, 1, 0)          # mayor: 1
        engine.on_valid_checkin(b, 1, 30 * DAY_S)  # 1 day each, incumbent ties
        engine.on_valid_checkin(c, 1, 30 * DAY_S + 4000)
        assert engine.mayor_state(1).mayor_id == 1
        # after the incumbent's day expires, 3 and 2 tie at one day: lowest id
        assert engine.recompute_mayor(1, 65 * DAY_S) == 2

    def test_fully_idle_venue_retains_mayor(self):
        engine = RewardsEngine()
        a = make_user(4)
        engine.on_valid_checkin(a, 1, 0)
        assert engine.recompute_mayor(1, 200 * DAY_S) == 4

    def test_recompute_is_idempotent_at_fixed_time(self):
        rng = random.Random(21)
        engine = RewardsEngine()
        users = {uid: make_user(uid) for uid in range(1, 6)}
        t = 0
        for _ in range(150):
            uid = rng.randint(1, 5)
            t += rng.randint(100, 2 * DAY_S)
            _, _, mayor = engine.on_valid_checkin(users[uid], 1, t)
            assert engine.recompute_mayor(1, t) == mayor
            assert engine.recompute_mayor(1, t) == mayor

    def test_distinct_day_counts_window(self):
        engine = RewardsEngine()
        a = make_user(1)
        for day in (0, 1, 2, 30):
            engine.on_valid_checkin(a, 1, day * DAY_S + 10)
        counts = engine.mayor_state(1).distinct_day_counts(90 * DAY_S)
        assert counts == {1: 1}  # only day 30 is inside (t-60d, t]
