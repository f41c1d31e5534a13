"""Command line front end.

Subcommands: generate, run, attack-plan, attack-exec, detect, verify-replay,
export. Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analytics
from .anticheat import RuleConfig, offline_verdicts
from .attacker import (
    TargetCriteria,
    build_schedule,
    execute,
    load_schedule,
    plan_step,
    plan_tour,
    save_schedule,
    select_targets,
)
from .geo import GeoPoint
from .harness import (
    InvalidConfig,
    generate_population,
    load_scenario,
    run_scenario,
    venue_index,
)
from .tables import MissingTables, load_events, load_tables
from .world import PRESENCE_UNVERIFIED, World


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage errors are 1
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _point(text: str) -> GeoPoint:
    try:
        lat, lon = (float(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected LAT,LON, got {text!r}") from exc
    return GeoPoint(lat, lon)


def build_parser() -> _Parser:
    parser = _Parser(prog="checkinsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a population and export it")
    p.add_argument("--config", required=True, help="scenario or population JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--snapshot", action="store_true", help="also write world.snap")

    p = sub.add_parser("run", help="run a full scenario (attacks, exports, detection)")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("attack-plan", help="plan a check-in schedule")
    p.add_argument("--snapshot", required=True, help="world snapshot to plan against")
    p.add_argument("--out", required=True, help="schedule JSONL to write")
    p.add_argument("--mode", choices=("tour", "targets", "step"), default="tour")
    p.add_argument("--start", type=_point, help="tour start as LAT,LON")
    p.add_argument("--steps", type=int, default=25)
    p.add_argument("--step-deg", type=float, default=0.005)
    p.add_argument("--start-time", type=int, default=None)
    p.add_argument("--require-special", action="store_true")
    p.add_argument("--vacant", action="store_true")
    p.add_argument("--name-filter", default=None)
    p.add_argument("--limit", type=int, default=100)
    p.add_argument("--at", type=_point, help="current position for step mode")
    p.add_argument("--bearing", type=float, default=0.0)
    p.add_argument("--distance-m", type=float, default=457.2)

    p = sub.add_parser("attack-exec", help="execute a schedule against a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--true-location", type=_point, required=True)
    p.add_argument("--out", required=True, help="directory for updated exports")

    p = sub.add_parser("detect", help="run the offline detectors over exports")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--events", default=None, help="events.jsonl (default: <in>/events.jsonl)")

    p = sub.add_parser("verify-replay", help="recheck a log against the rules offline")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--events", default=None)

    p = sub.add_parser("export", help="write public exports from a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--out", required=True)
    return parser


def _cmd_generate(args) -> int:
    scenario = load_scenario(args.config)
    world = World(rule_config=scenario.rules, badge_catalog=scenario.badges,
                  seed=args.seed if args.seed is not None else scenario.population.seed)
    population = scenario.population
    if args.seed is not None:
        import dataclasses

        population = dataclasses.replace(population, seed=args.seed)
    generate_population(population, world)
    out = Path(args.out)
    world.export_public_profiles(out)
    world.export_events(out / "events.jsonl")
    if args.snapshot:
        world.save_state(out / "world.snap")
    print(f"generated {len(world.users)} users, {len(world.venues)} venues, "
          f"{len(world.events)} check-ins -> {out}")
    return 0


def _cmd_run(args) -> int:
    scenario = load_scenario(args.config)
    result = run_scenario(scenario, args.out, seed=args.seed)
    detector = result.metrics["detector"]
    print(f"scenario complete: {result.metrics['valid_checkins']} valid / "
          f"{result.metrics['total_checkins']} check-ins, "
          f"{result.metrics['mayors_count']} mayors, flagged {detector['flagged']}")
    return 0


def _cmd_attack_plan(args) -> int:
    world = World.load_state(args.snapshot)
    index = venue_index(world)
    if args.mode == "step":
        if args.at is None:
            raise InvalidConfig("step mode needs --at LAT,LON")
        venue_id = plan_step(args.at, args.bearing, args.distance_m, index)
        venue = world.venue(venue_id)
        print(f"{venue_id}\t{venue.location.lat}\t{venue.location.lon}\t{venue.name}")
        schedule = build_schedule([(venue_id, venue.location)],
                                  args.start_time if args.start_time is not None else world.clock.now + 600)
    elif args.mode == "tour":
        if args.start is None:
            raise InvalidConfig("tour mode needs --start LAT,LON")
        venue_ids = plan_tour(index, args.start, args.steps, step_deg=args.step_deg)
        for vid in venue_ids:
            venue = world.venue(vid)
            print(f"{vid}\t{venue.location.lat}\t{venue.location.lon}\t{venue.name}")
        schedule = build_schedule([(vid, world.venue(vid).location) for vid in venue_ids],
                                  args.start_time if args.start_time is not None else world.clock.now + 600)
    else:  # targets
        criteria = TargetCriteria(require_mayor_special=args.require_special,
                                  require_vacant_mayor=args.vacant,
                                  name_filter=args.name_filter)
        venue_ids = select_targets(world.venues, criteria)[: args.limit]
        if not venue_ids:
            print("no venues match the criteria", file=sys.stderr)
            return 2
        schedule = build_schedule([(vid, world.venue(vid).location) for vid in venue_ids],
                                  args.start_time if args.start_time is not None else world.clock.now + 600)
    save_schedule(schedule, args.out)
    print(f"schedule with {len(schedule.entries)} check-ins -> {args.out}")
    return 0


def _cmd_attack_exec(args) -> int:
    world = World.load_state(args.snapshot)
    schedule = load_schedule(args.schedule)
    attacker_id = world.register_user(args.true_location, is_cheater=True)
    records = execute(world, attacker_id, schedule, args.true_location)
    out = Path(args.out)
    world.export_public_profiles(out)
    world.export_events(out / "events.jsonl")
    world.save_state(out / "world.snap")
    valid = sum(1 for r in records if r.accepted)
    print(f"attacker {attacker_id}: {valid}/{len(records)} check-ins valid, "
          f"{world.user(attacker_id).points} points, "
          f"{world.user(attacker_id).total_mayorships} mayorships")
    return 0


def _cmd_detect(args) -> int:
    tables = load_tables(args.in_dir)
    events_path = args.events or (Path(args.in_dir) / "events.jsonl")
    events = load_events(events_path) if Path(events_path).is_file() else []
    report = analytics.build_report(tables, events)
    analytics.write_report_csv(report, args.out)
    flagged = sum(1 for r in report if r.suspicious)
    print(f"report for {len(report)} users, {flagged} flagged -> {args.out}")
    return 0


def _cmd_verify_replay(args) -> int:
    tables = load_tables(args.in_dir)
    events_path = args.events or (Path(args.in_dir) / "events.jsonl")
    events = load_events(events_path)
    config = RuleConfig()
    by_user: dict[int, list] = {}
    order: dict[int, list[int]] = {}
    for i, e in enumerate(events):
        venue = tables.venues[e.venue_id]
        by_user.setdefault(e.user_id, []).append(
            (e.t, e.venue_id, venue.location, GeoPoint(e.reported_lat, e.reported_lon)))
        order.setdefault(e.user_id, []).append(i)
    mismatches = 0
    for user_id, trace in by_user.items():
        recorded = [events[i] for i in order[user_id]]
        verdicts = offline_verdicts(trace, config, prior_valid=[e.valid for e in recorded])
        for e, verdict in zip(recorded, verdicts):
            rule_flags = set(e.flags) - {PRESENCE_UNVERIFIED}
            if rule_flags != {f.value for f in verdict.flags}:
                mismatches += 1
                print(f"mismatch: user {user_id} t={e.t} venue {e.venue_id}: "
                      f"logged {sorted(rule_flags)} recomputed {verdict.flag_names()}",
                      file=sys.stderr)
    print(f"verify-replay: {len(events)} events, {mismatches} mismatches")
    return 0 if mismatches == 0 else 2


def _cmd_export(args) -> int:
    world = World.load_state(args.snapshot)
    out = Path(args.out)
    world.export_public_profiles(out)
    world.export_events(out / "events.jsonl")
    print(f"exports written to {out}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "run": _cmd_run,
    "attack-plan": _cmd_attack_plan,
    "attack-exec": _cmd_attack_exec,
    "detect": _cmd_detect,
    "verify-replay": _cmd_verify_replay,
    "export": _cmd_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InvalidConfig, MissingTables) as exc:
        print(f"checkinsim: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"checkinsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
