"""Command-line entry point: ``wlanmatch {generate,run,sweep,check-stability,compare}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config, load_scenario
from .matching import PreferenceProfile, bdaa, build_preferences
from .pipeline import compare, dumps, generate_random, resolve_quotas, run_pipeline, scenario_json, sweep
from .stability import stability_report


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _area(values):
    return values[0] if len(values) == 1 else tuple(values)


def cmd_generate(args) -> int:
    sc = generate_random(args.users, args.aps, _area(args.area), args.seed, args.campus_layout)
    _write(scenario_json(sc), args.out)
    return 0


def cmd_run(args) -> int:
    rep = run_pipeline(load_scenario(args.scenario), load_config(args.config),
                       record_trace=args.trace, timing=args.timing)
    _write(dumps(rep.to_json()), args.out)
    return 0


def cmd_sweep(args) -> int:
    res = sweep(load_config(args.config), args.runs, n_users=args.users, n_aps=args.aps,
                area=_area(args.area), seed=args.seed, campus_layout=args.campus_layout,
                workers=args.workers)
    if res.warning:
        print(f"warning: {res.warning}", file=sys.stderr)
    _write(res.to_csv() if args.format == "csv" else dumps(res.to_json()), args.out)
    return 0


def cmd_check_stability(args) -> int:
    sf = load_scenario(args.scenario)
    cfg = load_config(args.config)
    if sf.profile is not None:
        p = sf.profile
        profile = PreferenceProfile.from_explicit(p.n_users, p.n_aps, p.entries)
    else:
        q = resolve_quotas(sf.scenario, cfg)
        profile, _, _ = build_preferences(sf.scenario.rates, q.caps, cfg.mac, cfg.control_for(q.qhat), cfg.sharing)
    mu = bdaa(profile, record_trace=False).matching
    _write(dumps(stability_report(mu, profile).to_json()), args.out)
    return 0


def cmd_compare(args) -> int:
    sf = load_scenario(args.scenario)
    if sf.profile is not None:
        raise ConfigError("compare needs a geometric or rate-based scenario")
    res = compare(sf.scenario, load_config(args.config))
    if res.warning:
        print(f"warning: {res.warning}", file=sys.stderr)
    _write(dumps(res.to_json()), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wlanmatch", description="Controlled AP-user matching for WLANs.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", required=True, help="scenario JSON")
        sp.add_argument("--config", help="run configuration JSON")
        sp.add_argument("--out", help="output path (default stdout)")

    def random_args(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--users", type=int, default=20)
        sp.add_argument("--aps", type=int, default=5)
        sp.add_argument("--area", type=float, nargs="+", default=[800.0, 600.0], help="side, or width height (m)")
        sp.add_argument("--campus-layout", action="store_true",
                        help="use the five fixed AP positions of the campus fixture")

    g = sub.add_parser("generate", help="write a random scenario")
    random_args(g)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run the mechanism on a scenario")
    common(r)
    r.add_argument("--trace", action="store_true", help="include the BDAA event trace")
    r.add_argument("--timing", action="store_true", help="include wall-clock time")
    r.add_argument("--format", choices=["json"], default="json")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="aggregate statistics over seeded random scenarios")
    common(s, scenario=False)
    random_args(s)
    s.add_argument("--runs", type=int, default=50)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--format", choices=["json", "csv"], default="csv")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("check-stability", help="stability report of the BDAA matching")
    common(c)
    c.set_defaults(func=cmd_check_stability)

    m = sub.add_parser("compare", help="BDAA vs best-RSSI vs exhaustive optimum")
    common(m)
    m.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, RuntimeError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
