"""End-to-end runs: load balancing, control, preferences, matching, MAC payoffs.

Reports serialize deterministically (sorted keys, no timestamps); wall-clock
time is only included on request since it differs between identical runs.
"""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .config import ExplicitProfile, RunConfig, ScenarioFile, scenario_to_dict
from .loadbalance import compute_quotas
from .mac80211 import coalition_worth
from .matching import (
    MAX_EXHAUSTIVE_USERS,
    BdaaResult,
    Matching,
    PreferenceProfile,
    bdaa,
    best_rssi,
    build_preferences,
    exhaustive_optimum,
)
from .model import QuotaVector, Scenario, ap_label, user_label

CAMPUS_APS = ((120.0, 450.0), (650.0, 450.0), (400.0, 180.0), (520.0, 300.0), (560.0, 150.0))
CAMPUS_AREA = (800.0, 600.0)


@dataclass
class CellReport:
    ap: int
    users: tuple[int, ...]
    worth: float | None  # v(C), bit/s; None for explicit profiles
    modified_worth: float | None
    shares_modified: dict[str, float]
    shares_mac: dict[str, float] | None

    def to_json(self) -> dict:
        return {
            "ap": ap_label(self.ap),
            "users": [user_label(w) for w in self.users],
            "v": self.worth,
            "v_modified": self.modified_worth,
            "shares_modified": self.shares_modified,
            "shares_mac": self.shares_mac,
        }


@dataclass
class RunReport:
    matching: Matching
    cells: list[CellReport]
    unemployment_rate: float
    welfare_modified: float
    welfare_mac: float | None
    proposal_count: int
    qhat: tuple[float, ...] = ()
    caps: tuple[int, ...] = ()
    wall_time: float | None = None
    trace: list[dict] | None = None

    def to_json(self) -> dict:
        d: dict[str, Any] = {
            "matching": self.matching.to_json(),
            "cells": [c.to_json() for c in self.cells],
            "unemployment_rate": self.unemployment_rate,
            "welfare_modified": self.welfare_modified,
            "welfare_mac": self.welfare_mac,
            "proposal_count": self.proposal_count,
            "qhat": list(self.qhat),
            "caps": list(self.caps),
        }
        if self.wall_time is not None:
            d["wall_time"] = self.wall_time
        if self.trace is not None:
            d["trace"] = self.trace
        return d


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def resolve_quotas(scenario: Scenario, config: RunConfig) -> QuotaVector:
    q = compute_quotas(scenario.rates, config.loadbalance)
    caps = list(q.caps)
    if scenario.ap_quota is not None:
        caps = [c if s is None else int(s) for c, s in zip(caps, scenario.ap_quota)]
    if config.caps is not None:
        if len(config.caps) != scenario.n_aps:
            raise ValueError("quota.caps needs one value per AP")
        caps = list(config.caps)
    return QuotaVector(q.qhat, tuple(caps))


def _explicit_run(prof: ExplicitProfile, record_trace: bool) -> tuple[PreferenceProfile, BdaaResult]:
    profile = PreferenceProfile.from_explicit(prof.n_users, prof.n_aps, prof.entries)
    return profile, bdaa(profile, record_trace=record_trace)


def _shares(profile: PreferenceProfile, c: int) -> dict[str, float]:
    fam = profile.family
    out = {user_label(w): profile.share(c, w) for w in fam.users(c)}
    out[ap_label(int(fam.ap[c]))] = float(profile.ap_shares[c])
    return out


def run_pipeline(source: Scenario | ScenarioFile, config: RunConfig | None = None, *,
                 record_trace: bool = False, timing: bool = False, impl=None) -> RunReport:
    """Quotas, control, preferences, BDAA, then MAC payoffs of the formed cells."""
    config = config or RunConfig()
    sf = source if isinstance(source, ScenarioFile) else ScenarioFile(source)
    start = time.perf_counter()
    if sf.profile is not None:
        profile, res = _explicit_run(sf.profile, record_trace)
        cells = []
        for c in res.coalition_ids:
            sh = _shares(profile, c)
            cells.append(CellReport(int(profile.family.ap[c]), profile.family.users(c), None, None, sh, None))
        welfare_mod = float(sum(sum(v for k, v in c.shares_modified.items() if k.startswith("w")) for c in cells))
        return _finish(res, cells, welfare_mod, None, (), (), start, timing, record_trace)
    sc = sf.scenario
    rates = sc.rates
    quotas = resolve_quotas(sc, config)
    control = config.control_for(quotas.qhat)
    profile, base, mod = build_preferences(rates, quotas.caps, config.mac, control, config.sharing, impl=impl)
    res = bdaa(profile, record_trace=record_trace, impl=impl)
    cells = []
    for c in res.coalition_ids:
        coal = profile.family.coalition(c)
        cw = coalition_worth(coal, rates, config.mac)
        labels = [user_label(w) for w in coal.users] + [ap_label(coal.ap)]
        cells.append(CellReport(coal.ap, coal.users, float(base[c]), float(mod[c]), _shares(profile, c),
                                {k: float(x) for k, x in zip(labels, cw.per_member)}))
    welfare_mod = float(sum(c.modified_worth for c in cells))
    welfare_mac = float(sum(c.worth for c in cells))
    return _finish(res, cells, welfare_mod, welfare_mac, quotas.qhat, quotas.caps, start, timing, record_trace)


def _finish(res, cells, welfare_mod, welfare_mac, qhat, caps, start, timing, record_trace) -> RunReport:
    m = res.matching
    rate = len(m.unmatched) / m.n_users if m.n_users else 0.0
    return RunReport(m, cells, rate, welfare_mod, welfare_mac, res.proposal_count, tuple(qhat), tuple(caps),
                     time.perf_counter() - start if timing else None, res.trace if record_trace else None)


def generate_random(n_users: int, n_aps: int, area: float | Sequence[float] = CAMPUS_AREA,
                    seed: int = 0, campus_layout: bool = False) -> Scenario:
    """Users (and APs unless the campus layout is requested) uniform in the area."""
    if n_users < 0 or n_aps < 0:
        raise ValueError("counts must be nonnegative")
    w, h = (float(area), float(area)) if np.isscalar(area) else (float(area[0]), float(area[1]))
    if not (w > 0 and h > 0):
        raise ValueError("area must be positive")
    rng = np.random.default_rng(seed)
    if campus_layout:
        if n_aps not in (0, len(CAMPUS_APS)):
            raise ValueError(f"the campus layout has {len(CAMPUS_APS)} APs")
        aps = np.array(CAMPUS_APS)
    else:
        aps = rng.uniform((0, 0), (w, h), size=(n_aps, 2))
    users = rng.uniform((0, 0), (w, h), size=(n_users, 2))
    return Scenario(np.round(users, 3), np.round(aps, 3), name=f"random-{seed}")


def scenario_json(sc: Scenario) -> str:
    return dumps(scenario_to_dict(sc))


@dataclass
class Comparison:
    bdaa: RunReport
    rssi_cells: list[dict]
    rssi_welfare_mac: float
    rssi_unemployment: float
    optimum: dict | None
    warning: str | None = None

    def to_json(self) -> dict:
        return {
            "bdaa": self.bdaa.to_json(),
            "best_rssi": {"cells": self.rssi_cells, "welfare_mac": self.rssi_welfare_mac,
                          "unemployment_rate": self.rssi_unemployment},
            "optimum": self.optimum,
            "warning": self.warning,
        }


def optimum_baseline(sc: Scenario, config: RunConfig, impl=None):
    """Welfare-maximising matching under the modified worths, or a skip warning."""
    if sc.n_users > MAX_EXHAUSTIVE_USERS:
        return None, f"exhaustive optimum skipped: {sc.n_users} users exceeds {MAX_EXHAUSTIVE_USERS}"
    quotas = resolve_quotas(sc, config)
    profile, base, mod = build_preferences(sc.rates, quotas.caps, config.mac,
                                           config.control_for(quotas.qhat), config.sharing, impl=impl)
    m, welfare = exhaustive_optimum(profile.family, mod)
    idx = profile.family.index()
    mac = float(sum(base[idx[(c.ap, c.mask)]] for c in m.cells))
    return {"matching": m.to_json(), "welfare_modified": float(welfare), "welfare_mac": mac}, None


def compare(sc: Scenario, config: RunConfig | None = None, impl=None) -> Comparison:
    config = config or RunConfig()
    rep = run_pipeline(sc, config, impl=impl)
    rates = sc.rates
    rssi = best_rssi(sc)
    cells = []
    total = 0.0
    for c in rssi.cells:
        cw = coalition_worth(c, rates, config.mac)
        total += cw.v
        cells.append({"ap": ap_label(c.ap), "users": [user_label(w) for w in c.users], "v": float(cw.v),
                      "per_user": float(cw.per_member[0]) if c.users else 0.0})
    unemp = len(rssi.unmatched) / sc.n_users if sc.n_users else 0.0
    opt, warn = optimum_baseline(sc, config, impl)
    return Comparison(rep, cells, float(total), unemp, opt, warn)


SWEEP_FIELDS = ("run", "seed", "unemployment_rate", "welfare_modified", "welfare_mac", "proposal_count",
                "ratio_modified", "ratio_mac")


@dataclass
class SweepResult:
    rows: list[dict]
    summary: dict[str, dict[str, float]] = field(default_factory=dict)
    warning: str | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
        wr.writeheader()
        for r in self.rows:
            wr.writerow({k: _fmt(r.get(k)) for k in SWEEP_FIELDS})
        for stat in ("mean", "std"):
            row = {"run": stat, "seed": ""}
            row.update({k: _fmt(self.summary.get(k, {}).get(stat)) for k in SWEEP_FIELDS[2:]})
            wr.writerow(row)
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"rows": self.rows, "summary": self.summary, "warning": self.warning}


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return x


def _sweep_one(args) -> dict:
    i, seed, n_users, n_aps, area, layout, cfg = args
    sc = generate_random(n_users, n_aps, area, seed, layout)
    rep = run_pipeline(sc, cfg)
    row = {"run": i, "seed": seed, "unemployment_rate": rep.unemployment_rate,
           "welfare_modified": rep.welfare_modified, "welfare_mac": rep.welfare_mac,
           "proposal_count": rep.proposal_count, "ratio_modified": None, "ratio_mac": None}
    opt, _ = optimum_baseline(sc, cfg)
    if opt is not None:
        if opt["welfare_modified"] > 0:
            row["ratio_modified"] = rep.welfare_modified / opt["welfare_modified"]
        if opt["welfare_mac"] > 0:
            row["ratio_mac"] = rep.welfare_mac / opt["welfare_mac"]
    return row


def sweep(config: RunConfig | None, n_runs: int, *, n_users: int = 20, n_aps: int = 5,
          area: float | Sequence[float] = CAMPUS_AREA, seed: int = 0, campus_layout: bool = False,
          workers: int | None = None) -> SweepResult:
    """``n_runs`` independent random scenarios with seeds ``seed, seed + 1, ...``.

    ``ratio_modified`` divides the modified welfare by the exhaustive modified
    optimum; ``ratio_mac`` divides the MAC welfare by the unmodified welfare of
    that optimal matching, so it can exceed one.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    config = config or RunConfig()
    jobs = [(i, seed + i, n_users, n_aps, area, campus_layout, config) for i in range(n_runs)]
    if workers == 1 or n_runs == 1:
        rows = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_one, jobs))
    summary = {}
    for k in SWEEP_FIELDS[2:]:
        vals = [r[k] for r in rows if r[k] is not None]
        if vals:
            summary[k] = {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
    warning = None
    if n_users > MAX_EXHAUSTIVE_USERS:
        warning = f"exhaustive ratios skipped: {n_users} users exceeds {MAX_EXHAUSTIVE_USERS}"
    return SweepResult(rows, summary, warning)

