"""Acceptance gate: one test per criterion, each recording a pass/fail line.

The lines are printed in the terminal summary (see ``conftest.py``) and,
with ``-s``, as each criterion finishes.
"""
import functools
import itertools
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import random_rates
from wlanmatch.bargaining import (
    UtilitySpec,
    fear_of_ruin,
    log1p_utility,
    nash_allocate,
    power_utility,
    saturating_utility,
)
from wlanmatch.config import RunConfig, config_from_dict, fixture_path, load_config, load_scenario
from wlanmatch.control import ControlSpec, check_single_peaked, log_chi, max_sigma_single_peaked
from wlanmatch.loadbalance import compute_quotas
from wlanmatch.mac80211 import MacConfig, coalition_worth
from wlanmatch.matching import PreferenceProfile, SharingRule, bdaa, best_rssi, build_preferences
from wlanmatch.model import Coalition, PlayerId
from wlanmatch.pipeline import dumps, generate_random, optimum_baseline, run_pipeline
from wlanmatch.stability import check_substitutable, core_matchings, partner_preference

RESULTS: dict[int, tuple[bool, str]] = {}


def record(n, ok, detail):
    RESULTS[n] = (bool(ok), detail)
    print(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


P = PlayerId.parse

TWO_USER_TABLE = [(0, (0, 1), 10.0), (0, (0,), 0.5), (0, (1,), 0.5), (1, (0,), 1.0), (2, (1,), 100.0)]

EXPECTED_TRACE = [
    ("propose", "w1", "f1"), ("propose", "w2", "f3"),
    ("counter", None, "f1"), ("counter", None, "f3"),
    ("reject", "w1", "f1"), ("accept", "w2", "f3"), ("engage", None, "f3"),
    ("counter", None, "f1"), ("reject", "w1", "f1"),
    ("propose", "w1", "f2"),
    ("counter", None, "f1"), ("counter", None, "f2"),
    ("reject", "w1", "f1"), ("accept", "w1", "f2"), ("engage", None, "f2"),
    ("prune", None, "f1"),
]


def test_criterion_01_two_user_golden_trace():
    prof = PreferenceProfile.from_explicit(2, 3, TWO_USER_TABLE)
    res = bdaa(prof)
    events = [(e["event"], e.get("user"), e["ap"]) for e in res.trace]
    cells = [(c.ap, c.users) for c in res.matching.cells]
    payoffs = tuple(prof.share(c, w) for c, w in zip(res.coalition_ids, (0, 1)))
    times = []
    for _ in range(25):
        t = time.perf_counter()
        bdaa(PreferenceProfile.from_explicit(2, 3, TWO_USER_TABLE), record_trace=True)
        times.append(time.perf_counter() - t)
    ms = float(np.median(times)) * 1e3
    ok = events == EXPECTED_TRACE and cells == [(1, (0,)), (2, (1,))] and payoffs == (1.0, 100.0) and ms < 1.0
    record(1, ok, f"trace {'exact' if events == EXPECTED_TRACE else 'differs'}, "
                  f"matching {cells}, payoffs {payoffs}, median {ms:.3f} ms")


def test_criterion_02_three_user_preferences():
    sf = load_scenario(fixture_path("three_users_two_aps"))
    cfg = load_config(fixture_path("three_users_two_aps_config"))
    rates = sf.scenario.rates
    prof, _, _ = build_preferences(rates, (2, 2), cfg.mac, ControlSpec.none())
    got = partner_preference(prof, 0)
    expected = [frozenset(P(x) for x in s) for s in
                (["f1"], ["f2"], ["w3", "f1"], ["w2", "f2"], ["w2", "f1"], ["w3", "f2"])]
    controlled, _, _ = build_preferences(rates, (2, 2), cfg.mac, ControlSpec.gaussian([3.0, 3.0], 0.3))
    ok_sub, witness = check_substitutable(partner_preference(controlled, 0))
    s, k, l, ch, ch_without = witness
    fs = lambda *xs: frozenset(P(x) for x in xs)  # noqa: E731
    witness_ok = (s == fs("w2", "w3", "f1", "f2") and (k, l) == (P("f1"), P("w3"))
                     and ch == fs("w3", "f1") and ch_without == fs("w2", "f2"))
    ok = got == expected and not ok_sub and witness_ok
    record(2, ok, f"order {'exact' if got == expected else 'differs'}; substitutability fails on "
                  f"S={sorted(map(str, s))}: Ch(S)={sorted(map(str, ch))}, "
                  f"Ch(S-{l})={sorted(map(str, ch_without))}")


@functools.lru_cache(maxsize=None)
def core_equivalence_runs(n=500):
    rng = np.random.default_rng(2024)
    mismatches, proposals = 0, []
    start = time.perf_counter()
    for i in range(n):
        W, F = int(rng.integers(3, 7)), int(rng.integers(2, 4))
        rates = random_rates(rng, W, F)
        q = compute_quotas(rates)  # caps in {2, ..., W - 1}
        sharing = [SharingRule(),
                   SharingRule("power", tuple(rng.uniform(0.2, 1, W)), tuple(rng.uniform(0.2, 1, F))),
                   SharingRule("custom")][i % 3]
        control = [ControlSpec.none(), ControlSpec.gaussian(q.qhat, 0.3), ControlSpec.gaussian(q.qhat, 1.0)][(i // 3) % 3]
        prof, _, _ = build_preferences(rates, q.caps, MacConfig(), control, sharing)
        res = bdaa(prof, record_trace=False)
        core = core_matchings(prof)
        if len(core) != 1 or core[0] != res.matching:
            mismatches += 1
        proposals.append((res.proposal_count, F, W))
    return mismatches, proposals, time.perf_counter() - start


def test_criterion_03_core_equivalence():
    mismatches, proposals, secs = core_equivalence_runs()
    n = len(proposals)
    record(3, mismatches == 0 and n >= 500 and secs < 60,
           f"{n - mismatches}/{n} instances equal the unique core, {secs:.1f} s")


def test_criterion_04_bargaining_numerics():
    rng = np.random.default_rng(7)
    worst_for, worst_power, draws = 0.0, 0.0, 0
    while draws < 1000:
        n = int(rng.integers(2, 5))
        worth = float(10 ** rng.uniform(-2, 3))
        utils = []
        for _ in range(n):
            kind = rng.integers(3)
            utils.append(log1p_utility() if kind == 0 else
                         saturating_utility(float(rng.uniform(0.05, 5))) if kind == 1 else
                         power_utility(float(rng.uniform(0.1, 1))))
        if any(u.du(worth) <= 0 for u in utils):  # marginal utility underflows
            continue
        out = nash_allocate(worth, n, UtilitySpec("custom", custom=tuple(utils)))
        fors = np.array([fear_of_ruin(s, u) for s, u in zip(out.shares, utils)])
        worst_for = max(worst_for, fors.max() / fors.min() - 1)
        alphas = rng.uniform(0.1, 1, n)
        closed = nash_allocate(worth, n, UtilitySpec.power(alphas))
        solved = nash_allocate(worth, n, UtilitySpec("custom", custom=tuple(power_utility(a) for a in alphas)))
        worst_power = max(worst_power, float(np.max(np.abs(np.array(solved.shares) / closed.shares - 1))))
        draws += 1
    grid_ok, steps = 0, 200
    cases = 10
    for seed in range(cases):
        r = np.random.default_rng(100 + seed)
        utils = [log1p_utility(), saturating_utility(float(r.uniform(0.1, 2))), power_utility(float(r.uniform(0.2, 1)))]
        worth = float(r.uniform(1, 20))
        h = worth / steps
        best, arg = -math.inf, None
        for i, j in itertools.product(range(1, steps), repeat=2):
            k = steps - i - j
            if k >= 1:
                val = sum(math.log(u.u(x * h)) for u, x in zip(utils, (i, j, k)))
                if val > best:
                    best, arg = val, np.array([i, j, k]) * h
        out = nash_allocate(worth, 3, UtilitySpec("custom", custom=tuple(utils)))
        grid_ok += np.max(np.abs(np.array(out.shares) - arg)) <= 2 * h
    ok = worst_for <= 1e-9 and worst_power <= 1e-9 and grid_ok == cases
    record(4, ok, f"max FoR spread {worst_for:.1e} over {draws} draws, power solver vs closed form "
                  f"{worst_power:.1e}, grid oracle {grid_ok}/{cases} within 2 steps")


@functools.lru_cache(maxsize=None)
def uncontrolled_runs(n=100):
    out = []
    for seed in range(n):
        # a 75 m square keeps every user within the outer ring of every AP
        sc = generate_random(20, 5, 75.0, seed=seed)
        rates = sc.rates
        assert np.all(rates.theta > 0)
        q = compute_quotas(rates)
        prof, _, _ = build_preferences(rates, q.caps, control=ControlSpec.none())
        res = bdaa(prof, record_trace=False)
        one_to_one = len(res.matching.cells) == 5 and all(len(c.users) == 1 for c in res.matching.cells)
        out.append((one_to_one, res.proposal_count, 5, 20))
    return out


def test_criterion_05_uncontrolled_one_to_one():
    runs = uncontrolled_runs()
    good = sum(r[0] for r in runs)
    record(5, good == len(runs), f"{good}/{len(runs)} instances one-to-one")


@functools.lru_cache(maxsize=None)
def campus_controlled():
    sc = load_scenario(fixture_path("campus")).scenario
    cfg = config_from_dict({"control": {"family": "gaussian", "sigma": 0.2}})
    return sc, run_pipeline(sc, cfg)


def test_criterion_06_control_efficacy():
    sc, rep = campus_controlled()
    q = compute_quotas(sc.rates)
    sizes = {c.ap: len(c.users) + 1 for c in rep.matching.cells}
    within = all(abs(sizes[f] - q.caps[f]) <= 1 for f in sizes)
    prof, base, _ = build_preferences(sc.rates, q.caps, control=ControlSpec.none())
    fam = prof.family
    certified = []
    for f in range(sc.n_aps):
        blk = fam.by_ap[f]
        sigma = max_sigma_single_peaked(base[blk], fam.sizes[blk], q.qhat[f])
        lf = ControlSpec.gaussian(q.qhat, sigma).log_factor(f, fam.sizes[blk])
        ok_f, _ = check_single_peaked(fam.sizes[blk], log_chi(base[blk], fam.sizes[blk], lf), q.qhat[f])
        certified.append((round(sigma, 3), ok_f))
    ok = rep.unemployment_rate <= 0.10 and within and all(c for _, c in certified)
    record(6, ok, f"unemployment {rep.unemployment_rate:.0%}, sizes {[sizes[f] for f in sorted(sizes)]} "
                  f"vs caps {list(q.caps)}, certified max sigma per AP {[s for s, _ in certified]}")


def test_criterion_07_proposal_bound():
    runs = [(p, F, W) for p, F, W in core_equivalence_runs()[1]]
    runs += [(p, F, W) for _, p, F, W in uncontrolled_runs()]
    runs.append((campus_controlled()[1].proposal_count, 5, 20))
    hard = all(p <= F**3 * W**2 for p, F, W in runs)
    soft = float(np.mean([p <= 5 * F * W for p, F, W in runs]))
    record(7, hard and soft >= 0.95,
           f"{len(runs)} runs, all within F^3 W^2: {hard}; within 5FW on {soft:.1%}")


def test_criterion_08_welfare_ratio():
    rng = np.random.default_rng(8)
    ratios = []
    for i in range(100):
        W, F = int(rng.integers(4, 11)), int(rng.integers(2, 4))
        sc = generate_random(W, F, 200.0, seed=5000 + i)
        rep = run_pipeline(sc)
        opt, _ = optimum_baseline(sc, RunConfig())
        if opt["welfare_modified"] > 0:
            ratios.append(rep.welfare_modified / opt["welfare_modified"])
    ratios = np.array(ratios)
    share = float(np.mean(ratios >= 0.9))
    record(8, share >= 0.8 and np.all(ratios <= 1 + 1e-12),
           f"{share:.0%} of {len(ratios)} instances reach 90% of the optimum; mean ratio {ratios.mean():.3f}, "
           f"optimum hit on {np.mean(ratios >= 1 - 1e-12):.0%}")


def test_criterion_09_anomaly_reduction():
    sc = load_scenario(fixture_path("congested")).scenario
    rates = sc.rates
    rssi = best_rssi(sc)
    congested = max(rssi.cells, key=lambda c: len(c.users))
    before = coalition_worth(congested, rates).per_member[0]
    rep = run_pipeline(sc)
    after = {}
    for cell in rep.cells:
        for w in cell.users:
            after[w] = cell.shares_mac[f"w{w + 1}"]
    factors = [after.get(w, 0.0) / before for w in congested.users]
    record(9, min(factors) >= 2.0,
           f"{len(congested.users)} users of f{congested.ap + 1}: {before / 1e3:.0f} kbit/s each under best-RSSI, "
           f"min {min(after.get(w, 0.0) for w in congested.users) / 1e3:.0f} kbit/s under the mechanism "
           f"(factor {min(factors):.2f})")


def test_criterion_10_determinism(tmp_path):
    env = dict(os.environ)
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"control": {"family": "gaussian", "sigma": 0.2}}')
    outputs = []
    for _ in range(2):
        gen = subprocess.run([sys.executable, "-m", "wlanmatch.cli", "generate", "--seed", "17",
                              "--users", "20", "--campus-layout"], capture_output=True, env=env, check=True)
        sc = tmp_path / "sc.json"
        sc.write_bytes(gen.stdout)
        run = subprocess.run([sys.executable, "-m", "wlanmatch.cli", "run", "--scenario", str(sc),
                              "--config", str(cfg)], capture_output=True, env=env, check=True)
        outputs.append((gen.stdout, run.stdout))
    same = outputs[0] == outputs[1]
    in_process = dumps(run_pipeline(generate_random(20, 5, seed=17, campus_layout=True),
                                    load_config(cfg)).to_json()).encode()
    record(10, same and in_process == outputs[0][1],
           f"two CLI runs byte-identical: {same}; matches in-process run: {in_process == outputs[0][1]}")
