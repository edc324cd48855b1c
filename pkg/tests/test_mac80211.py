import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from wlanmatch.mac80211 import (
    DEFAULT_TABLES,
    FlowSpec,
    MacConfig,
    WorthTable,
    attempt_rate,
    backoff_response,
    cell_throughput,
    coalition_worth,
    select_mac,
    time_fair_allocation,
)
from wlanmatch.model import MBPS, Coalition, CoalitionFamily, RateMatrix

TAB_B = DEFAULT_TABLES["802.11b"]
TAB_N = DEFAULT_TABLES["802.11n"]


def test_attempt_rate_golden():
    # frozen from an independent mpmath findroot at 40 digits
    assert attempt_rate(TAB_N, 1) == 0.0625
    assert attempt_rate(TAB_N, 2) == pytest.approx(0.058686468768266547239, rel=1e-10)
    assert attempt_rate(TAB_N, 3) == pytest.approx(0.055435326294956427377, rel=1e-10)
    assert attempt_rate(TAB_N, 10) == pytest.approx(0.043050349629945582327, rel=1e-10)


@given(st.integers(2, 30))
def test_attempt_rate_matches_mpmath(n):
    mp.mp.dps = 30

    def g(gamma):
        k = range(TAB_N.max_retries + 1)
        return sum(gamma**i for i in k) / sum(gamma**i * TAB_N.backoff_mult**i * TAB_N.b0 for i in k)

    ref = mp.findroot(lambda b: b - g(1 - (1 - b) ** (n - 1)), 0.05)
    assert attempt_rate(TAB_N, n) == pytest.approx(float(ref), rel=1e-10)


def test_attempt_rate_decreases_with_contention():
    betas = [attempt_rate(TAB_N, n) for n in range(1, 15)]
    assert all(a > b for a, b in zip(betas, betas[1:]))


def test_backoff_response_is_inverse_mean_window():
    assert backoff_response(TAB_N, 0.0) == 1 / 16


def test_two_station_b_cell_golden():
    # {f, w} both at 11 Mbit/s on the b table, oracle evaluated in mpmath
    cell = cell_throughput([11 * MBPS, 11 * MBPS], TAB_B)
    assert cell.v == pytest.approx(3978523.1399098222231, rel=1e-10)
    assert cell.per_member[0] == pytest.approx(cell.per_member[1])


def test_single_uplink_station_golden():
    cell = cell_throughput([54 * MBPS], TAB_N)
    assert cell.v == pytest.approx(23798921.152301159187, rel=1e-10)


def test_slow_station_drags_everyone_down():
    fast = cell_throughput([300 * MBPS, 300 * MBPS], TAB_N).per_member[0]
    mixed = cell_throughput([300 * MBPS, 11 * MBPS], TAB_N)
    assert mixed.per_member[0] == pytest.approx(mixed.per_member[1])
    assert mixed.per_member[0] < fast / 3


@given(st.lists(st.sampled_from([300, 54, 11]), min_size=1, max_size=5))
def test_equal_packets_give_equal_shares(rates):
    cell = cell_throughput([r * MBPS for r in rates], TAB_N)
    assert cell.v == pytest.approx(sum(cell.per_member))
    assert max(cell.per_member) == pytest.approx(min(cell.per_member))


def test_shares_proportional_to_bits_per_attempt():
    flows = [FlowSpec(((1.0, 8192.0),)), FlowSpec(((1.0, 4096.0),))]
    cell = cell_throughput([54 * MBPS, 54 * MBPS], TAB_N, flows)
    assert cell.per_member[0] / cell.per_member[1] == pytest.approx(2.0)


def test_flow_spec_validation():
    with pytest.raises(ValueError):
        FlowSpec(((0.5, 100.0),))
    assert FlowSpec(((0.5, 100.0), (0.5, 300.0))).bits == 200.0


def test_mac_selection_uses_lowest_member_rate():
    assert select_mac(DEFAULT_TABLES, [300 * MBPS, 54 * MBPS]).name == "802.11g"
    assert select_mac(DEFAULT_TABLES, [300 * MBPS]).name == "802.11n"
    with pytest.raises(ValueError):
        select_mac(DEFAULT_TABLES, [1 * MBPS])
    with pytest.raises(ValueError):
        select_mac(DEFAULT_TABLES, [])


def test_coalition_worth_orders_users_then_ap():
    r = RateMatrix(np.array([[300 * MBPS], [300 * MBPS]]))
    cw = coalition_worth(Coalition(0, (0, 1)), r)
    assert len(cw.per_member) == 3
    up = coalition_worth(Coalition(0, (0, 1)), r, MacConfig(downlink=False))
    assert up.per_member[-1] == 0.0
    assert coalition_worth(Coalition(None, (0,)), r).v == 0.0


def test_coalition_worth_rejects_uncovered_user():
    r = RateMatrix(np.array([[0.0], [300 * MBPS]]))
    with pytest.raises(ValueError):
        coalition_worth(Coalition(0, (0, 1)), r)


def test_time_fair_allocation():
    r = RateMatrix(np.array([[300 * MBPS], [11 * MBPS]]))
    out = time_fair_allocation(Coalition(0, (0, 1)), r)
    assert out[0] == (0.5, 150 * MBPS)
    assert out[1] == (0.5, 5.5 * MBPS)


def test_fixed_beta_override():
    cell = cell_throughput([54 * MBPS] * 3, TAB_N, beta_fixed=0.01)
    assert cell.beta == 0.01


@pytest.mark.parametrize("downlink", [True, False])
@pytest.mark.parametrize("policy", ["lowest-rate", "fixed"])
def test_worth_table_matches_scalar(impl, downlink, policy):
    rng = np.random.default_rng(11)
    r = RateMatrix(rng.choice([0.0, 11 * MBPS, 54 * MBPS, 300 * MBPS], size=(6, 3)))
    cfg = MacConfig(policy=policy, fixed="802.11g" if policy == "fixed" else None, downlink=downlink)
    fam = CoalitionFamily.build(r, (3, 4, 2))
    vec = WorthTable(r, cfg, impl=impl).worths(fam)
    scalar = np.array([coalition_worth(c, r, cfg).v for c in fam])
    np.testing.assert_allclose(vec, scalar, rtol=1e-12)
    assert math.isfinite(vec.sum())
