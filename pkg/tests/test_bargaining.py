import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from wlanmatch.bargaining import (
    CustomUtility,
    UtilitySpec,
    check_utility,
    chi_vector,
    fear_of_ruin,
    log1p_utility,
    nash_allocate,
    power_utility,
    saturating_utility,
)

utility_st = st.one_of(
    st.just(log1p_utility()),
    st.floats(0.05, 5.0).map(saturating_utility),
    st.floats(0.1, 1.0).map(power_utility),
)


def spread(values):
    values = np.asarray(values)
    return values.max() / values.min() - 1


def test_identity_split():
    out = nash_allocate(1.0, 2)
    assert out.shares == (0.5, 0.5)
    assert out.chi == 0.5
    assert out.lambda0 == 2.0


def test_power_closed_form():
    out = nash_allocate(12.0, 2, UtilitySpec.power([0.5, 1.0]))
    assert out.shares == pytest.approx((4.0, 8.0))
    assert isinstance(out.shares[0], float)


def test_log1p_symmetric_split():
    out = nash_allocate(10.0, 2, UtilitySpec("custom", custom=(log1p_utility(),)))
    assert out.shares == pytest.approx((5.0, 5.0), rel=1e-12)
    assert out.chi == pytest.approx(6 * math.log(6), rel=1e-12)


def test_zero_worth():
    out = nash_allocate(0.0, 3)
    assert out.shares == (0.0, 0.0, 0.0)
    assert out.lambda0 == math.inf


def test_invalid_inputs():
    with pytest.raises(ValueError):
        nash_allocate(-1.0, 2)
    with pytest.raises(ValueError):
        nash_allocate(1.0, 0)
    with pytest.raises(ValueError):
        UtilitySpec.power([1.5])


def test_underflowing_marginal_utility_rejected():
    with pytest.raises(ValueError, match="underflow"):
        check_utility(saturating_utility(1.0), 1e7)


def test_convex_utility_rejected():
    convex = CustomUtility(lambda x: x * x, lambda x: 2 * x, "square")
    with pytest.raises(ValueError):
        check_utility(convex, 1.0)
    with pytest.raises(ValueError):
        nash_allocate(1.0, 2, UtilitySpec("custom", custom=(convex,)))


def test_utility_with_positive_zero_fear_of_ruin_rejected():
    shifted = CustomUtility(lambda x: 1 + x, lambda x: 1.0, "shifted")
    with pytest.raises(ValueError):
        check_utility(shifted, 1.0)


@given(st.lists(utility_st, min_size=2, max_size=4), st.floats(0.01, 1e4))
def test_fear_of_ruin_equalised(utils, worth):
    # u' of a saturating utility underflows to exactly 0 past rate * x ~ 745
    assume(all(u.du(worth) > 0 for u in utils))
    out = nash_allocate(worth, len(utils), UtilitySpec("custom", custom=tuple(utils)))
    assert sum(out.shares) == pytest.approx(worth, rel=1e-10)
    assert all(s > 0 for s in out.shares)
    fors = [fear_of_ruin(s, u) for s, u in zip(out.shares, utils)]
    assert spread(fors) < 1e-9
    assert out.chi == pytest.approx(fors[0], rel=1e-9)


@given(st.lists(st.floats(0.1, 1.0), min_size=2, max_size=5), st.floats(0.01, 1e4))
def test_power_solver_matches_closed_form(alphas, worth):
    closed = nash_allocate(worth, len(alphas), UtilitySpec.power(alphas))
    solved = nash_allocate(worth, len(alphas),
                           UtilitySpec("custom", custom=tuple(power_utility(a) for a in alphas)))
    np.testing.assert_allclose(solved.shares, closed.shares, rtol=1e-9)
    assert closed.shares == pytest.approx(tuple(a / sum(alphas) * worth for a in alphas), rel=1e-12)


def grid_argmax(utils, worth, steps):
    h = worth / steps
    best, arg = -math.inf, None
    for i, j in itertools.product(range(1, steps), repeat=2):
        k = steps - i - j
        if k < 1:
            continue
        val = sum(math.log(u.u(x * h)) for u, x in zip(utils, (i, j, k)))
        if val > best:
            best, arg = val, (i * h, j * h, k * h)
    return np.array(arg), h


@pytest.mark.parametrize("seed", range(5))
def test_three_member_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    utils = [log1p_utility(), saturating_utility(float(rng.uniform(0.1, 2))),
             power_utility(float(rng.uniform(0.2, 1)))]
    worth = float(rng.uniform(1, 20))
    arg, h = grid_argmax(utils, worth, 300)
    out = nash_allocate(worth, 3, UtilitySpec("custom", custom=tuple(utils)))
    assert np.max(np.abs(np.array(out.shares) - arg)) <= 2 * h


def test_threats_shift_the_split():
    spec = UtilitySpec("custom", custom=(log1p_utility(),), threats=(1.0, 0.0))
    out = nash_allocate(10.0, 2, spec)
    assert out.shares[0] > out.shares[1]
    u = log1p_utility()
    gains = [(u.u(s) - t) / u.du(s) for s, t in zip(out.shares, (1.0, 0.0))]
    assert spread(gains) < 1e-9


def test_chi_vector_closed_forms():
    np.testing.assert_allclose(chi_vector([6.0, 0.0], [3, 2]), [2.0, 0.0])
    spec = UtilitySpec("custom", custom=(log1p_utility(),))
    np.testing.assert_allclose(chi_vector([10.0], [2], spec), [6 * math.log(6)])


@given(st.floats(0.1, 100.0), st.integers(1, 6))
def test_chi_increases_with_worth(worth, n):
    spec = UtilitySpec("custom", custom=(log1p_utility(),))
    assert nash_allocate(worth * 1.1, n, spec).chi > nash_allocate(worth, n, spec).chi
