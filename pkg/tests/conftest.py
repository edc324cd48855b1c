import numpy as np
import pytest
from hypothesis import settings

from wlanmatch import kernels
from wlanmatch.model import MBPS, RateMatrix

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(params=sorted(kernels.implementations()))
def impl(request):
    return kernels.implementations()[request.param]


def random_rates(rng, n_users, n_aps, zero_fraction=0.2, choices=(300, 54, 11)):
    th = rng.choice(choices, size=(n_users, n_aps)) * MBPS
    th[rng.random((n_users, n_aps)) < zero_fraction] = 0
    return RateMatrix(th)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion that ran."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
