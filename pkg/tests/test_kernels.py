import os
import subprocess
import sys

import numpy as np
import pytest

from wlanmatch import kernels


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in kernels.implementations()


def test_pure_python_env_switch():
    env = dict(os.environ, WLANMATCH_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from wlanmatch import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_first_admissible(impl):
    masks = np.array([0b110, 0b011, 0b001], dtype=np.uint64)
    assert kernels.first_admissible(masks, 0b011, impl=impl) == 1
    assert kernels.first_admissible(masks, 0b100, impl=impl) == -1
    assert kernels.first_admissible(masks[:0], 0b111, impl=impl) == -1


def test_min_key_per_user(impl):
    masks = np.array([0b011, 0b010, 0b100], dtype=np.uint64)
    keys = np.array([5, 2, 7], dtype=np.int64)
    out = kernels.min_key_per_user(masks, keys, 4, impl=impl)
    assert out.tolist() == [5, 2, 7, np.iinfo(np.int64).max]


@pytest.mark.skipif("cython" not in kernels.implementations(), reason="extension not built")
def test_backends_agree_on_random_inputs():
    rng = np.random.default_rng(0)
    impls = kernels.implementations()
    masks = rng.integers(1, 2**20, size=500).astype(np.uint64)
    keys = rng.permutation(500).astype(np.int64)
    for allowed in rng.integers(0, 2**20, size=50):
        a = kernels.first_admissible(masks, int(allowed), impl=impls["python"])
        b = kernels.first_admissible(masks, int(allowed), impl=impls["cython"])
        assert a == b
    np.testing.assert_array_equal(kernels.min_key_per_user(masks, keys, 20, impl=impls["python"]),
                                  kernels.min_key_per_user(masks, keys, 20, impl=impls["cython"]))
