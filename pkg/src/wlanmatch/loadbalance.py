"""Cardinality targets for the APs from sharing the covered users.

A user covered by several APs is split between them by a symmetric Nash
bargaining over a unit share, i.e. evenly. Targets are expressed as
coalition sizes, so each AP adds itself: ``qhat_f = 1 + sum of its shares``.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .model import QuotaVector, RateMatrix

SharePolicy = Callable[[RateMatrix], np.ndarray]


def equal_split(rates: RateMatrix) -> np.ndarray:
    """``(W, F)`` matrix of user shares: ``1 / |covering APs|`` on each covering AP."""
    cov = rates.theta > 0
    n = cov.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cov, 1.0 / np.maximum(n, 1), 0.0)


POLICIES: dict[str, SharePolicy] = {"equal-split": equal_split}


def compute_quotas(rates: RateMatrix, policy: str | SharePolicy = "equal-split",
                   n_users: int | None = None) -> QuotaVector:
    """Fractional targets and the integer caps derived from them."""
    share = POLICIES[policy] if isinstance(policy, str) else policy
    m = np.asarray(share(rates), dtype=float)
    if m.shape != rates.theta.shape:
        raise ValueError("share policy returned a matrix of the wrong shape")
    if np.any(m < 0) or np.any(m[rates.theta == 0] != 0):
        raise ValueError("shares must be nonnegative and only on covering APs")
    qhat = tuple(float(1.0 + x) for x in m.sum(axis=0))
    W = rates.n_users if n_users is None else n_users
    caps = integer_caps(qhat, W) if W >= 3 else tuple(max(1, W) for _ in qhat)
    return QuotaVector(qhat, caps)


def integer_caps(qhat: Sequence[float], n_users: int) -> tuple[int, ...]:
    """User caps ``clamp(ceil(qhat), 2, W - 1)``.

    Since ``qhat`` counts the AP, the cap leaves room for one user more than
    the target; the tax rate, not the cap, is what steers sizes.
    """
    if n_users < 3:
        raise ValueError("at least three users are needed for caps in {2, ..., W-1}")
    return tuple(min(max(math.ceil(q - 1e-9), 2), n_users - 1) for q in qhat)
