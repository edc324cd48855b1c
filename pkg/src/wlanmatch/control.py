"""Multiplicative tax rates on coalition worth, and the checks that certify them.

A tax rate ``c_f(|C|)`` in ``(0, 1]`` scales the worth of every coalition
around AP ``f``. With the Gaussian family the factor peaks at the AP's
cardinality target, which pushes the players towards coalitions of that size.

Comparisons happen in log space: with a narrow Gaussian the off-peak factors
underflow long before the ordering they induce stops being meaningful.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .bargaining import UtilitySpec, chi_vector

DEFAULT_SIGMA = 0.3


@dataclass(frozen=True)
class ControlSpec:
    """Per-AP tax-rate family.

    ``qhat`` and ``sigma`` hold one value per AP (``sigma`` may have a single
    value for all). ``custom`` maps ``(ap, size)`` to a factor in ``(0, 1]``.
    """

    family: str = "gaussian"
    qhat: tuple[float, ...] = ()
    sigma: tuple[float, ...] = (DEFAULT_SIGMA,)
    custom: Callable[[int, int], float] | None = None

    def __post_init__(self):
        if self.family not in ("gaussian", "none", "custom"):
            raise ValueError(f"unknown control family {self.family!r}")
        if self.family == "gaussian":
            if not self.qhat:
                raise ValueError("gaussian control needs qhat")
            if any(s <= 0 for s in self.sigma):
                raise ValueError("sigma must be positive")
            if len(self.sigma) not in (1, len(self.qhat)):
                raise ValueError("sigma needs one value or one per AP")
        if self.family == "custom" and self.custom is None:
            raise ValueError("custom control needs a factor function")

    @classmethod
    def none(cls) -> "ControlSpec":
        return cls("none")

    @classmethod
    def gaussian(cls, qhat: Sequence[float], sigma: float | Sequence[float] = DEFAULT_SIGMA) -> "ControlSpec":
        sig = (float(sigma),) if np.isscalar(sigma) else tuple(float(s) for s in sigma)
        return cls("gaussian", tuple(float(q) for q in qhat), sig)

    def sigma_of(self, f: int) -> float:
        return self.sigma[0] if len(self.sigma) == 1 else self.sigma[f]

    def log_factor(self, f: int, size) -> np.ndarray:
        size = np.asarray(size, dtype=float)
        if self.family == "none":
            return np.zeros_like(size)
        if self.family == "gaussian":
            s = self.sigma_of(f)
            return -((size - self.qhat[f]) ** 2) / (2 * s * s)
        vals = np.vectorize(lambda n: self.custom(f, int(n)), otypes=[float])(size)
        if np.any(vals <= 0) or np.any(vals > 1):
            raise ValueError("custom tax rates must lie in (0, 1]")
        return np.log(vals)

    def factor(self, f: int, size: int) -> float:
        return float(np.exp(self.log_factor(f, size)))


@dataclass(frozen=True)
class ControlledWorth:
    base: float
    modified: float
    factor: float


def controlled_worth(v: float, ap: int | None, size: int, spec: ControlSpec) -> ControlledWorth:
    if ap is None:
        return ControlledWorth(v, v, 1.0)
    c = spec.factor(ap, size)
    return ControlledWorth(v, c * v, c)


def apply_control(worths, aps, sizes, spec: ControlSpec) -> np.ndarray:
    """``c_f(|C|) * v(C)`` for every coalition; ``aps`` is -1 for lone users."""
    worths = np.asarray(worths, dtype=float)
    return worths * np.exp(log_factors(aps, sizes, spec))


def log_factors(aps, sizes, spec: ControlSpec) -> np.ndarray:
    aps = np.asarray(aps)
    sizes = np.asarray(sizes)
    out = np.zeros(len(aps))
    if spec.family == "none":
        return out
    for f in np.unique(aps):
        if f < 0:
            continue
        sel = aps == f
        out[sel] = spec.log_factor(int(f), sizes[sel])
    return out


def log_chi(base_worths, sizes, log_fac, utilities: UtilitySpec | None = None) -> np.ndarray:
    """``log`` of the coalition fear of ruin under the controlled worth.

    Exact in log space for the closed-form families (the fear of ruin is
    linear in the worth); other families evaluate the worth directly.
    """
    utilities = utilities or UtilitySpec()
    base_worths = np.asarray(base_worths, dtype=float)
    sizes = np.asarray(sizes)
    log_fac = np.asarray(log_fac, dtype=float)
    with np.errstate(divide="ignore"):
        if utilities.closed_form:
            return np.log(chi_vector(base_worths, sizes, utilities)) + log_fac
        return np.log(chi_vector(base_worths * np.exp(log_fac), sizes, utilities))


def check_incentive_subset(preferred: Iterable[tuple[object, frozenset, float]],
                           others: Iterable[tuple[object, frozenset, float]]):
    """Whether every preferred coalition beats every overlapping other one.

    Entries are ``(label, members, chi)``. Returns ``(True, None)`` or
    ``(False, (preferred_label, other_label))`` for the first violation.
    """
    others = list(others)
    for lp, mp, cp in preferred:
        for lo, mo, co in others:
            if mp & mo and not cp > co:
                return False, (lp, lo)
    return True, None


def check_single_peaked(sizes, log_chis, qhat: float):
    """Single-peakedness in cardinality of one AP's coalitions around ``qhat``.

    Above the peak, the worst size-``q`` coalition must beat the best of
    size ``q + 1``; below it, the worst size-``q`` coalition must beat the
    best of size ``q - 1``. Returns ``(ok, (q, q_other))``.
    """
    sizes = np.asarray(sizes)
    log_chis = np.asarray(log_chis, dtype=float)
    present = sorted(int(s) for s in np.unique(sizes))
    lo = {q: log_chis[sizes == q].min() for q in present}
    hi = {q: log_chis[sizes == q].max() for q in present}
    for q in present:
        if q >= qhat and q + 1 in lo and not lo[q] > hi[q + 1]:
            return False, (q, q + 1)
        if q <= qhat and q - 1 in lo and not lo[q] > hi[q - 1]:
            return False, (q, q - 1)
    return True, None


def single_peaked_at(sigma: float, base_worths, sizes, qhat: float,
                     utilities: UtilitySpec | None = None):
    sizes = np.asarray(sizes)
    lf = -((sizes - qhat) ** 2) / (2 * sigma * sigma)
    return check_single_peaked(sizes, log_chi(base_worths, sizes, lf, utilities), qhat)


def max_sigma_single_peaked(base_worths, sizes, qhat: float, utilities: UtilitySpec | None = None,
                            tolerance: float = 1e-3, sigma_lo: float = 1e-3,
                            sigma_hi: float = 10.0) -> float:
    """Largest Gaussian ``sigma`` (to ``tolerance``) keeping one AP single-peaked.

    ``base_worths`` and ``sizes`` describe the AP's uncontrolled coalitions.
    The returned value itself passes :func:`check_single_peaked`.
    """
    sizes = np.asarray(sizes)
    if not len(sizes):
        raise ValueError("no coalitions to control")
    if np.min(np.abs(sizes - qhat)) > 1:
        raise ValueError(f"target {qhat:g} is more than one member away from every feasible size")
    if not single_peaked_at(sigma_lo, base_worths, sizes, qhat, utilities)[0]:
        raise ValueError(f"no single-peaked sigma in [{sigma_lo:g}, {sigma_hi:g}]")
    if single_peaked_at(sigma_hi, base_worths, sizes, qhat, utilities)[0]:
        return sigma_hi
    lo, hi = sigma_lo, sigma_hi
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if single_peaked_at(mid, base_worths, sizes, qhat, utilities)[0]:
            lo = mid
        else:
            hi = mid
    return lo


def gaussian_factor(size: float, qhat: float, sigma: float) -> float:
    return math.exp(-((size - qhat) ** 2) / (2 * sigma * sigma))
