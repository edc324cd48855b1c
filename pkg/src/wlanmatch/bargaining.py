"""Nash bargaining over a coalition's worth.

For strictly log-concave utilities the solution equalises the fear of ruin
``u / u'`` across members; its common value is the inverse of the Lagrange
multiplier of the budget constraint. Identity and power utilities have
closed forms; anything else goes through a root search on the multiplier.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

Fn = Callable[[float], float]

FAMILIES = ("identity", "power", "custom")


@dataclass(frozen=True)
class CustomUtility:
    u: Fn
    du: Fn
    name: str = "custom"


def log1p_utility() -> CustomUtility:
    return CustomUtility(math.log1p, lambda x: 1.0 / (1.0 + x), "log1p")


def saturating_utility(rate: float) -> CustomUtility:
    """``1 - exp(-rate * x)``."""
    return CustomUtility(
        lambda x: -math.expm1(-rate * x), lambda x: rate * math.exp(-rate * x), f"sat({rate:g})"
    )


def power_utility(alpha: float) -> CustomUtility:
    return CustomUtility(lambda x: x**alpha, lambda x: alpha * x ** (alpha - 1), f"pow({alpha:g})")


@dataclass(frozen=True)
class UtilitySpec:
    """Utility family shared by the members of a coalition.

    ``alphas`` (power family) and ``custom`` are per-member sequences aligned
    with the members passed to :func:`nash_allocate`; a single entry is
    broadcast to every member. ``threats`` likewise.
    """

    family: str = "identity"
    alphas: tuple[float, ...] = ()
    custom: tuple[CustomUtility, ...] = ()
    threats: tuple[float, ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown utility family {self.family!r}")
        if self.family == "power" and not self.alphas:
            raise ValueError("power utilities need alphas")
        if any(a <= 0 or a > 1 for a in self.alphas):
            raise ValueError("power exponents must lie in (0, 1]")
        if self.family == "custom" and not self.custom:
            raise ValueError("custom family needs at least one utility")

    @classmethod
    def identity(cls) -> "UtilitySpec":
        return cls("identity")

    @classmethod
    def power(cls, alphas: Sequence[float]) -> "UtilitySpec":
        return cls("power", alphas=tuple(float(a) for a in alphas))

    def _per_member(self, seq, n, default):
        if not seq:
            return [default] * n
        if len(seq) == 1:
            return list(seq) * n
        if len(seq) != n:
            raise ValueError(f"expected 1 or {n} entries, got {len(seq)}")
        return list(seq)

    def alpha_vector(self, n: int) -> np.ndarray:
        return np.asarray(self._per_member(self.alphas, n, 1.0), dtype=float)

    def threat_vector(self, n: int) -> np.ndarray:
        return np.asarray(self._per_member(self.threats, n, 0.0), dtype=float)

    def utilities(self, n: int) -> list[CustomUtility]:
        if self.family == "identity":
            return [CustomUtility(lambda x: x, lambda x: 1.0, "identity")] * n
        if self.family == "power":
            return [power_utility(a) for a in self.alpha_vector(n)]
        return self._per_member(self.custom, n, None)

    @property
    def closed_form(self) -> bool:
        return self.family in ("identity", "power") and not any(self.threats)


@dataclass(frozen=True)
class BargainOutcome:
    shares: tuple[float, ...]
    lambda0: float  # inf when worth is 0
    chi: float


def fear_of_ruin(share: float, u: CustomUtility | UtilitySpec | None = None) -> float:
    """``u(s) / u'(s)``; identity utility when ``u`` is omitted."""
    if share < 0:
        raise ValueError("share must be nonnegative")
    if u is None or (isinstance(u, UtilitySpec) and u.family == "identity"):
        return float(share)
    if isinstance(u, UtilitySpec):
        u = u.utilities(1)[0]
    d = u.du(share)
    if d == 0:
        raise ValueError(f"u'({share}) = 0, fear of ruin undefined")
    return u.u(share) / d


def check_utility(u: CustomUtility, worth: float, threat: float = 0.0, n_grid: int = 64) -> None:
    """Reject utilities that are not increasing and concave on ``(0, worth]``."""
    xs = np.linspace(worth / n_grid, worth, n_grid)
    us = np.array([u.u(x) for x in xs])
    ds = np.array([u.du(x) for x in xs])
    if not np.all(np.isfinite(us)) or not np.all(np.isfinite(ds)):
        raise ValueError(f"utility {u.name} is not finite on (0, {worth}]")
    # u itself may round flat (saturating utilities); u' > 0 is the real test
    if np.any(ds <= 0) or np.any(np.diff(us) < 0):
        raise ValueError(f"utility {u.name} is not strictly increasing on (0, {worth:g}] "
                         "(u' may underflow; rescale the utility to the worth's units)")
    if np.any(np.diff(ds) > 1e-12 * np.abs(ds[:-1]).max()):
        raise ValueError(f"utility {u.name} is not concave (u' increases)")
    if threat == 0.0:
        eps = worth * 1e-9
        d0 = u.du(eps)
        if d0 <= 0 or u.u(eps) / d0 > 1e-6 * worth:
            raise ValueError(f"utility {u.name} violates u(0)/u'(0) = 0")


def _inverse_boldness(u: CustomUtility, threat: float, lam: float, lo: float, hint: float,
                      cap: float) -> float:
    """Solve ``u'(x) / (u(x) - t) = lam`` for ``x`` in ``[lo, cap]``, clamped to the ends.

    Clamping at ``cap`` (the worth) keeps the budget function continuous and
    does not move its root, where every share is below the worth.
    """

    def g(x):
        return u.du(x) - lam * (u.u(x) - threat)

    a = lo
    if g(a) <= 0:
        return a
    if g(cap) >= 0:
        return cap
    b = min(max(hint, lo * 2 + 1e-300), cap)
    while g(b) > 0:
        a = b
        b = min(b * 2.0, cap)
    return optimize.brentq(g, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def _threat_floor(u: CustomUtility, threat: float, worth: float) -> float:
    if threat <= u.u(0.0):
        return 0.0
    if u.u(worth) <= threat:
        raise ValueError("threat exceeds the utility of the whole worth")
    return optimize.brentq(lambda x: u.u(x) - threat, 0.0, worth, xtol=1e-300, rtol=1e-15)


def _solve_custom(worth: float, utils: list[CustomUtility], threats: np.ndarray) -> BargainOutcome:
    n = len(utils)
    for u, t in zip(utils, threats):
        check_utility(u, worth, t)
    floors = np.array([_threat_floor(u, t, worth) for u, t in zip(utils, threats)])
    if floors.sum() >= worth:
        raise ValueError("threat points leave nothing to bargain over")
    floor = worth * 1e-12

    def boldness(i, x):
        return utils[i].du(x) / (utils[i].u(x) - threats[i])

    if n == 1:
        lam = boldness(0, worth)
        return BargainOutcome((worth,), lam, 1.0 / lam)

    def total(log_lam):
        lam = math.exp(log_lam)
        return sum(
            _inverse_boldness(utils[i], threats[i], lam, max(floors[i], floor), worth / n, worth)
            for i in range(n)
        ) - worth

    lo = min(boldness(i, worth) for i in range(n))
    hi = max(boldness(i, max(floors[i], 0) + (worth - floors.sum()) / (10 * n)) for i in range(n))
    a, b = math.log(lo), math.log(hi)
    for _ in range(60):
        if total(a) >= 0 >= total(b):
            break
        a -= 1.0
        b += 1.0
    else:
        raise RuntimeError("could not bracket the Lagrange multiplier")
    log_lam = optimize.brentq(total, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    lam = math.exp(log_lam)
    shares = [
        _inverse_boldness(utils[i], threats[i], lam, max(floors[i], floor), worth / n, worth)
        for i in range(n)
    ]
    if abs(sum(shares) - worth) > 1e-10 * worth:
        raise RuntimeError("budget constraint not met to tolerance")
    return BargainOutcome(tuple(shares), lam, 1.0 / lam)


def nash_allocate(worth: float, n_members: int, spec: UtilitySpec | None = None) -> BargainOutcome:
    """Split ``worth`` among ``n_members`` by maximising the Nash product."""
    spec = spec or UtilitySpec()
    if worth < 0:
        raise ValueError("worth must be nonnegative")
    if n_members < 1:
        raise ValueError("a coalition needs at least one member")
    if worth == 0:
        return BargainOutcome((0.0,) * n_members, math.inf, 0.0)
    threats = spec.threat_vector(n_members)
    if spec.family == "identity" and not threats.any():
        s = worth / n_members
        return BargainOutcome((s,) * n_members, 1.0 / s, s)
    if spec.family == "power" and not threats.any():
        a = spec.alpha_vector(n_members)
        chi = float(worth / a.sum())
        return BargainOutcome(tuple(float(x) for x in a * chi), 1.0 / chi, chi)
    return _solve_custom(float(worth), spec.utilities(n_members), threats)


def coalition_for(worth: float, n_members: int, spec: UtilitySpec | None = None) -> float:
    """Common fear of ruin of a coalition at its bargaining solution."""
    if worth <= 0:
        raise ValueError("worth must be positive")
    return nash_allocate(worth, n_members, spec).chi


def chi_vector(worths: np.ndarray, sizes: np.ndarray, spec: UtilitySpec | None = None,
               alpha_sums: np.ndarray | None = None) -> np.ndarray:
    """Vectorised fear of ruin for the closed-form families (0 where worth is 0).

    For the power family ``alpha_sums`` gives ``sum(alpha)`` per coalition;
    by default every member has ``alpha = 1``.
    """
    spec = spec or UtilitySpec()
    worths = np.asarray(worths, dtype=float)
    if spec.family == "identity" and not any(spec.threats):
        return worths / np.asarray(sizes, dtype=float)
    if spec.family == "power" and not any(spec.threats):
        if alpha_sums is None:
            alpha_sums = np.asarray(sizes, dtype=float) * (spec.alphas[0] if len(spec.alphas) == 1 else 1.0)
        return worths / alpha_sums
    return np.array([
        coalition_for(w, int(n), spec) if w > 0 else 0.0 for w, n in zip(worths, sizes)
    ])
