"""Saturated IEEE 802.11 DCF cell model.

The worth of a cell is its total saturation throughput under the decoupling
approximation; each contender's throughput is proportional to the bits it
sends per attempt (``alpha``), so the allocation coincides with a Nash
bargaining with power utilities ``x ** alpha``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize

from . import kernels
from .model import MBPS, Coalition, CoalitionFamily, RateMatrix


@dataclass(frozen=True)
class MacParams:
    name: str
    slot_s: float
    t0_slots: float  # fixed overhead per successful transmission
    tc_slots: float  # fixed overhead per (RTS) collision
    packet_bits: float
    max_retries: int  # K, index of the last backoff stage
    b0: float  # mean initial backoff, slots
    backoff_mult: float  # p
    rate_set: tuple[float, ...]

    def __post_init__(self):
        for attr in ("slot_s", "t0_slots", "tc_slots", "packet_bits", "b0", "backoff_mult"):
            if getattr(self, attr) <= 0:
                raise ValueError(f"{attr} must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if not self.rate_set:
            raise ValueError("rate_set must be nonempty")

    @property
    def max_rate(self) -> float:
        return max(self.rate_set)


DEFAULT_TABLES: dict[str, MacParams] = {
    "802.11n": MacParams("802.11n", 9e-6, 3, 2, 8192, 2, 16, 2, (300 * MBPS, 54 * MBPS, 11 * MBPS)),
    "802.11g": MacParams("802.11g", 9e-6, 5, 10, 8192, 2, 16, 2, (54 * MBPS, 11 * MBPS)),
    "802.11b": MacParams("802.11b", 20e-6, 50, 20, 8192, 2, 16, 2, (11 * MBPS,)),
}


@dataclass(frozen=True)
class MacConfig:
    """How a cell's MAC parameters are chosen and who contends.

    ``policy="lowest-rate"`` uses the table whose top rate equals the lowest
    member rate; ``policy="fixed"`` always uses ``tables[fixed]``.
    ``downlink=False`` leaves the AP out of the contention (uplink only).
    """

    tables: Mapping[str, MacParams] = field(default_factory=lambda: dict(DEFAULT_TABLES))
    policy: str = "lowest-rate"
    fixed: str | None = None
    downlink: bool = True
    beta_fixed: float | None = None

    def __post_init__(self):
        if self.policy not in ("lowest-rate", "fixed"):
            raise ValueError(f"unknown MAC policy {self.policy!r}")
        if self.policy == "fixed" and self.fixed not in self.tables:
            raise ValueError(f"fixed MAC table {self.fixed!r} not among {sorted(self.tables)}")
        if self.beta_fixed is not None and not 0 < self.beta_fixed < 1:
            raise ValueError("beta_fixed must lie in (0, 1)")

    def __hash__(self):
        return hash((tuple(sorted(self.tables.items())), self.policy, self.fixed,
                     self.downlink, self.beta_fixed))

    def ordered_tables(self) -> list[MacParams]:
        return sorted(self.tables.values(), key=lambda t: t.max_rate)

    def select(self, member_rates: Sequence[float]) -> MacParams:
        if self.policy == "fixed":
            if not len(member_rates):
                raise ValueError("empty cell")
            return self.tables[self.fixed]
        return select_mac(self.tables, member_rates)


def select_mac(tables: Mapping[str, MacParams], member_rates: Sequence[float]) -> MacParams:
    """MAC table of the standard whose top rate is the lowest rate in the cell.

    A homogeneous cell falls under the same rule (its common rate is the lowest).
    """
    if not len(member_rates):
        raise ValueError("cannot select MAC parameters for an empty cell")
    low = min(member_rates)
    for t in tables.values():
        if t.max_rate == low:
            return t
    raise ValueError(f"no MAC table has top rate {low / MBPS:g} Mbit/s")


def backoff_response(mac: MacParams, gamma: float) -> float:
    """Attempt rate of a station whose attempts collide with probability ``gamma``."""
    k = np.arange(mac.max_retries + 1)
    g = gamma ** k
    return float(g.sum() / (g * mac.backoff_mult ** k * mac.b0).sum())


@functools.lru_cache(maxsize=4096)
def _attempt_rate(mac: MacParams, n: int) -> float:
    if n == 1:
        return backoff_response(mac, 0.0)

    def excess(beta):
        return beta - backoff_response(mac, 1.0 - (1.0 - beta) ** (n - 1))

    beta, res = optimize.bisect(excess, 1e-9, 1.0, xtol=1e-12, rtol=8.9e-16,
                                maxiter=200, full_output=True, disp=False)
    if not res.converged:
        raise RuntimeError(f"attempt-rate bisection did not converge (n={n})")
    return float(beta)


def attempt_rate(mac: MacParams, n_members: int, beta_fixed: float | None = None) -> float:
    """Fixed point ``beta = G(1 - (1 - beta) ** (n - 1))`` of the decoupled backoff model."""
    if n_members < 1:
        raise ValueError("n_members must be >= 1")
    if beta_fixed is not None:
        return float(beta_fixed)
    return _attempt_rate(mac, int(n_members))


@dataclass(frozen=True)
class FlowSpec:
    """Flows of one station: ``(probability, packet bits)`` pairs."""

    flows: tuple[tuple[float, float], ...] = ((1.0, 8192.0),)

    def __post_init__(self):
        flows = tuple((float(p), float(L)) for p, L in self.flows)
        if not flows:
            raise ValueError("a station needs at least one flow")
        if any(p <= 0 or L <= 0 for p, L in flows):
            raise ValueError("flow probabilities and lengths must be positive")
        if abs(sum(p for p, _ in flows) - 1.0) > 1e-9:
            raise ValueError("flow probabilities must sum to 1")
        object.__setattr__(self, "flows", flows)

    @property
    def bits(self) -> float:
        """Expected bits per successful attempt."""
        return sum(p * L for p, L in self.flows)

    def alpha(self, l_max: float) -> float:
        if any(L > l_max for _, L in self.flows):
            raise ValueError("flow longer than L_max")
        return self.bits / l_max

    def airtime(self, rate: float) -> float:
        """Expected transmission time in seconds at ``rate`` bit/s."""
        return sum(p * L / rate for p, L in self.flows)


def default_flow(mac: MacParams) -> FlowSpec:
    return FlowSpec(((1.0, mac.packet_bits),))


@dataclass(frozen=True)
class CellThroughput:
    v: float  # bit/s
    per_member: tuple[float, ...]  # bit/s, aligned with the contenders passed in
    beta: float
    mac: str


def cell_throughput(rates: Sequence[float], mac: MacParams,
                    flows: Sequence[FlowSpec] | None = None,
                    beta_fixed: float | None = None) -> CellThroughput:
    """Per-contender saturation throughput of a single cell.

    Computed in bits/slot and converted to bit/s at the end.
    """
    n = len(rates)
    if n == 0:
        return CellThroughput(0.0, (), 0.0, mac.name)
    if any(r <= 0 for r in rates):
        raise ValueError("every contender needs a positive rate")
    if flows is None:
        flows = [default_flow(mac)] * n
    if len(flows) != n:
        raise ValueError("one FlowSpec per contender is required")
    b = attempt_rate(mac, n, beta_fixed)
    q1 = (1 - b) ** (n - 1)
    air = sum(fl.airtime(r) / mac.slot_s + mac.t0_slots for fl, r in zip(flows, rates))
    denom = 1 + b * q1 * air + (1 - (1 - b) ** n - n * b * q1) * mac.tc_slots
    succ = b * (1 - b) ** n
    per = tuple(fl.bits * succ / denom / mac.slot_s for fl in flows)
    return CellThroughput(sum(per), per, b, mac.name)


def coalition_worth(coalition: Coalition, rates: RateMatrix, config: MacConfig | None = None,
                    flows: Mapping[str, FlowSpec] | None = None) -> CellThroughput:
    """Worth ``v(C)`` and per-member MAC throughputs of a coalition.

    ``per_member`` is ordered as ``coalition.users`` followed by the AP (the
    AP's entry is 0 in uplink-only mode). Lone users produce nothing.
    ``flows`` maps player labels (``"w1"``, ``"f2"``) to non-default flows.
    """
    config = config or MacConfig()
    if coalition.ap is None:
        return CellThroughput(0.0, (0.0,), 0.0, "")
    f = coalition.ap
    user_rates = [float(rates[w, f]) for w in coalition.users]
    if any(r <= 0 for r in user_rates):
        bad = [w for w, r in zip(coalition.users, user_rates) if r <= 0]
        raise ValueError(f"users {bad} have zero rate toward AP {f}")
    mac = config.select(user_rates)
    flows = flows or {}
    fl = [flows.get(f"w{w + 1}", default_flow(mac)) for w in coalition.users]
    contenders = list(user_rates)
    if config.downlink:
        contenders.append(mac.max_rate)
        fl.append(flows.get(f"f{f + 1}", default_flow(mac)))
    cell = cell_throughput(contenders, mac, fl, config.beta_fixed)
    per = cell.per_member if config.downlink else cell.per_member + (0.0,)
    return CellThroughput(cell.v, per, cell.beta, mac.name)


def time_fair_allocation(coalition: Coalition, rates: RateMatrix) -> dict[int, tuple[float, float]]:
    """Equal airtime split among the users; ``user -> (time share, bit/s)``."""
    if coalition.ap is None:
        raise ValueError("time-based fairness needs an AP")
    f = coalition.ap
    th = [float(rates[w, f]) for w in coalition.users]
    if any(r <= 0 for r in th):
        raise ValueError("every user needs a positive rate toward the AP")
    a = 1.0 / len(th)
    return {w: (a, a * r) for w, r in zip(coalition.users, th)}


class WorthTable:
    """Vectorised worths for a :class:`CoalitionFamily`.

    Supports default (single equal-length flow) stations only; use
    :func:`coalition_worth` for custom flows.
    """

    def __init__(self, rates: RateMatrix, config: MacConfig | None = None, impl=None):
        self.rates = rates
        self.config = config or MacConfig()
        self.impl = impl
        tabs = self.config.ordered_tables()
        if self.config.policy == "fixed":
            tabs = [self.config.tables[self.config.fixed]]
        self.tables = tabs
        self.slot = np.array([t.slot_s for t in tabs])
        self.t0 = np.array([t.t0_slots for t in tabs], dtype=float)
        self.tc = np.array([t.tc_slots for t in tabs], dtype=float)
        self.ap_rate = np.array([t.max_rate for t in tabs])
        bits = {t.packet_bits for t in tabs}
        if len(bits) != 1:
            raise ValueError("vectorised worths need a common packet length across tables")
        self.packet_bits = bits.pop()

    def _beta(self, max_n: int) -> np.ndarray:
        out = np.zeros((len(self.tables), max_n + 1))
        for i, t in enumerate(self.tables):
            for n in range(1, max_n + 1):
                out[i, n] = attempt_rate(t, n, self.config.beta_fixed)
        return out

    def _user_tables(self, f: int) -> np.ndarray:
        th = self.rates.theta[:, f]
        ut = np.zeros(len(th), dtype=np.int64)
        if self.config.policy == "fixed":
            return ut
        tops = [t.max_rate for t in self.tables]
        for w, r in enumerate(th):
            if r > 0:
                if r not in tops:
                    raise ValueError(f"no MAC table has top rate {r / MBPS:g} Mbit/s")
                ut[w] = tops.index(r)
        return ut

    def worths(self, family: CoalitionFamily) -> np.ndarray:
        out = np.zeros(len(family))
        if not len(family):
            return out
        max_n = int(family.n_user_members.max()) + 1
        beta = self._beta(max_n)
        ubits = np.full(family.n_users, self.packet_bits)
        for f in range(family.n_aps):
            blk = family.by_ap[f]
            if blk.stop == blk.start:
                continue
            lo, hi = family.offsets[blk.start], family.offsets[blk.stop]
            offs = family.offsets[blk.start : blk.stop + 1] - lo
            mems = family.members[lo:hi]
            rate = np.where(self.rates.theta[:, f] > 0, self.rates.theta[:, f], 1.0)
            out[blk] = kernels.coalition_worths(
                offs, mems, rate, ubits, self._user_tables(f), self.slot, self.t0,
                self.tc, self.ap_rate, beta, self.packet_bits, self.config.downlink,
                impl=self.impl,
            )
        return out
