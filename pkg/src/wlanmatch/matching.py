"""Preferences, the backward deferred acceptance algorithm and baseline matchers.

Under a Nash-bargaining sharing rule every member of a coalition ranks it by
the same number, the coalition's fear of ruin. Preferences are therefore
stored once, as a global strict rank ``key`` over coalitions (0 is best):
ties in the fear of ruin go to the lowest AP index, then to the
lexicographically smallest user tuple. A player's preference over two
coalitions containing it is the comparison of their keys; being alone is
worse than any listed coalition.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .bargaining import CustomUtility, UtilitySpec, log1p_utility, nash_allocate, power_utility, saturating_utility
from .control import ControlSpec, log_factors
from .mac80211 import MacConfig, WorthTable
from .model import (
    Coalition,
    CoalitionFamily,
    RateMatrix,
    Scenario,
    ap_label,
    mask_to_users,
    user_label,
)

NO_KEY = np.iinfo(np.int64).max
KEY_SCALE = 1e11  # log fear of ruin is compared to ~1e-11, i.e. 1e-11 relative


@dataclass(frozen=True)
class SharingRule:
    """How a coalition's (modified) worth is split among its members.

    ``identity`` is equal sharing, what the MAC does for single-flow stations
    with equal packets. ``power`` gives member ``i`` utility ``x ** alpha_i``
    (``user_alpha``/``ap_alpha`` per player, default 1). ``custom`` gives every
    player the same named utility: ``log1p``, ``saturating`` or ``power``
    with ``parameter``.
    """

    family: str = "identity"
    user_alpha: tuple[float, ...] = ()
    ap_alpha: tuple[float, ...] = ()
    utility: str = "log1p"
    parameter: float = 1.0

    def __post_init__(self):
        if self.family not in ("identity", "power", "custom"):
            raise ValueError(f"unknown sharing family {self.family!r}")
        if self.family == "custom" and self.utility not in ("log1p", "saturating", "power"):
            raise ValueError(f"unknown custom utility {self.utility!r}")

    def _alpha(self, seq, i):
        return float(seq[i]) if i < len(seq) else 1.0

    def custom_utility(self) -> CustomUtility:
        if self.utility == "log1p":
            return log1p_utility()
        if self.utility == "saturating":
            return saturating_utility(self.parameter)
        return power_utility(self.parameter)

    def spec_for(self, users: Sequence[int], ap: int, ap_bargains: bool = True) -> UtilitySpec:
        """Utility spec with members ordered as ``users`` then the AP (if it bargains)."""
        if self.family == "identity":
            return UtilitySpec.identity()
        if self.family == "power":
            ap_alpha = [self._alpha(self.ap_alpha, ap)] if ap_bargains else []
            return UtilitySpec.power([self._alpha(self.user_alpha, w) for w in users] + ap_alpha)
        return UtilitySpec("custom", custom=(self.custom_utility(),))

    def alpha_sums(self, family: CoalitionFamily, ap_bargains: bool = True) -> np.ndarray:
        ua = np.array([self._alpha(self.user_alpha, w) for w in range(family.n_users)])
        aa = np.array([self._alpha(self.ap_alpha, f) for f in range(family.n_aps)])
        if not len(family):
            return np.zeros(0)
        per = np.add.reduceat(ua[family.members], family.offsets[:-1]) if len(family.members) else 0
        return per + aa[family.ap] if ap_bargains else per + np.zeros(len(family))


@dataclass
class PreferenceProfile:
    """Strict preferences of every player over the coalition family.

    ``order[f]`` lists AP ``f``'s coalition ids best first (its list P#);
    ``best_key[w, f]`` is the key of the best coalition of ``f`` containing
    ``w`` and ``best_payoff[w, f]`` the user's share there (what AP ``f``
    announces to ``w``). ``user_shares`` is aligned with ``family.members``.
    """

    family: CoalitionFamily
    key: np.ndarray
    log_chi: np.ndarray
    user_shares: np.ndarray
    ap_shares: np.ndarray
    order: list[np.ndarray] = field(default_factory=list)
    ordered_masks: list[np.ndarray] = field(default_factory=list)
    best_key: np.ndarray | None = None
    best_payoff: np.ndarray | None = None

    @property
    def n_users(self) -> int:
        return self.family.n_users

    @property
    def n_aps(self) -> int:
        return self.family.n_aps

    @classmethod
    def from_scores(cls, family: CoalitionFamily, log_chi: np.ndarray, user_shares: np.ndarray,
                    ap_shares: np.ndarray, impl=None) -> "PreferenceProfile":
        """Rank coalitions by ``log_chi`` and derive every list of the profile.

        Coalitions with ``log_chi == -inf`` (zero worth) are left out.
        """
        log_chi = np.asarray(log_chi, dtype=float)
        n = len(family)
        key = np.full(n, NO_KEY, dtype=np.int64)
        ok = np.flatnonzero(np.isfinite(log_chi))
        if len(ok):
            q = np.rint(log_chi[ok] * KEY_SCALE).astype(np.int64)
            counts = family.n_user_members
            width = int(counts.max())
            full = np.full((n, width), -1, dtype=np.int64)
            row = np.repeat(np.arange(n), counts)
            col = np.arange(len(family.members)) - np.repeat(family.offsets[:-1], counts)
            full[row, col] = family.members
            pad = full[ok]
            cols = [pad[:, j] for j in range(width - 1, -1, -1)]
            perm = np.lexsort(cols + [family.ap[ok], -q])
            key[ok[perm]] = np.arange(len(ok))
        prof = cls(family, key, log_chi, np.asarray(user_shares, float), np.asarray(ap_shares, float))
        prof._derive(impl)
        return prof

    def _derive(self, impl=None):
        fam = self.family
        W, F = fam.n_users, fam.n_aps
        self.order, self.ordered_masks = [], []
        self.best_key = np.full((W, F), NO_KEY, dtype=np.int64)
        self.best_payoff = np.full((W, F), np.nan)
        valid = np.flatnonzero(self.key != NO_KEY)
        by_key = np.empty(len(valid), dtype=np.int64)
        by_key[self.key[valid]] = valid
        for f in range(F):
            ids = np.arange(fam.by_ap[f].start, fam.by_ap[f].stop)
            ids = ids[self.key[ids] != NO_KEY]
            ids = ids[np.argsort(self.key[ids], kind="stable")]
            self.order.append(ids)
            self.ordered_masks.append(np.ascontiguousarray(fam.masks[ids]))
            if not len(ids):
                continue
            bk = kernels.min_key_per_user(fam.masks[ids], self.key[ids], W, impl=impl)
            self.best_key[:, f] = bk
            for w in np.flatnonzero(bk != NO_KEY):
                self.best_payoff[w, f] = self.share(int(by_key[bk[w]]), int(w))

    @classmethod
    def from_explicit(cls, n_users: int, n_aps: int,
                      entries: Sequence[tuple[int, Sequence[int], float]]) -> "PreferenceProfile":
        """Profile from ``(ap, users, payoff)`` triples; every member gets ``payoff``."""
        coalitions = [Coalition(int(f), tuple(us)) for f, us, _ in entries]
        fam = CoalitionFamily.from_coalitions(n_users, n_aps, coalitions)
        pay = {(c.ap, c.users): float(p) for c, (_, _, p) in zip(coalitions, entries)}
        if any(p <= 0 for p in pay.values()):
            raise ValueError("explicit payoffs must be positive")
        vals = np.array([pay[(int(fam.ap[c]), fam.users(c))] for c in range(len(fam))])
        shares = np.repeat(vals, fam.n_user_members)
        return cls.from_scores(fam, np.log(vals), shares, vals)

    def share(self, c: int, w: int) -> float:
        us = self.family.members[self.family.offsets[c] : self.family.offsets[c + 1]]
        pos = np.flatnonzero(us == w)
        if not len(pos):
            raise KeyError(f"user {w} not in coalition {c}")
        return float(self.user_shares[self.family.offsets[c] + pos[0]])

    def user_prefs(self, w: int) -> list[int]:
        """Reduced list P'(w): covering APs by best achievable outcome."""
        row = self.best_key[w]
        fs = [f for f in range(self.n_aps) if row[f] != NO_KEY]
        return sorted(fs, key=lambda f: row[f])

    def ap_prefs(self, f: int) -> list[Coalition]:
        return [self.family.coalition(int(c)) for c in self.order[f]]

    def coalition_prefs(self, w: int) -> list[Coalition]:
        """Every listed coalition containing ``w``, best first."""
        cs = [c for c in np.argsort(self.key, kind="stable")
              if self.key[c] != NO_KEY and (int(self.family.masks[c]) >> w) & 1]
        return [self.family.coalition(int(c)) for c in cs]

    def lookup(self) -> dict[tuple[int, int], int]:
        return self.family.index()


def coalition_scores(family: CoalitionFamily, base_worths: np.ndarray, control: ControlSpec,
                     sharing: SharingRule, ap_bargains: bool = True):
    """``(log_chi, user_shares, ap_shares, modified_worths)`` for every coalition.

    With ``ap_bargains`` false (uplink-only cells, where the AP does not
    contend) the worth is bargained among the users alone and the AP's share
    is zero; the AP then ranks coalitions by the users' common fear of ruin.
    """
    sizes = family.sizes
    lf = log_factors(family.ap, sizes, control)
    with np.errstate(divide="ignore", under="ignore"):
        logv = np.log(base_worths)
        mod = base_worths * np.exp(lf)
    n_mem = family.n_user_members
    ap_on = 1.0 if ap_bargains else 0.0
    if sharing.family == "identity":
        parties = n_mem + ap_on
        log_chi = logv + lf - np.log(parties)
        chi = mod / parties
        return log_chi, np.repeat(chi, n_mem), ap_on * chi, mod
    if sharing.family == "power":
        asum = sharing.alpha_sums(family, ap_bargains)
        log_chi = logv + lf - np.log(asum)
        chi = mod / asum
        ua = np.array([sharing._alpha(sharing.user_alpha, w) for w in range(family.n_users)])
        aa = np.array([sharing._alpha(sharing.ap_alpha, f) for f in range(family.n_aps)])
        ushare = ua[family.members] * np.repeat(chi, n_mem)
        return log_chi, ushare, ap_on * aa[family.ap] * chi, mod
    log_chi = np.full(len(family), -np.inf)
    ushare = np.zeros(len(family.members))
    ashare = np.zeros(len(family))
    for c in range(len(family)):
        if mod[c] <= 0:
            continue
        users = family.users(c)
        spec = sharing.spec_for(users, int(family.ap[c]), ap_bargains)
        out = nash_allocate(float(mod[c]), len(users) + int(ap_bargains), spec)
        log_chi[c] = math.log(out.chi)
        ushare[family.offsets[c] : family.offsets[c + 1]] = out.shares[: len(users)]
        if ap_bargains:
            ashare[c] = out.shares[-1]
    return log_chi, ushare, ashare, mod


def build_preferences(rates: RateMatrix, caps: Sequence[int], mac: MacConfig | None = None,
                      control: ControlSpec | None = None, sharing: SharingRule | None = None,
                      impl=None):
    """Profile of the (controlled) game plus the base and modified worths."""
    mac = mac or MacConfig()
    control = control or ControlSpec.none()
    sharing = sharing or SharingRule()
    family = CoalitionFamily.build(rates, caps)
    base = WorthTable(rates, mac, impl=impl).worths(family)
    log_chi, us, aps, mod = coalition_scores(family, base, control, sharing, mac.downlink)
    return PreferenceProfile.from_scores(family, log_chi, us, aps, impl=impl), base, mod


@dataclass(frozen=True)
class Matching:
    """Disjoint cells; ``mu_user[w]`` is the AP of user ``w`` or None."""

    n_users: int
    n_aps: int
    cells: tuple[Coalition, ...]

    def __post_init__(self):
        cells = tuple(sorted(self.cells, key=lambda c: c.ap))
        object.__setattr__(self, "cells", cells)
        aps = [c.ap for c in cells]
        if any(a is None for a in aps) or len(set(aps)) != len(aps):
            raise ValueError("each cell needs a distinct AP")
        seen: set[int] = set()
        for c in cells:
            if seen & set(c.users):
                raise ValueError("a user appears in two cells")
            seen |= set(c.users)

    @property
    def mu_user(self) -> tuple[int | None, ...]:
        out: list[int | None] = [None] * self.n_users
        for c in self.cells:
            for w in c.users:
                out[w] = c.ap
        return tuple(out)

    def mu_ap(self, f: int) -> tuple[int, ...]:
        for c in self.cells:
            if c.ap == f:
                return c.users
        return ()

    def cell_of_user(self, w: int) -> Coalition | None:
        for c in self.cells:
            if w in c.users:
                return c
        return None

    @property
    def unmatched(self) -> tuple[int, ...]:
        mu = self.mu_user
        return tuple(w for w in range(self.n_users) if mu[w] is None)

    def is_valid(self, caps: Sequence[int] | None = None) -> bool:
        """The three conditions of a many-to-one matching (with quotas)."""
        mu = self.mu_user
        for c in self.cells:
            if caps is not None and len(c.users) > caps[c.ap]:
                return False
            if any(mu[w] != c.ap for w in c.users):
                return False
        return all(m is None or w in self.mu_ap(m) for w, m in enumerate(mu))

    def to_json(self) -> dict:
        return {
            "cells": [{"ap": ap_label(c.ap), "users": [user_label(w) for w in c.users]} for c in self.cells],
            "unmatched": [user_label(w) for w in self.unmatched],
        }


def matching_from_ids(profile: PreferenceProfile, ids) -> Matching:
    return Matching(profile.n_users, profile.n_aps, tuple(profile.family.coalition(int(c)) for c in ids))


@dataclass
class BdaaResult:
    matching: Matching
    coalition_ids: tuple[int, ...]
    proposal_count: int
    rounds: int
    trace: list[dict]
    lstar_history: list[tuple[int, list[int]]] = field(default_factory=list)  # (round, masks)


def bdaa(profile: PreferenceProfile, *, record_trace: bool = True, impl=None,
         ap_order: Sequence[int] | None = None) -> BdaaResult:
    """Backward deferred acceptance on a strict profile.

    Users propose down their reduced lists; unengaged APs counter-propose
    their best coalition within their dynamic list; users accept their best
    counter-proposal unless an AP they have not yet proposed to promises
    more (or they already hold something better). The counter-proposal loop
    repeats while a dynamic list shrinks or a new engagement forms.

    ``ap_order`` permutes the order in which simultaneous engagements are
    processed (the result does not depend on it).
    """
    fam = profile.family
    W, F = profile.n_users, profile.n_aps
    key = profile.key
    order = list(ap_order) if ap_order is not None else list(range(F))
    if sorted(order) != list(range(F)):
        raise ValueError("ap_order must be a permutation of the APs")
    prefs = [profile.user_prefs(w) for w in range(W)]
    nxt = [0] * W
    L = [0] * F
    Lstar = [0] * F
    eng_ap = [-1] * F
    eng_user = [-1] * W
    trace: list[dict] = []
    history: list[tuple[int, list[int]]] = []
    count = 0
    rnd = 0
    limit = max(1, F**3 * W**2) + W * F + 10

    def emit(event, **kw):
        if record_trace:
            trace.append({"event": event, "round": rnd, "iteration": it, **kw})

    def members(c):
        return fam.users(c)

    def break_cell(c, cause):
        f = int(fam.ap[c])
        eng_ap[f] = -1
        for w in members(c):
            eng_user[w] = -1
        emit("break", ap=ap_label(f), users=[user_label(w) for w in members(c)], cause=cause)

    it = 0
    while True:
        proposers = [w for w in range(W) if eng_user[w] < 0 and nxt[w] < len(prefs[w])]
        if not proposers:
            break
        rnd += 1
        it = 0
        for w in proposers:
            f = prefs[w][nxt[w]]
            nxt[w] += 1
            count += 1
            emit("propose", user=user_label(w), ap=ap_label(f))
            if eng_ap[f] >= 0:
                break_cell(eng_ap[f], "proposal")
            L[f] |= 1 << w
        Lstar = list(L)
        while True:
            it += 1
            if count > limit:
                raise RuntimeError("BDAA exceeded its proposal bound")
            history.append((rnd, list(Lstar)))
            offers: dict[int, int] = {}
            for f in range(F):
                if eng_ap[f] >= 0 or not Lstar[f] or not len(profile.order[f]):
                    continue
                idx = kernels.first_admissible(profile.ordered_masks[f], Lstar[f], impl=impl)
                if idx < 0:
                    continue
                c = int(profile.order[f][idx])
                offers[f] = c
                count += 1
                emit("counter", ap=ap_label(f), users=[user_label(w) for w in members(c)],
                     payoffs={user_label(w): profile.share(c, w) for w in members(c)})
            received: dict[int, list[int]] = defaultdict(list)
            for f, c in offers.items():
                for w in members(c):
                    received[w].append(c)
            accepted: dict[int, int] = {}
            rejecters: dict[int, set[int]] = defaultdict(set)
            for w in sorted(received):
                best = min(received[w], key=lambda c: key[c])
                remaining = prefs[w][nxt[w]:]
                outside = min((profile.best_key[w, f] for f in remaining), default=NO_KEY)
                held = key[eng_user[w]] if eng_user[w] >= 0 else NO_KEY
                take = outside > key[best] and held > key[best]
                for c in received[w]:
                    f = int(fam.ap[c])
                    if take and c == best:
                        accepted[w] = c
                        emit("accept", user=user_label(w), ap=ap_label(f))
                    else:
                        rejecters[f].add(w)
                        emit("reject", user=user_label(w), ap=ap_label(f))
            formed = False
            defected: dict[int, set[int]] = defaultdict(set)
            for f in order:
                c = offers.get(f)
                if c is None or not all(accepted.get(w) == c for w in members(c)):
                    continue
                for w in members(c):
                    old = eng_user[w]
                    if old >= 0:
                        g = int(fam.ap[old])
                        defected[g].add(w)
                        break_cell(old, "defection")
                eng_ap[f] = c
                for w in members(c):
                    eng_user[w] = c
                formed = True
                emit("engage", ap=ap_label(f), users=[user_label(w) for w in members(c)])
            shrunk = False
            for f in range(F):
                if eng_ap[f] >= 0:
                    continue
                drop = 0
                for w in rejecters[f] | defected[f]:
                    if eng_user[w] >= 0 and int(fam.ap[eng_user[w]]) != f and (Lstar[f] >> w) & 1:
                        drop |= 1 << w
                if drop:
                    Lstar[f] &= ~drop
                    shrunk = True
                    emit("prune", ap=ap_label(f), users=[user_label(w) for w in mask_to_users(drop)])
            if not (shrunk or formed):
                break
    ids = tuple(sorted((c for c in eng_ap if c >= 0), key=lambda c: int(fam.ap[c])))
    return BdaaResult(matching_from_ids(profile, ids), ids, count, rnd, trace, history)


def best_rssi(scenario: Scenario) -> Matching:
    """Every covered user joins its nearest covering AP (lowest index on ties)."""
    rates = scenario.rates
    d = scenario.distances()
    cells: dict[int, list[int]] = defaultdict(list)
    for w in range(scenario.n_users):
        cov = np.flatnonzero(rates.theta[w] > 0)
        if not len(cov):
            continue
        f = int(cov[np.argmin(d[w, cov])])
        cells[f].append(w)
    return Matching(scenario.n_users, scenario.n_aps, tuple(Coalition(f, tuple(us)) for f, us in cells.items()))


MAX_EXHAUSTIVE_USERS = 12


def exhaustive_optimum(family: CoalitionFamily, worths: np.ndarray) -> tuple[Matching, float]:
    """Welfare-maximising matching over the family, by exact dynamic programming.

    ``best(k, free)`` is the best welfare APs ``k..F-1`` can reach with the
    users in ``free``; each AP either stays alone or takes a listed
    coalition whose users are all free.
    """
    W, F = family.n_users, family.n_aps
    if W > MAX_EXHAUSTIVE_USERS:
        raise ValueError(f"exhaustive optimum is limited to {MAX_EXHAUSTIVE_USERS} users, got {W}")
    worths = np.asarray(worths, dtype=float)
    value = [dict() for _ in range(F)]
    for c in range(len(family)):
        if worths[c] > 0:
            value[int(family.ap[c])][int(family.masks[c])] = (float(worths[c]), c)
    cover = [0] * F
    for f in range(F):
        for m in value[f]:
            cover[f] |= m
    memo: dict[tuple[int, int], tuple[float, tuple[int, ...]]] = {}

    def best(k: int, free: int):
        if k == F:
            return 0.0, ()
        hit = memo.get((k, free))
        if hit is not None:
            return hit
        top = best(k + 1, free)
        avail = free & cover[k]
        sub = avail
        while sub:
            entry = value[k].get(sub)
            if entry is not None:
                rest = best(k + 1, free & ~sub)
                total = entry[0] + rest[0]
                if total > top[0]:
                    top = (total, (entry[1],) + rest[1])
            sub = (sub - 1) & avail
        memo[(k, free)] = top
        return top

    welfare, ids = best(0, (1 << W) - 1)
    cells = tuple(family.coalition(c) for c in ids)
    return Matching(W, F, cells), welfare
