"""Brute-force stability oracles for small instances.

Matchings are enumerated exhaustively, so everything here is meant for a
handful of players: the core checks refuse more than 6 users or 3 APs.
Preferences come from a :class:`~wlanmatch.matching.PreferenceProfile`; a
player ranks its cell by the cell's key and being alone last.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .matching import NO_KEY, Matching, PreferenceProfile
from .model import Coalition, Kind, PlayerId

MAX_CORE_USERS = 6
MAX_CORE_APS = 3


@dataclass(frozen=True)
class StabilityReport:
    is_pairwise_stable: bool
    core_member: bool | None  # None when the instance is too large to enumerate
    weak_core_member: bool | None
    blocking_witness: tuple | None = None
    warning: str | None = None

    def to_json(self) -> dict:
        w = self.blocking_witness
        return {
            "is_pairwise_stable": self.is_pairwise_stable,
            "core_member": self.core_member,
            "weak_core_member": self.weak_core_member,
            "blocking_witness": None if w is None else [str(x) for x in w],
            "warning": self.warning,
        }


class _Ranker:
    """Key of each player's cell under a matching (``NO_KEY`` when alone)."""

    def __init__(self, profile: PreferenceProfile):
        self.profile = profile
        self.index = profile.family.index()

    def key_of(self, cell: Coalition) -> int:
        c = self.index.get((cell.ap, cell.mask))
        return NO_KEY if c is None else int(self.profile.key[c])

    def player_keys(self, mu: Matching) -> tuple[np.ndarray, np.ndarray]:
        uk = np.full(mu.n_users, NO_KEY, dtype=np.int64)
        ak = np.full(mu.n_aps, NO_KEY, dtype=np.int64)
        for cell in mu.cells:
            k = self.key_of(cell)
            ak[cell.ap] = k
            for w in cell.users:
                uk[w] = k
        return uk, ak


def _listed(profile: PreferenceProfile) -> Iterator[tuple[int, int, int, tuple[int, ...]]]:
    fam = profile.family
    for c in range(len(fam)):
        k = int(profile.key[c])
        if k != NO_KEY:
            yield c, k, int(fam.ap[c]), fam.users(c)


def enumerate_matchings(profile: PreferenceProfile, caps: Sequence[int] | None = None) -> Iterator[Matching]:
    """Every matching whose cells are listed coalitions (including the empty one)."""
    fam = profile.family
    W, F = profile.n_users, profile.n_aps
    per_ap: list[list[tuple[int, tuple[int, ...]]]] = [[] for _ in range(F)]
    for c, _, f, us in _listed(profile):
        if caps is None or len(us) <= caps[f]:
            per_ap[f].append((int(fam.masks[c]), us))

    def rec(f, used, cells):
        if f == F:
            yield Matching(W, F, tuple(cells))
            return
        yield from rec(f + 1, used, cells)
        for m, us in per_ap[f]:
            if not m & used:
                yield from rec(f + 1, used | m, cells + [Coalition(f, us)])

    yield from rec(0, 0, [])


def _guard(profile: PreferenceProfile):
    if profile.n_users > MAX_CORE_USERS or profile.n_aps > MAX_CORE_APS:
        raise ValueError(
            f"core enumeration is limited to {MAX_CORE_USERS} users and {MAX_CORE_APS} APs"
        )


def blocking_coalition(mu: Matching, profile: PreferenceProfile, weak: bool = False):
    """A listed coalition all of whose members prefer it to their cell under ``mu``.

    Any matching that dominates ``mu`` via some coalition has a cell that
    blocks on its own (members of the dominating coalition are partitioned
    into cells and lone players, and a lone player cannot gain), so scanning
    single cells decides (weak) domination. With strict preferences weak and
    strict domination coincide; ``weak`` is kept for symmetry.
    """
    uk, ak = _Ranker(profile).player_keys(mu)
    for c, k, f, us in _listed(profile):
        better_ap = k < ak[f]
        better_users = [k < uk[w] for w in us]
        if weak:
            same = all(k == uk[w] for w in us) and k == ak[f]
            if not same and (k <= ak[f]) and all(k <= uk[w] for w in us):
                return profile.family.coalition(c)
        elif better_ap and all(better_users):
            return profile.family.coalition(c)
    return None


def check_core(mu: Matching, profile: PreferenceProfile, weak: bool = False,
               matchings: Iterable[Matching] | None = None):
    """``(True, None)`` if no matching (weakly) dominates ``mu``.

    Every matching is enumerated. Closure forces a dominating coalition to
    be a union of the other matching's cells and lone players. Returns the
    witness ``(dominating matching, coalition players)`` otherwise.
    """
    _guard(profile)
    rk = _Ranker(profile)
    uk, ak = rk.player_keys(mu)
    for nu in matchings if matchings is not None else enumerate_matchings(profile):
        # blocks: cells of nu and lone players; closure forces unions of them
        blocks = []
        for cell in nu.cells:
            k = rk.key_of(cell)
            ws = list(cell.users)
            gains = [k < uk[w] for w in ws] + [k < ak[cell.ap]]
            holds = [k <= uk[w] for w in ws] + [k <= ak[cell.ap]]
            blocks.append((cell.members, all(gains), all(holds), any(gains)))
        matched = {w for cell in nu.cells for w in cell.users}
        matched_aps = {cell.ap for cell in nu.cells}
        for w in range(mu.n_users):
            if w not in matched:
                blocks.append(((PlayerId.user(w),), False, uk[w] == NO_KEY, False))
        for f in range(mu.n_aps):
            if f not in matched_aps:
                blocks.append(((PlayerId.ap(f),), False, ak[f] == NO_KEY, False))
        # a union of blocks works iff one of its blocks does: strict gains
        # must hold everywhere, and a weak witness needs one gaining block
        # whose members all weakly gain
        for members, gain_all, hold_all, gain_any in blocks:
            if (hold_all and gain_any) if weak else gain_all:
                return False, (nu, members)
    return True, None


def core_matchings(profile: PreferenceProfile, weak: bool = False) -> list[Matching]:
    """All matchings not dominated via any single cell (see :func:`blocking_coalition`)."""
    _guard(profile)
    return [mu for mu in enumerate_matchings(profile) if blocking_coalition(mu, profile, weak) is None]


def greedy_structure(profile: PreferenceProfile) -> Matching:
    """Take the best remaining coalition whose players are all free, repeatedly."""
    fam = profile.family
    used_users = 0
    used_aps: set[int] = set()
    cells = []
    for c in np.argsort(profile.key, kind="stable"):
        if profile.key[c] == NO_KEY:
            break
        f = int(fam.ap[c])
        m = int(fam.masks[c])
        if f in used_aps or m & used_users:
            continue
        used_aps.add(f)
        used_users |= m
        cells.append(fam.coalition(int(c)))
    return Matching(profile.n_users, profile.n_aps, tuple(cells))


def check_pairwise(mu: Matching, profile: PreferenceProfile):
    """Blocking by a single player or by a user-AP pair.

    A pair ``(w, f)`` blocks when the AP can drop some of its current users
    and add ``w`` so that both ``w`` and ``f`` strictly gain; the remaining
    users then keep their AP (the coalition is listed and the pair decides).
    """
    rk = _Ranker(profile)
    uk, ak = rk.player_keys(mu)
    for cell in mu.cells:
        if rk.key_of(cell) == NO_KEY:
            return False, (PlayerId.ap(cell.ap),)
    fam = profile.family
    for c, k, f, us in _listed(profile):
        current = set(mu.mu_ap(f))
        for w in us:
            if w in current:
                continue
            rest = set(us) - {w}
            if rest <= current and k < uk[w] and k < ak[f]:
                return False, (PlayerId.user(w), PlayerId.ap(f))
    return True, None


def stability_report(mu: Matching, profile: PreferenceProfile) -> StabilityReport:
    pw, pw_w = check_pairwise(mu, profile)
    if profile.n_users > MAX_CORE_USERS or profile.n_aps > MAX_CORE_APS:
        return StabilityReport(pw, None, None, pw_w,
                               f"core checks skipped above {MAX_CORE_USERS} users or {MAX_CORE_APS} APs")
    core, core_w = check_core(mu, profile)
    weak, weak_w = check_core(mu, profile, weak=True)
    witness = core_w[1] if core_w else (weak_w[1] if weak_w else pw_w)
    return StabilityReport(pw, core, weak, witness)


# --- properties of group preferences -------------------------------------------------

GroupPref = Sequence[frozenset]  # partner sets, best first


def choice(pref: GroupPref, available: frozenset) -> frozenset:
    """Most preferred partner set contained in ``available`` (empty if none)."""
    for s in pref:
        if s <= available:
            return s
    return frozenset()


def check_substitutable(pref: GroupPref, ground: Iterable | None = None):
    """Whether ``k in Ch(S)`` implies ``k in Ch(S - l)`` for all ``S``, ``k != l``.

    Returns ``(ok, (S, k, l, Ch(S), Ch(S - l)))``. Sets are scanned largest
    first and players in sorted order, so the witness is deterministic.
    """
    ground = sorted(set().union(*pref) if ground is None else set(ground))
    for r in range(len(ground), 1, -1):
        for combo in itertools.combinations(ground, r):
            s = frozenset(combo)
            ch = choice(pref, s)
            for k in sorted(ch):
                for l in sorted(s - {k}):
                    ch2 = choice(pref, s - {l})
                    if k not in ch2:
                        return False, (s, k, l, ch, ch2)
    return True, None


def _swaps(pref: GroupPref):
    rank = {s: i for i, s in enumerate(pref)}
    for a, b in itertools.permutations(pref, 2):
        if len(a) == len(b) and len(a - b) == 1:
            (k,) = a - b
            (l,) = b - a
            yield a, b, k, l, rank[a] < rank[b]


def check_responsive(pref: GroupPref, individual: Sequence | None = None):
    """Responsiveness of a group preference.

    With ``individual`` (best first), checks that swapping ``l`` for ``k``
    improves a set iff ``k`` is ranked above ``l``. Without it, asks whether
    *some* individual order works, i.e. whether the implied constraints are
    acyclic; the witness is then a cycle of players.
    """
    if individual is not None:
        pos = {p: i for i, p in enumerate(individual)}
        for a, b, k, l, better in _swaps(pref):
            if better != (pos[k] < pos[l]):
                return False, (a, b, k, l)
        return True, None
    edges: dict = {}
    for a, b, k, l, better in _swaps(pref):
        if better:
            edges.setdefault(k, set()).add(l)
    # look for a cycle k1 > k2 > ... > k1
    state: dict = {}
    stack: list = []

    def dfs(u):
        state[u] = 1
        stack.append(u)
        for v in sorted(edges.get(u, ())):
            if state.get(v) == 1:
                return stack[stack.index(v):] + [v]
            if v not in state:
                cyc = dfs(v)
                if cyc:
                    return cyc
        stack.pop()
        state[u] = 2
        return None

    for u in sorted(edges):
        if u not in state:
            cyc = dfs(u)
            if cyc:
                return False, tuple(cyc)
    return True, None


def check_pairwise_alignment(rank: Mapping[PlayerId, Mapping[frozenset, float]]):
    """Whether every two players order their common coalitions the same way.

    ``rank[p][C]`` is player ``p``'s score for coalition ``C`` (higher is
    better), listed for the coalitions containing ``p``. Returns
    ``(ok, (a, b, C, C'))``.
    """
    players = sorted(rank)
    for a, b in itertools.combinations(players, 2):
        common = [c for c in rank[a] if c in rank[b]]
        for c1, c2 in itertools.permutations(common, 2):
            if (rank[a][c1] >= rank[a][c2]) != (rank[b][c1] >= rank[b][c2]):
                return False, (a, b, c1, c2)
    return True, None


def profile_scores(profile: PreferenceProfile) -> dict[PlayerId, dict[frozenset, float]]:
    """Each player's own share in every listed coalition containing it."""
    fam = profile.family
    out: dict[PlayerId, dict[frozenset, float]] = {}
    for c, _, f, us in _listed(profile):
        cell = fam.coalition(c)
        members = frozenset(cell.members)
        out.setdefault(PlayerId.ap(f), {})[members] = float(profile.ap_shares[c])
        for w in us:
            out.setdefault(PlayerId.user(w), {})[members] = profile.share(c, w)
    return out


# --- regularity of the coalition family ------------------------------------------------

def coalition_sets(n_users: int, n_aps: int, acceptable: Sequence[Sequence[int]],
                   caps: Sequence[int]) -> list[frozenset]:
    """The family as player sets: ``{f} | J`` with ``|J| <= q_f`` (``J`` may be
    empty) and every lone user."""
    out = []
    for f in range(n_aps):
        for k in range(0, min(caps[f], len(acceptable[f])) + 1):
            for J in itertools.combinations(acceptable[f], k):
                out.append(frozenset([PlayerId.ap(f), *(PlayerId.user(w) for w in J)]))
    out.extend(frozenset([PlayerId.user(w)]) for w in range(n_users))
    return out


def check_regularity(n_users: int, n_aps: int, caps: Sequence[int],
                     acceptable: Sequence[Sequence[int]] | None = None):
    """Conditions C1, C2 and C3 of a regular coalition family, checked directly.

    Returns ``(ok, failed_condition)`` with ``failed_condition`` one of
    ``"C1"``, ``"C2"``, ``"C3(i)"``, ``"C3(ii)"``.
    """
    if acceptable is None:
        acceptable = [tuple(range(n_users))] * n_aps
    fam = coalition_sets(n_users, n_aps, acceptable, caps)
    users = [PlayerId.user(w) for w in range(n_users)]
    aps = [PlayerId.ap(f) for f in range(n_aps)]
    everyone = frozenset(users + aps)
    famset = set(fam)
    proper = [c for c in fam if c != everyone]

    def some(*players):
        s = set(players)
        return any(s <= c for c in proper)

    for a, b in itertools.combinations(users + aps, 2):
        has = any({a, b} <= c for c in fam)
        if has != (a.kind is Kind.USER or b.kind is Kind.USER):
            return False, "C1"
    for a1, a2 in itertools.combinations(users, 2):
        for a3 in users + aps:
            if a3 in (a1, a2):
                continue
            if not any(some(a1, a2, x) and some(a2, a3, x) and some(a3, a1, x) for x in everyone):
                return False, "C2"
    for w in users:
        for a in users + aps:
            if a == w or frozenset([a, w]) in famset:
                continue
            hosts = [f for f in aps if frozenset([f, a, w]) in famset]
            if len(hosts) < 2:
                return False, "C3(i)"
    all_users = frozenset(users)
    if any(all_users <= c for c in proper):
        return False, "C3(ii)"
    return True, None


def partner_preference(profile: PreferenceProfile, w: int) -> list[frozenset]:
    """User ``w``'s ranking of partner sets (its coalitions minus itself), best first."""
    me = PlayerId.user(w)
    return [frozenset(c.members) - {me} for c in profile.coalition_prefs(w)]
