"""Players, rates, scenarios and the feasible coalition family.

Indices are 0-based everywhere inside the library. :class:`PlayerId` carries
the 1-based labels (``w1``, ``f3``) used in files, traces and reports.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

MBPS = 1e6

#: (radius in metres, rate in bit/s), innermost first.  The radii are a
#: calibration choice of this package, not published values.
DEFAULT_RINGS: tuple[tuple[float, float], ...] = (
    (30.0, 300 * MBPS),
    (70.0, 54 * MBPS),
    (110.0, 11 * MBPS),
)

MAX_USERS = 63  # coalitions are stored as uint64 bitmasks


class Kind(str, enum.Enum):
    AP = "f"
    USER = "w"


@dataclass(frozen=True, order=True)
class PlayerId:
    kind: Kind
    index: int  # 1-based

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"player index must be >= 1, got {self.index}")

    def __str__(self) -> str:
        return f"{self.kind.value}{self.index}"

    @classmethod
    def parse(cls, label: str) -> "PlayerId":
        label = label.strip()
        try:
            kind = Kind(label[0])
            return cls(kind, int(label[1:]))
        except (ValueError, IndexError):
            raise ValueError(f"bad player label {label!r}") from None

    @classmethod
    def user(cls, i: int) -> "PlayerId":
        return cls(Kind.USER, i + 1)

    @classmethod
    def ap(cls, f: int) -> "PlayerId":
        return cls(Kind.AP, f + 1)


def user_label(i: int) -> str:
    return f"w{i + 1}"


def ap_label(f: int) -> str:
    return f"f{f + 1}"


class RateMatrix:
    """Physical rates ``theta[w, f]`` in bit/s; 0 means out of coverage."""

    def __init__(self, theta):
        arr = np.array(theta, dtype=float)
        if arr.ndim != 2:
            raise ValueError("rate matrix must be 2-D (users x APs)")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("rates must be finite and nonnegative")
        arr.setflags(write=False)
        self.theta = arr

    @property
    def n_users(self) -> int:
        return self.theta.shape[0]

    @property
    def n_aps(self) -> int:
        return self.theta.shape[1]

    def __getitem__(self, key):
        return self.theta[key]

    def __eq__(self, other):
        return isinstance(other, RateMatrix) and np.array_equal(self.theta, other.theta)

    def __repr__(self):
        return f"RateMatrix({self.theta.tolist()!r})"

    def to_list(self) -> list[list[float]]:
        return self.theta.tolist()


def validate_rings(rings: Sequence[tuple[float, float]]) -> tuple[tuple[float, float], ...]:
    rings = tuple((float(r), float(t)) for r, t in rings)
    if not rings:
        raise ValueError("at least one coverage ring is required")
    for r, t in rings:
        if r < 0:
            raise ValueError(f"negative ring radius {r}")
        if t <= 0:
            raise ValueError(f"ring rate must be positive, got {t}")
    for (r0, t0), (r1, t1) in zip(rings, rings[1:]):
        if not (r1 > r0 and t1 < t0):
            raise ValueError("rings must be strictly increasing in radius and decreasing in rate")
    return rings


@dataclass(frozen=True)
class Scenario:
    """The state of nature: positions, coverage rings and (optionally) explicit rates."""

    user_xy: np.ndarray  # (W, 2) metres
    ap_xy: np.ndarray  # (F, 2) metres
    rings: tuple[tuple[float, float], ...] = DEFAULT_RINGS
    explicit_rates: RateMatrix | None = None
    ap_quota: tuple[int | None, ...] | None = None
    name: str = ""

    def __post_init__(self):
        u = np.asarray(self.user_xy, dtype=float).reshape(-1, 2)
        a = np.asarray(self.ap_xy, dtype=float).reshape(-1, 2)
        u.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "user_xy", u)
        object.__setattr__(self, "ap_xy", a)
        object.__setattr__(self, "rings", validate_rings(self.rings))
        if self.explicit_rates is not None:
            if self.explicit_rates.theta.shape != (len(u), len(a)):
                raise ValueError(
                    f"explicit rates have shape {self.explicit_rates.theta.shape}, "
                    f"expected {(len(u), len(a))}"
                )
        if self.ap_quota is not None and len(self.ap_quota) != len(a):
            raise ValueError("ap_quota length must equal the number of APs")

    @property
    def n_users(self) -> int:
        return len(self.user_xy)

    @property
    def n_aps(self) -> int:
        return len(self.ap_xy)

    @property
    def rates(self) -> RateMatrix:
        if self.explicit_rates is not None:
            return self.explicit_rates
        return rates_from_geometry(self)

    def distances(self) -> np.ndarray:
        d = self.user_xy[:, None, :] - self.ap_xy[None, :, :]
        return np.hypot(d[..., 0], d[..., 1])

    @classmethod
    def from_rates(cls, theta, name: str = "") -> "Scenario":
        rm = theta if isinstance(theta, RateMatrix) else RateMatrix(theta)
        return cls(
            user_xy=np.zeros((rm.n_users, 2)),
            ap_xy=np.zeros((rm.n_aps, 2)),
            explicit_rates=rm,
            name=name,
        )


def rates_from_geometry(scenario: Scenario) -> RateMatrix:
    """Rate of the innermost ring whose (closed) disc contains the user."""
    rings = validate_rings(scenario.rings)
    dist = scenario.distances()
    theta = np.zeros_like(dist)
    # outermost first so inner rings overwrite
    for radius, rate in reversed(rings):
        theta[dist <= radius] = rate
    return RateMatrix(theta)


def acceptable_users(f: int, rates: RateMatrix) -> tuple[int, ...]:
    if not 0 <= f < rates.n_aps:
        raise IndexError(f"unknown AP index {f} (have {rates.n_aps} APs)")
    return tuple(int(w) for w in np.flatnonzero(rates.theta[:, f] > 0))


def covering_aps(w: int, rates: RateMatrix) -> tuple[int, ...]:
    return tuple(int(f) for f in np.flatnonzero(rates.theta[w, :] > 0))


@dataclass(frozen=True)
class Coalition:
    """An AP with 1..q users, or a lone user (``ap is None``)."""

    ap: int | None
    users: tuple[int, ...]

    def __post_init__(self):
        users = tuple(sorted(set(self.users)))
        if len(users) != len(self.users):
            raise ValueError("duplicate users in coalition")
        object.__setattr__(self, "users", users)
        if self.ap is None and len(users) != 1:
            raise ValueError("a coalition without AP must be a single user")
        if self.ap is not None and not users:
            raise ValueError("AP-only coalitions are not in the family")

    @property
    def size(self) -> int:
        return len(self.users) + (self.ap is not None)

    @property
    def members(self) -> tuple[PlayerId, ...]:
        out = tuple(PlayerId.user(w) for w in self.users)
        if self.ap is not None:
            out += (PlayerId.ap(self.ap),)
        return out

    @property
    def mask(self) -> int:
        return users_to_mask(self.users)

    def composition(self, rates: RateMatrix, rate_set: Sequence[float]) -> np.ndarray:
        """Proportion of members at each rate of ``rate_set`` (AP counted at the top rate)."""
        rate_set = sorted(rate_set, reverse=True)
        counts = np.zeros(len(rate_set))
        if self.ap is None:
            return counts
        member_rates = [rates[w, self.ap] for w in self.users] + [rate_set[0]]
        for r in member_rates:
            counts[rate_set.index(r)] += 1
        return counts / counts.sum()

    def label(self) -> str:
        us = ",".join(user_label(w) for w in self.users)
        if self.ap is None:
            return us
        return f"{{{us};{ap_label(self.ap)}}}"

    def __str__(self):
        return self.label()


def users_to_mask(users: Sequence[int]) -> int:
    m = 0
    for u in users:
        m |= 1 << int(u)
    return m


def mask_to_users(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def enumerate_coalitions(f: int, rates: RateMatrix, quota: int) -> list[Coalition]:
    """All ``{f} | J`` with ``J`` acceptable to ``f`` and ``1 <= |J| <= quota``.

    Ordered by size, then lexicographically on user indices.
    """
    if quota < 1:
        raise ValueError("quota must be >= 1")
    acc = acceptable_users(f, rates)
    return [
        Coalition(f, combo)
        for k in range(1, min(quota, len(acc)) + 1)
        for combo in itertools.combinations(acc, k)
    ]


def count_coalitions(n_acceptable: int, quota: int) -> int:
    return sum(math.comb(n_acceptable, k) for k in range(1, min(quota, n_acceptable) + 1))


@dataclass
class CoalitionFamily:
    """Flat (CSR) storage of every AP coalition of the game.

    Coalitions of AP ``f`` occupy the contiguous block ``by_ap[f]``. Singleton
    user coalitions are implicit (worth 0) and not stored.
    """

    n_users: int
    n_aps: int
    ap: np.ndarray  # int64 per coalition
    offsets: np.ndarray  # int64, len n+1
    members: np.ndarray  # int64 user indices
    masks: np.ndarray  # uint64
    by_ap: list[slice] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.ap)

    @property
    def n_user_members(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def sizes(self) -> np.ndarray:
        return self.n_user_members + 1

    def users(self, c: int) -> tuple[int, ...]:
        return tuple(int(u) for u in self.members[self.offsets[c] : self.offsets[c + 1]])

    def coalition(self, c: int) -> Coalition:
        return Coalition(int(self.ap[c]), self.users(c))

    def __iter__(self) -> Iterator[Coalition]:
        return (self.coalition(c) for c in range(len(self)))

    def index(self) -> dict[tuple[int, int], int]:
        """``(ap, mask) -> coalition id``."""
        return {(int(a), int(m)): c for c, (a, m) in enumerate(zip(self.ap, self.masks))}

    @classmethod
    def from_coalitions(cls, n_users: int, n_aps: int,
                        coalitions: Sequence[Coalition]) -> "CoalitionFamily":
        """Family of explicitly listed coalitions, grouped by AP in listing order."""
        groups: list[list[Coalition]] = [[] for _ in range(n_aps)]
        for c in coalitions:
            if c.ap is None or not 0 <= c.ap < n_aps:
                raise ValueError(f"coalition {c} has no valid AP")
            if any(not 0 <= w < n_users for w in c.users):
                raise ValueError(f"coalition {c} has an unknown user")
            groups[c.ap].append(c)
        seen = {(c.ap, c.users) for c in coalitions}
        if len(seen) != len(coalitions):
            raise ValueError("duplicate coalitions")
        aps, offs, mems, masks, by_ap = [], [0], [], [], []
        for f, grp in enumerate(groups):
            by_ap.append(slice(len(aps), len(aps) + len(grp)))
            for c in grp:
                aps.append(f)
                mems.extend(c.users)
                offs.append(offs[-1] + len(c.users))
                masks.append(c.mask)
        return cls(n_users, n_aps, np.asarray(aps, dtype=np.int64),
                   np.asarray(offs, dtype=np.int64), np.asarray(mems, dtype=np.int64),
                   np.asarray(masks, dtype=np.uint64), by_ap)

    @classmethod
    def build(cls, rates: RateMatrix, caps: Sequence[int]) -> "CoalitionFamily":
        W, F = rates.n_users, rates.n_aps
        if W > MAX_USERS:
            raise ValueError(f"at most {MAX_USERS} users are supported, got {W}")
        if len(caps) != F:
            raise ValueError("one cap per AP is required")
        aps, offs, mems, masks, by_ap = [], [0], [], [], []
        start = 0
        for f in range(F):
            acc = acceptable_users(f, rates)
            n = 0
            for k in range(1, min(int(caps[f]), len(acc)) + 1):
                for combo in itertools.combinations(acc, k):
                    mems.extend(combo)
                    offs.append(offs[-1] + k)
                    m = 0
                    for u in combo:
                        m |= 1 << u
                    masks.append(m)
                    n += 1
            aps.extend([f] * n)
            by_ap.append(slice(start, start + n))
            start += n
        return cls(
            n_users=W,
            n_aps=F,
            ap=np.asarray(aps, dtype=np.int64),
            offsets=np.asarray(offs, dtype=np.int64),
            members=np.asarray(mems, dtype=np.int64),
            masks=np.asarray(masks, dtype=np.uint64),
            by_ap=by_ap,
        )


@dataclass(frozen=True)
class QuotaVector:
    """Fractional cardinality targets and integer user caps, one per AP.

    ``qhat[f]`` is a target for ``|C|`` (the AP counts as a member), so an AP
    expected to serve 2.33 users has ``qhat == 3.33``. ``caps[f]`` bounds the
    number of *users* an AP may be matched with.
    """

    qhat: tuple[float, ...]
    caps: tuple[int, ...]

    def __post_init__(self):
        if len(self.qhat) != len(self.caps):
            raise ValueError("qhat and caps must have the same length")
        if any(c < 1 for c in self.caps):
            raise ValueError("caps must be positive integers")
        if any(q < 0 for q in self.qhat):
            raise ValueError("qhat must be nonnegative")
