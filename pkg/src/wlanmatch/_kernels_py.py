"""NumPy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_kernels`` extension; used
when the extension is not built.
"""
import numpy as np


def coalition_worths(offsets, members, rate, ubits, utable, slot, t0, tc,
                     ap_rate, beta, ap_bits, downlink):
    """Saturation throughput (bit/s) of every coalition in a CSR block.

    ``utable`` holds, per user, the index of the MAC table its rate selects;
    tables are sorted by ascending top rate so a cell uses the smallest index
    among its members. ``beta[t, n]`` is the attempt rate for ``n`` contenders.
    """
    offsets = np.asarray(offsets, dtype=np.int64)
    members = np.asarray(members, dtype=np.int64)
    if len(offsets) < 2:
        return np.zeros(0)
    starts = offsets[:-1]
    counts = np.diff(offsets)
    dl = 1 if downlink else 0

    tab = np.minimum.reduceat(utable[members], starts)
    s = slot[tab]
    n = counts + dl
    b = beta[tab, n]
    air_s = np.add.reduceat(ubits[members] / rate[members], starts)
    air = air_s / s + counts * t0[tab]
    bits = np.add.reduceat(ubits[members], starts)
    if dl:
        air = air + ap_bits / (ap_rate[tab] * s) + t0[tab]
        bits = bits + ap_bits
    q1 = (1.0 - b) ** (n - 1)
    denom = 1.0 + b * q1 * air + (1.0 - (1.0 - b) ** n - n * b * q1) * tc[tab]
    return bits * b * (1.0 - b) ** n / denom / s


def first_admissible(masks, allowed):
    """Index of the first mask contained in ``allowed``, or -1."""
    masks = np.asarray(masks, dtype=np.uint64)
    hit = np.flatnonzero((masks & ~np.uint64(allowed)) == 0)
    return int(hit[0]) if len(hit) else -1


def min_key_per_user(masks, keys, n_users):
    """For each user, the smallest key among masks containing it (INT64_MAX if none)."""
    masks = np.asarray(masks, dtype=np.uint64)
    keys = np.asarray(keys, dtype=np.int64)
    out = np.full(n_users, np.iinfo(np.int64).max, dtype=np.int64)
    for u in range(n_users):
        sel = (masks >> np.uint64(u)) & np.uint64(1)
        if sel.any():
            out[u] = keys[sel.astype(bool)].min()
    return out
