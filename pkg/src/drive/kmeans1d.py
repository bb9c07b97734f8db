"""Exact 2-means clustering of 1-D data.

In one dimension an optimal 2-clustering always splits the sorted values
into a prefix and a suffix, so sorting plus prefix sums lets every split be
scored in O(1), for O(d log d) overall.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BRUTE_MAX_LEN = 24


@dataclass
class TwoMeansResult:
    c0: float
    c1: float
    assignment: np.ndarray  # bool, True -> nearer c1
    sse: float


def two_means_batch(values: np.ndarray):
    """Row-wise exact 2-means of a ``(B, d)`` array.

    Returns ``(c0, c1, assignment, sse)`` with ``c0 <= c1`` per row. Ties
    between equally good splits go to the smallest split index; constant rows
    give ``c0 == c1`` and an all-False assignment.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] == 0:
        raise ValueError("two_means_batch needs a non-empty (B, d) array")
    b, d = v.shape
    order = np.argsort(v, axis=1, kind="stable")
    s = np.take_along_axis(v, order, axis=1)
    # centering keeps the prefix-sum SSE formula away from cancellation
    shift = s.mean(axis=1, keepdims=True)
    c = s - shift
    p1 = np.cumsum(c, axis=1)
    p2 = np.cumsum(c * c, axis=1)
    tot1 = p1[:, -1:]
    tot2 = p2[:, -1:]

    assignment = np.zeros((b, d), dtype=bool)
    c0 = s[:, 0].copy()
    c1 = s[:, 0].copy()
    sse = np.zeros(b)
    live = s[:, -1] > s[:, 0]
    if d >= 2 and live.any():
        k = np.arange(1, d, dtype=np.float64)
        l1 = p1[live, :-1]
        l2 = p2[live, :-1]
        r1 = tot1[live] - l1
        r2 = tot2[live] - l2
        cost = (l2 - l1 * l1 / k) + (r2 - r1 * r1 / (d - k))
        best = np.argmin(cost, axis=1)
        rows = np.arange(len(best))
        kb = best + 1
        # sorted positions >= kb belong to the upper cluster
        upper = np.arange(d)[None, :] >= kb[:, None]
        # the prefix sums only pick the split; centroids and SSE are recomputed
        # in two passes so that tight clusters do not inherit cancellation error
        sl = s[live]
        lo = np.where(upper, 0.0, sl).sum(axis=1) / kb
        hi = np.where(upper, sl, 0.0).sum(axis=1) / (d - kb)
        c0[live] = lo
        c1[live] = hi
        sse[live] = ((sl - np.where(upper, hi[:, None], lo[:, None])) ** 2).sum(axis=1)
        idx = np.nonzero(live)[0]
        sub = np.zeros((len(idx), d), dtype=bool)
        np.put_along_axis(sub, order[idx], upper, axis=1)
        assignment[idx] = sub
    return c0, c1, assignment, sse


def two_means_exact(values) -> TwoMeansResult:
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValueError("two_means_exact needs at least one value")
    c0, c1, a, sse = two_means_batch(v[None, :])
    return TwoMeansResult(float(c0[0]), float(c1[0]), a[0], float(sse[0]))


def two_means_brute(values) -> TwoMeansResult:
    """Reference solver: score every contiguous split of the sorted values directly."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValueError("two_means_brute needs at least one value")
    if v.size > BRUTE_MAX_LEN:
        raise ValueError(f"two_means_brute is limited to {BRUTE_MAX_LEN} values")
    order = sorted(range(v.size), key=lambda i: v[i])
    s = [float(v[i]) for i in order]
    n = len(s)
    if s[0] == s[-1]:
        return TwoMeansResult(s[0], s[0], np.zeros(n, dtype=bool), 0.0)
    best = None
    for k in range(1, n):
        lo, hi = s[:k], s[k:]
        m0 = sum(lo) / len(lo)
        m1 = sum(hi) / len(hi)
        cost = sum((t - m0) ** 2 for t in lo) + sum((t - m1) ** 2 for t in hi)
        if best is None or cost < best[0]:
            best = (cost, k, m0, m1)
    cost, k, m0, m1 = best
    assignment = np.zeros(n, dtype=bool)
    for pos in range(k, n):
        assignment[order[pos]] = True
    return TwoMeansResult(m0, m1, assignment, cost)
