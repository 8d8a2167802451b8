"""Independent reference implementations the tests check against.

Everything here is deliberately written the slow, obvious way (scalar loops,
plain Dijkstra, central differences) and never shares code with the library
paths it validates.
"""

import heapq
import math

import numpy as np


def dijkstra_min_cost(values, start, goal, lam=10.0, base=1.0):
    """Uniform-cost search with the planner's move model; no heuristic."""
    h, w = np.asarray(values).shape
    sqrt2 = math.sqrt(2.0)
    moves = [
        (-1, -1, sqrt2), (0, -1, 1.0), (1, -1, sqrt2),
        (-1, 0, 1.0), (1, 0, 1.0),
        (-1, 1, sqrt2), (0, 1, 1.0), (1, 1, sqrt2),
    ]
    dist = np.full((h, w), np.inf)
    dist[start[1], start[0]] = 0.0
    pq = [(0.0, start[0], start[1])]
    while pq:
        d, x, y = heapq.heappop(pq)
        if d > dist[y, x]:
            continue
        if (x, y) == tuple(goal):
            return d
        for dx, dy, step in moves:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h:
                nd = d + step * (base + lam * float(values[ny, nx]))
                if nd < dist[ny, nx]:
                    dist[ny, nx] = nd
                    heapq.heappush(pq, (nd, nx, ny))
    return None


def bce_loop(pred, target, mask, eps=1e-7):
    """Scalar-loop masked BCE; mirrors the op contract, not its code."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    total, count = 0.0, 0
    it = np.nditer(mask, flags=["multi_index"])
    for valid in it:
        if not valid:
            continue
        idx = it.multi_index
        p = min(max(pred[idx], eps), 1.0 - eps)
        t = target[idx]
        total += -(t * math.log(p) + (1.0 - t) * math.log(1.0 - p))
        count += 1
    return total / count


def bce_grad_loop(pred, target, mask, eps=1e-7):
    """Hand-derived dBCE/dpred with the clamp's flat regions zeroed."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    g = np.zeros_like(pred)
    it = np.nditer(mask, flags=["multi_index"])
    for valid in it:
        idx = it.multi_index
        if not valid:
            continue
        p = pred[idx]
        if p <= eps or p >= 1.0 - eps:
            continue
        t = target[idx]
        g[idx] = (-(t / p) + (1.0 - t) / (1.0 - p)) / count
    return g


def margin_ranking_loop(pred_pts, target_pts, penalty="pred"):
    """Double loop over point pairs, straight from the metric's definition."""
    n = len(pred_pts)
    total = 0.0
    pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            pairs += 1
            dt = target_pts[i] - target_pts[j]
            if abs(dt) <= 1e-6:
                continue
            dp = pred_pts[i] - pred_pts[j]
            if np.sign(dp) == np.sign(dt):
                continue
            total += abs(dp) if penalty == "pred" else abs(dt)
    return total / pairs


def fd_gradient(f, x, h=1e-3):
    """Central finite differences of scalar f at array x."""
    x = np.asarray(x)
    g = np.zeros(x.shape, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        fp = f()
        x[idx] = orig - h
        fm = f()
        x[idx] = orig
        g[idx] = (fp - fm) / (2.0 * h)
    return g


def relative_error(analytic, reference):
    """Global relative error between two gradient arrays."""
    analytic = np.asarray(analytic, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    denom = max(np.abs(analytic).max(), np.abs(reference).max(), 1e-8)
    return float(np.abs(analytic - reference).max() / denom)


def enumerate_contexts(L, n):
    """Count distinct pair-level contexts by direct enumeration."""
    from itertools import combinations, permutations

    pairs = list(combinations(range(L), 2))
    count = 0
    for subset in combinations(range(len(pairs)), n):
        for _ in permutations(subset):
            count += 1
    return count
