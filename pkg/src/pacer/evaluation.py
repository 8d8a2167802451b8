"""Quantitative evaluation: tier proportions, margin ranking error, the
equivalence/ordering condition checks, and a brute-force optimality verifier.

The verifier enumerates every simple path (4-connected, length-bounded)
between start/goal pairs of a small grid and compares path costs exactly.
Cell costs are snapped to nearby rationals and summed as integers so that
"equal cost" never hinges on float rounding. Path cost is normalized per
cell (mean over visited cells): under that functional, argmin path sets are
provably invariant to positive-affine rescalings of the field, which is
precisely what the consistency check asserts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import TargetCostmap, TotalOrdering
from .plan import PlanPath


# ---------------------------------------------------------------------------
# tiers


@dataclass(frozen=True)
class TierMap:
    """low/medium/high partition of labels induced by a hidden ordering."""

    ordering: TotalOrdering

    def tier(self, label: int) -> int:
        h = (self.ordering.rank(label) - 1) / (self.ordering.L - 1)
        if h < 1 / 3:
            return 0
        if h < 2 / 3:
            return 1
        return 2


@dataclass
class TierReport:
    low: float
    medium: float
    high: float

    def as_dict(self):
        return {"low": self.low, "medium": self.medium, "high": self.high}


def tier_proportions(path, world_labels: np.ndarray, tier_map: TierMap) -> TierReport:
    """Fractions of path cells on low/medium/high terrain."""
    cells = path.cells if isinstance(path, PlanPath) else list(path)
    if not cells:
        raise ValueError("empty path")
    counts = [0, 0, 0]
    for x, y in cells:
        counts[tier_map.tier(int(world_labels[y, x]))] += 1
    n = len(cells)
    return TierReport(counts[0] / n, counts[1] / n, counts[2] / n)


# ---------------------------------------------------------------------------
# margin ranking error


def margin_ranking_error(
    pred,
    target,
    num_points: int = 500,
    rng_seed: int = 0,
    penalty: str = "pred",
) -> float:
    """Mean pairwise ranking penalty over sampled costmap points.

    Pairs whose targets differ by <= 1e-6 contribute 0; correctly ordered
    pairs contribute 0; inverted pairs contribute the predicted-cost gap
    (or the target gap with penalty="target", kept for comparison).
    """
    pred_values = pred.values if hasattr(pred, "values") else np.asarray(pred)
    if isinstance(target, TargetCostmap):
        t_values, mask = target.values, target.mask
    else:
        t_values = np.asarray(target)
        mask = np.ones_like(t_values, dtype=bool)
    if penalty not in ("pred", "target"):
        raise ValueError("penalty must be 'pred' or 'target'")
    flat_idx = np.nonzero(mask.ravel())[0]
    if len(flat_idx) < 2:
        raise ValueError("need at least two valid points")
    rng = np.random.default_rng(rng_seed)
    take = min(num_points, len(flat_idx))
    picks = rng.choice(flat_idx, size=take, replace=False)
    p = pred_values.ravel()[picks].astype(np.float64)
    t = t_values.ravel()[picks].astype(np.float64)
    i, j = np.triu_indices(take, k=1)
    dp = p[i] - p[j]
    dt = t[i] - t[j]
    ordered = np.abs(dt) > 1e-6
    wrong = ordered & (np.sign(dp) != np.sign(dt))
    gap = np.abs(dp) if penalty == "pred" else np.abs(dt)
    return float(np.where(wrong, gap, 0.0).sum() / len(i))


# ---------------------------------------------------------------------------
# equivalence / ordering condition checks


@dataclass
class NCReport:
    nc1_violation_rate: float
    nc2_violation_rate: float
    nc1_tolerance: float
    nc2_margin: float
    label_medians: Dict[int, float] = field(default_factory=dict)
    medians_sorted: bool = True


def _label_pixels(labels: np.ndarray) -> Dict[int, np.ndarray]:
    out = {}
    flat = labels.ravel()
    for lab in np.unique(flat):
        if lab >= 0:
            out[int(lab)] = np.nonzero(flat == lab)[0]
    return out


def check_nc1(
    costmap,
    labels: np.ndarray,
    eps: float = 0.1,
    num_pairs: int = 2000,
    rng_seed: int = 0,
) -> float:
    """Violation rate over sampled same-label pixel pairs (|c1-c2| > eps)."""
    values = (costmap.values if hasattr(costmap, "values") else np.asarray(costmap)).ravel()
    rng = np.random.default_rng(rng_seed)
    pools = {l: idx for l, idx in _label_pixels(labels).items() if len(idx) >= 2}
    if not pools:
        raise ValueError("no label with two or more pixels")
    labs = list(pools)
    weights = np.array([len(pools[l]) for l in labs], dtype=np.float64)
    weights /= weights.sum()
    violations = 0
    choices = rng.choice(len(labs), size=num_pairs, p=weights)
    for c in choices:
        idx = pools[labs[c]]
        a, b = rng.choice(idx, size=2, replace=False)
        if abs(float(values[a]) - float(values[b])) > eps:
            violations += 1
    return violations / num_pairs


def check_nc2(
    costmap,
    labels: np.ndarray,
    ordering: TotalOrdering,
    margin: float = 0.02,
    num_pairs: int = 2000,
    rng_seed: int = 0,
) -> float:
    """Violation rate over sampled cross-label pairs.

    For labels the ordering separates, the preferred pixel must cost at
    least ``margin`` less than the dispreferred one.
    """
    values = (costmap.values if hasattr(costmap, "values") else np.asarray(costmap)).ravel()
    rng = np.random.default_rng(rng_seed)
    pools = _label_pixels(labels)
    labs = sorted(pools)
    if len(labs) < 2:
        raise ValueError("need two distinct labels for ordering checks")
    violations = 0
    for _ in range(num_pairs):
        a, b = rng.choice(len(labs), size=2, replace=False)
        la, lb = labs[a], labs[b]
        if ordering.rank(la) > ordering.rank(lb):
            la, lb = lb, la  # la preferred
        ca = float(values[rng.choice(pools[la])])
        cb = float(values[rng.choice(pools[lb])])
        if ca >= cb - margin:
            violations += 1
    return violations / num_pairs


def nc_report(
    costmap,
    labels: np.ndarray,
    ordering: TotalOrdering,
    eps: float = 0.1,
    margin: float = 0.02,
    num_pairs: int = 2000,
    rng_seed: int = 0,
) -> NCReport:
    """Both condition checks plus the per-label median variant."""
    values = costmap.values if hasattr(costmap, "values") else np.asarray(costmap)
    flat = values.ravel()
    medians = {}
    for lab, idx in _label_pixels(labels).items():
        medians[lab] = float(np.median(flat[idx]))
    by_rank = [medians[l] for l in ordering.order if l in medians]
    medians_sorted = all(a < b for a, b in zip(by_rank, by_rank[1:]))
    return NCReport(
        nc1_violation_rate=check_nc1(costmap, labels, eps, num_pairs, rng_seed),
        nc2_violation_rate=check_nc2(costmap, labels, ordering, margin, num_pairs, rng_seed),
        nc1_tolerance=eps,
        nc2_margin=margin,
        label_medians=medians,
        medians_sorted=medians_sorted,
    )


# ---------------------------------------------------------------------------
# brute-force optimality verifier


@dataclass
class TheoremReport:
    shape: Tuple[int, int]
    bound: int
    pairs_checked: int
    nc1_cell_violations: int
    nc2_cell_violations: int
    is_positive_affine: bool
    affine_ab: Optional[Tuple[float, float]]
    argmin_mismatch_pairs: int
    h_cost_match: bool
    witness: Optional[Dict]
    argmin_overflow: bool

    @property
    def has_violations(self) -> bool:
        return self.nc1_cell_violations + self.nc2_cell_violations > 0


def _to_fractions(field_arr: np.ndarray) -> List[Fraction]:
    return [Fraction(float(v)).limit_denominator(10**9) for v in np.asarray(field_arr).ravel()]


def _scale_to_ints(fracs: List[Fraction]) -> List[int]:
    den = 1
    for f in fracs:
        den = den * f.denominator // math.gcd(den, f.denominator)
    return [int(f * den) for f in fracs]


class _BestPaths:
    """Minimum mean-cost paths to one endpoint, compared exactly."""

    __slots__ = ("total", "length", "paths", "overflow")

    def __init__(self):
        self.total = None
        self.length = 0
        self.paths = set()
        self.overflow = False

    def offer(self, total: int, length: int, path_tuple, cap: int):
        if self.total is None:
            self.total, self.length = total, length
            self.paths = {path_tuple}
            return
        cmp = total * self.length - self.total * length
        if cmp < 0:
            self.total, self.length = total, length
            self.paths = {path_tuple}
        elif cmp == 0:
            if len(self.paths) < cap:
                self.paths.add(path_tuple)
            else:
                self.overflow = True

    def mean(self) -> Fraction:
        return Fraction(self.total, self.length)


def _enumerate_from(start: int, nbrs: List[List[int]], hs: List[int], rs: List[int], bound: int, cap: int):
    """All simple paths from ``start`` up to ``bound`` cells; per endpoint,
    the argmin path sets under the H and R mean-cost functionals."""
    stats: Dict[int, Tuple[_BestPaths, _BestPaths]] = {}

    path = [start]
    on_path = {start}

    def visit():
        end = path[-1]
        entry = stats.get(end)
        if entry is None:
            entry = (_BestPaths(), _BestPaths())
            stats[end] = entry
        t = tuple(path)
        length = len(path)
        entry[0].offer(sum(hs[c] for c in path), length, t, cap)
        entry[1].offer(sum(rs[c] for c in path), length, t, cap)

    def dfs():
        visit()
        if len(path) == bound:
            return
        for nxt in nbrs[path[-1]]:
            if nxt in on_path:
                continue
            path.append(nxt)
            on_path.add(nxt)
            dfs()
            path.pop()
            on_path.remove(nxt)

    dfs()
    return stats


def _detect_affine(hf: List[Fraction], rf: List[Fraction]):
    """(a, b) with r = a*h + b and a > 0, or None."""
    pivot = None
    for i in range(len(hf)):
        for j in range(i + 1, len(hf)):
            if hf[i] != hf[j]:
                pivot = (i, j)
                break
        if pivot:
            break
    if pivot is None:  # constant H: affine iff R is constant too
        if all(r == rf[0] for r in rf):
            return Fraction(1), rf[0] - hf[0]
        return None
    i, j = pivot
    a = (rf[i] - rf[j]) / (hf[i] - hf[j])
    b = rf[i] - a * hf[i]
    if a <= 0:
        return None
    for h, r in zip(hf, rf):
        if a * h + b != r:
            return None
    return a, b


def verify_theorem(
    h_field: np.ndarray,
    r_field: np.ndarray,
    samples: Optional[Sequence[Tuple[Tuple[int, int], Tuple[int, int]]]] = None,
    bound: int = 12,
    argmin_cap: int = 20000,
) -> TheoremReport:
    """Exhaustively test the alignment conditions on a small grid.

    Two checks over all (or sampled) start/goal pairs, comparing bounded
    simple paths by exact per-cell mean cost:

    * if R is a positive-affine transform of H, the optimal path sets under
      R and H must coincide, and the R-optimal path must realize the
      H-optimal cost;
    * if R violates equivalence or ordering against H at some cell pair,
      search for a start/goal pair whose R-optimal path is H-suboptimal
      (the witness the optimality argument guarantees).
    """
    h_arr = np.asarray(h_field, dtype=np.float64)
    r_arr = np.asarray(r_field, dtype=np.float64)
    if h_arr.shape != r_arr.shape or h_arr.ndim != 2:
        raise ValueError("fields must be two identically shaped grids")
    hgt, wid = h_arr.shape
    n = hgt * wid

    hf = _to_fractions(h_arr)
    rf = _to_fractions(r_arr)
    hs = _scale_to_ints(hf)
    rs = _scale_to_ints(rf)

    # cell-level condition violations (both directions of each biconditional)
    nc1 = nc2 = 0
    for i in range(n):
        for j in range(i + 1, n):
            if (hf[i] == hf[j]) != (rf[i] == rf[j]):
                nc1 += 1
            if (hf[i] < hf[j]) != (rf[i] < rf[j]) or (hf[j] < hf[i]) != (rf[j] < rf[i]):
                nc2 += 1

    affine = _detect_affine(hf, rf)

    nbrs: List[List[int]] = []
    for idx in range(n):
        y, x = divmod(idx, wid)
        cell = []
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nx, ny = x + dx, y + dy
            if 0 <= nx < wid and 0 <= ny < hgt:
                cell.append(ny * wid + nx)
        nbrs.append(cell)

    if samples is None:
        pairs = [(s, g) for s in range(n) for g in range(s + 1, n)]
    else:
        pairs = [
            (sy * wid + sx, gy * wid + gx) for (sx, sy), (gx, gy) in samples
        ]

    starts = sorted({s for s, _ in pairs})
    per_start = {s: _enumerate_from(s, nbrs, hs, rs, bound, argmin_cap) for s in starts}

    mismatches = 0
    h_cost_match = True
    witness = None
    overflow = False
    checked = 0
    for s, g in pairs:
        stats = per_start[s].get(g)
        if stats is None or s == g:
            continue
        checked += 1
        best_h, best_r = stats
        overflow = overflow or best_h.overflow or best_r.overflow
        if affine is not None:
            if best_h.paths != best_r.paths:
                mismatches += 1
            # the R-optimal paths must realize the H-optimal cost exactly
            for p in best_r.paths:
                if Fraction(sum(hs[c] for c in p), len(p)) != best_h.mean():
                    h_cost_match = False
                    break
        if witness is None and (nc1 + nc2) > 0:
            worst = None
            for p in best_r.paths:
                hm = Fraction(sum(hs[c] for c in p), len(p))
                if worst is None or hm > worst[0]:
                    worst = (hm, p)
            if worst is not None and worst[0] > best_h.mean():
                witness = {
                    "start": (s % wid, s // wid),
                    "goal": (g % wid, g // wid),
                    "r_optimal_path": [(c % wid, c // wid) for c in worst[1]],
                    "h_cost_of_r_path": float(worst[0]),
                    "h_optimal_cost": float(best_h.mean()),
                }

    return TheoremReport(
        shape=(hgt, wid),
        bound=bound,
        pairs_checked=checked,
        nc1_cell_violations=nc1,
        nc2_cell_violations=nc2,
        is_positive_affine=affine is not None,
        affine_ab=(float(affine[0]), float(affine[1])) if affine else None,
        argmin_mismatch_pairs=mismatches,
        h_cost_match=h_cost_match,
        witness=witness,
        argmin_overflow=overflow,
    )
