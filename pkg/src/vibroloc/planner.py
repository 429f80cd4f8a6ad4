"""Stroke ordering as a generalized TSP over orientation choices.

Each stroke may be drawn forward or in reverse, so it contributes a cluster
of two nodes (entry = first or last point).  A plan is an open path from a
home position through every stroke exactly once; its cost is the summed
pen-up travel ``|home -> entry_1| + sum |exit_i -> entry_{i+1}|``.  Pen-down
distance inside strokes is order-independent and excluded.

``nearest_neighbor_plan`` builds a greedy tour, ``two_opt_improve`` refines
it with segment reversals (flipping orientations of the reversed run, which
preserves all interior edge costs), and ``brute_force_optimal`` is the
exhaustive oracle for small instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

BRUTE_FORCE_MAX_STROKES = 8


@dataclass(frozen=True)
class GtspInstance:
    """Strokes (each a polyline of >= 2 points) plus the pen home position."""

    strokes: Tuple[np.ndarray, ...]
    home: np.ndarray

    def __post_init__(self):
        strokes = tuple(np.asarray(s, dtype=np.float64) for s in self.strokes)
        if not strokes:
            raise ValueError("instance needs at least one stroke")
        dim = strokes[0].shape[1] if strokes[0].ndim == 2 else 0
        for s in strokes:
            if s.ndim != 2 or s.shape[0] < 2 or s.shape[1] != dim:
                raise ValueError("each stroke must be a polyline (>= 2 points, common dim)")
        home = np.asarray(self.home, dtype=np.float64).reshape(dim)
        object.__setattr__(self, "strokes", strokes)
        object.__setattr__(self, "home", home)

    @property
    def n_strokes(self) -> int:
        return len(self.strokes)

    def entry(self, index: int, reverse: bool) -> np.ndarray:
        return self.strokes[index][-1 if reverse else 0]

    def exit(self, index: int, reverse: bool) -> np.ndarray:
        return self.strokes[index][0 if reverse else -1]


@dataclass(frozen=True)
class StrokePlan:
    order: Tuple[int, ...]
    reversed_flags: Tuple[bool, ...]
    cost_mm: float

    def to_dict(self) -> dict:
        return {"order": list(self.order),
                "reversed": [bool(r) for r in self.reversed_flags],
                "cost_mm": self.cost_mm}


def _check_permutation(instance: GtspInstance, order: Sequence[int],
                       reversed_flags: Sequence[bool]) -> None:
    if sorted(order) != list(range(instance.n_strokes)):
        raise ValueError("plan order must be a permutation of all strokes")
    if len(reversed_flags) != len(order):
        raise ValueError("one orientation flag per stroke required")


def plan_cost(instance: GtspInstance, plan: StrokePlan) -> float:
    """Recompute the pen-up travel of a plan from scratch."""
    order, flags = plan.order, plan.reversed_flags
    _check_permutation(instance, order, flags)
    cost = float(np.linalg.norm(instance.home - instance.entry(order[0], flags[0])))
    for k in range(len(order) - 1):
        cost += float(np.linalg.norm(instance.exit(order[k], flags[k])
                                     - instance.entry(order[k + 1], flags[k + 1])))
    return cost


def make_plan(instance: GtspInstance, order: Sequence[int],
              reversed_flags: Sequence[bool]) -> StrokePlan:
    plan = StrokePlan(tuple(order), tuple(bool(r) for r in reversed_flags), 0.0)
    return StrokePlan(plan.order, plan.reversed_flags, plan_cost(instance, plan))


def nearest_neighbor_plan(instance: GtspInstance) -> StrokePlan:
    """Greedy construction: repeatedly enter the closest unvisited stroke.

    Ties go to the lower stroke index, forward before reverse.
    """
    remaining = list(range(instance.n_strokes))
    position = instance.home
    order: List[int] = []
    flags: List[bool] = []
    while remaining:
        best, best_d = None, np.inf
        for idx in remaining:
            for rev in (False, True):
                d = float(np.linalg.norm(position - instance.entry(idx, rev)))
                if d < best_d:  # strict: earlier candidates win ties
                    best, best_d = (idx, rev), d
        idx, rev = best
        order.append(idx)
        flags.append(rev)
        remaining.remove(idx)
        position = instance.exit(idx, rev)
    return make_plan(instance, order, flags)


def _travel_tables(instance: GtspInstance):
    """Pairwise pen-up distances: D[a, ra, b, rb] and home-to-entry H[b, rb]."""
    n = instance.n_strokes
    entries = np.stack([[instance.entry(i, False), instance.entry(i, True)] for i in range(n)])
    exits = np.stack([[instance.exit(i, False), instance.exit(i, True)] for i in range(n)])
    diff = exits[:, :, None, None, :] - entries[None, None, :, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    home_d = np.sqrt(np.sum((entries - instance.home) ** 2, axis=-1))
    return dist, home_d


def _orientation_dp(order: Sequence[int], dist: np.ndarray, home_d: np.ndarray):
    """Exact minimum-cost orientation assignment for a fixed stroke order.

    Dynamic program over the two orientation nodes per stroke; ties prefer
    forward.  O(n) table lookups per call.
    """
    n = len(order)
    dp0, dp1 = float(home_d[order[0], 0]), float(home_d[order[0], 1])
    back: List[Tuple[int, int]] = []
    for k in range(1, n):
        a, b = order[k - 1], order[k]
        c00, c01 = dp0 + dist[a, 0, b, 0], dp0 + dist[a, 0, b, 1]
        c10, c11 = dp1 + dist[a, 1, b, 0], dp1 + dist[a, 1, b, 1]
        p0 = 0 if c00 <= c10 else 1
        p1 = 0 if c01 <= c11 else 1
        dp0 = c00 if p0 == 0 else c10
        dp1 = c01 if p1 == 0 else c11
        back.append((p0, p1))
    r = 0 if dp0 <= dp1 else 1
    cost = dp0 if r == 0 else dp1
    flags = [bool(r)]
    for k in range(n - 1, 0, -1):
        r = back[k - 1][r]
        flags.append(bool(r))
    return tuple(reversed(flags)), float(cost)


def best_orientations(instance: GtspInstance, order: Sequence[int]) -> Tuple[Tuple[bool, ...], float]:
    """Best orientation flags and resulting cost for a fixed stroke order."""
    dist, home_d = _travel_tables(instance)
    return _orientation_dp(order, dist, home_d)


def _descend(order: List[int], start_cost: float, dist: np.ndarray,
             home_d: np.ndarray) -> Tuple[List[int], Tuple[bool, ...], float]:
    """Run local descent from one starting order; returns a local optimum.

    Moves over the stroke order: segment reversals, chain relocations
    (or-opt, chains of 1 to 3 strokes), and pairwise swaps.  Every candidate
    order is scored with its exact best orientation assignment, so plain
    orientation flips are subsumed.
    """
    n = len(order)
    order = list(order)
    flags, cost = _orientation_dp(order, dist, home_d)
    if cost > start_cost:  # descent never worsens the plan it was given
        cost = start_cost

    def try_adopt(cand_order: List[int]) -> bool:
        nonlocal order, flags, cost
        cand_flags, cand_cost = _orientation_dp(cand_order, dist, home_d)
        if cand_cost < cost - 1e-9:
            order, flags, cost = list(cand_order), cand_flags, cand_cost
            return True
        return False

    improved = True
    while improved:
        improved = False
        for i in range(n):
            for j in range(i + 1, n):
                if try_adopt(order[:i] + order[i:j + 1][::-1] + order[j + 1:]):
                    improved = True
        for length in (1, 2, 3):
            for i in range(n - length + 1):
                chain = order[i:i + length]
                rest = order[:i] + order[i + length:]
                moved = False
                for m in range(len(rest) + 1):
                    if m == i and length > 1:
                        # reinserting in place forward is a no-op; reversed is not
                        if try_adopt(rest[:m] + chain[::-1] + rest[m:]):
                            improved = moved = True
                            break
                        continue
                    if try_adopt(rest[:m] + chain + rest[m:]):
                        improved = moved = True
                        break
                    if length > 1 and try_adopt(rest[:m] + chain[::-1] + rest[m:]):
                        improved = moved = True
                        break
                if moved:
                    continue
        for i in range(n):
            for j in range(i + 1, n):
                cand = list(order)
                cand[i], cand[j] = cand[j], cand[i]
                if try_adopt(cand):
                    improved = True
    return order, flags, cost


def _greedy_order(instance: GtspInstance, first: int) -> List[int]:
    """Nearest-neighbor order construction with a forced first stroke."""
    remaining = [i for i in range(instance.n_strokes) if i != first]
    order = [first]
    d0 = [float(np.linalg.norm(instance.home - instance.entry(first, rev)))
          for rev in (False, True)]
    position = instance.exit(first, d0[1] < d0[0])
    while remaining:
        best, best_d, best_rev = None, np.inf, False
        for idx in remaining:
            for rev in (False, True):
                d = float(np.linalg.norm(position - instance.entry(idx, rev)))
                if d < best_d:
                    best, best_d, best_rev = idx, d, rev
        order.append(best)
        remaining.remove(best)
        position = instance.exit(best, best_rev)
    return order

# Small instances afford several descent starts; beyond this, one descent
# from the given plan keeps planning time sensible for large drawings.
MULTI_START_MAX_STROKES = 10


def two_opt_improve(instance: GtspInstance, plan: StrokePlan) -> StrokePlan:
    """Improve a plan by local search until no improving move remains.

    Descends from the given plan (and, for small instances, from a handful
    of deterministic alternative starting orders, keeping the best result).
    The returned cost never exceeds the input cost; an already-optimal plan
    comes back unchanged because improvements must be strict.
    """
    _check_permutation(instance, plan.order, plan.reversed_flags)
    n = instance.n_strokes
    dist, home_d = _travel_tables(instance)
    input_cost = plan_cost(instance, plan)

    order, flags, cost = _descend(list(plan.order), input_cost, dist, home_d)
    if cost > input_cost - 1e-9:  # keep the input verbatim unless strictly beaten
        order, flags, cost = list(plan.order), list(plan.reversed_flags), input_cost

    if n <= MULTI_START_MAX_STROKES:
        starts = [list(range(n))] + [_greedy_order(instance, s) for s in range(n)]
        for start in starts:
            o2, f2, c2 = _descend(start, np.inf, dist, home_d)
            if c2 < cost - 1e-9:
                order, flags, cost = o2, f2, c2

    # Iterated local search: kick the incumbent with a double bridge and
    # re-descend.  The kick rng is fixed, so results stay deterministic and
    # depend only on stroke indices (hence translation invariant).
    if n >= 4:
        kick_rng = np.random.default_rng(8237)
        n_kicks = 10 if n <= MULTI_START_MAX_STROKES else 3
        for _ in range(n_kicks):
            cuts = np.sort(kick_rng.choice(np.arange(1, n), size=3, replace=False))
            a, b, c = (int(x) for x in cuts)
            kicked = order[:a] + order[b:c] + order[a:b] + order[c:]
            o2, f2, c2 = _descend(kicked, np.inf, dist, home_d)
            if c2 < cost - 1e-9:
                order, flags, cost = o2, f2, c2
    return make_plan(instance, order, flags)


def plan_strokes(instance: GtspInstance) -> StrokePlan:
    """Default heuristic: greedy construction plus 2-opt refinement."""
    return two_opt_improve(instance, nearest_neighbor_plan(instance))


def brute_force_optimal(instance: GtspInstance) -> StrokePlan:
    """Exhaustive optimum over all n! * 2^n plans (n <= 8).

    Ties resolve to the lexicographically smallest (order, orientations)
    because candidates are scanned in that order and kept only on strict
    improvement.
    """
    n = instance.n_strokes
    if n > BRUTE_FORCE_MAX_STROKES:
        raise ValueError(f"brute force supports at most {BRUTE_FORCE_MAX_STROKES} strokes, got {n}")
    dist, home_d = _travel_tables(instance)
    combos = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.intp)
    best_cost = np.inf
    best: Optional[Tuple[Tuple[int, ...], Tuple[bool, ...]]] = None
    for perm in itertools.permutations(range(n)):
        costs = home_d[perm[0], combos[:, 0]].copy()
        for k in range(n - 1):
            costs += dist[perm[k], combos[:, k], perm[k + 1], combos[:, k + 1]]
        k_best = int(np.argmin(costs))  # first hit = lexicographic orientations
        if costs[k_best] < best_cost:
            best_cost = float(costs[k_best])
            best = (perm, tuple(bool(b) for b in combos[k_best]))
    return make_plan(instance, best[0], best[1])


def apply_plan(strokes: Sequence[np.ndarray], plan: StrokePlan) -> List[np.ndarray]:
    """Reorder (and geometrically reverse) strokes according to a plan."""
    out = []
    for idx, rev in zip(plan.order, plan.reversed_flags):
        s = np.asarray(strokes[idx], dtype=np.float64)
        out.append(s[::-1].copy() if rev else s.copy())
    return out
