import json
import math

import numpy as np
import pytest

from vibroloc.planner import (
    GtspInstance,
    StrokePlan,
    apply_plan,
    brute_force_optimal,
    make_plan,
    nearest_neighbor_plan,
    plan_cost,
    plan_strokes,
    two_opt_improve,
)


def _segment(a, b):
    return np.array([a, b], dtype=np.float64)


def _random_instance(rng, n_strokes):
    strokes = []
    for _ in range(n_strokes):
        k = int(rng.integers(2, 5))
        strokes.append(rng.uniform(0.0, 100.0, size=(k, 2)))
    return GtspInstance(tuple(strokes), rng.uniform(0.0, 100.0, size=2))


def test_instance_validation():
    with pytest.raises(ValueError):
        GtspInstance((), np.zeros(2))
    with pytest.raises(ValueError):
        GtspInstance((np.zeros((1, 2)),), np.zeros(2))  # single-point stroke
    with pytest.raises(ValueError):
        GtspInstance((np.zeros((2, 2)), np.zeros((2, 3))), np.zeros(2))  # mixed dims


def test_plan_cost_single_stroke():
    inst = GtspInstance((_segment([3.0, 4.0], [10.0, 4.0]),), home=[0.0, 0.0])
    plan = make_plan(inst, [0], [False])
    assert plan.cost_mm == pytest.approx(5.0)  # |home -> (3,4)|


def test_plan_cost_end_to_end_strokes():
    inst = GtspInstance(
        (_segment([1.0, 0.0], [2.0, 0.0]), _segment([2.0, 0.0], [3.0, 0.0])),
        home=[0.0, 0.0],
    )
    plan = make_plan(inst, [0, 1], [False, False])
    assert plan.cost_mm == pytest.approx(1.0)  # zero gap between strokes


def test_plan_cost_three_stroke_layout():
    inst = GtspInstance(
        (
            _segment([1.0, 0.0], [2.0, 0.0]),
            _segment([2.0, 1.0], [3.0, 1.0]),
            _segment([0.0, 2.0], [1.0, 2.0]),
        ),
        home=[0.0, 0.0],
    )
    plan = make_plan(inst, [0, 1, 2], [False, False, False])
    assert plan.cost_mm == pytest.approx(1.0 + 1.0 + math.sqrt(10.0))


def test_plan_cost_rejects_non_permutation():
    inst = GtspInstance((_segment([0, 0], [1, 0]), _segment([2, 0], [3, 0])), [0, 0])
    with pytest.raises(ValueError):
        plan_cost(inst, StrokePlan((0, 0), (False, False), 0.0))
    with pytest.raises(ValueError):
        plan_cost(inst, StrokePlan((0, 1), (False,), 0.0))


def test_single_stroke_orientation_choice_and_tie():
    # reverse entry is closer -> reverse chosen
    inst = GtspInstance((_segment([10.0, 0.0], [1.0, 0.0]),), home=[0.0, 0.0])
    assert nearest_neighbor_plan(inst).reversed_flags == (True,)
    assert brute_force_optimal(inst).reversed_flags == (True,)
    # symmetric entries -> forward by tie-break
    inst = GtspInstance((_segment([1.0, 0.0], [-1.0, 0.0]),), home=[0.0, 0.0])
    assert nearest_neighbor_plan(inst).reversed_flags == (False,)
    assert brute_force_optimal(inst).reversed_flags == (False,)


def test_nearest_neighbor_recovers_scrambled_line():
    xs = [6.0, 0.0, 4.0, 8.0, 2.0]  # stroke i starts at xs[i], runs 1 mm right
    strokes = tuple(_segment([x, 0.0], [x + 1.0, 0.0]) for x in xs)
    inst = GtspInstance(strokes, home=[0.0, 0.0])
    plan = nearest_neighbor_plan(inst)
    assert plan.order == (1, 4, 2, 0, 3)  # left-to-right geometric order
    assert plan.reversed_flags == (False,) * 5
    assert plan.cost_mm == pytest.approx(4.0)  # four 1 mm gaps


def test_two_opt_uncrosses_backtracking_plan():
    inst = GtspInstance(
        (_segment([0.0, 1.0], [0.0, 2.0]), _segment([0.0, 3.0], [0.0, 4.0])),
        home=[0.0, 0.0],
    )
    bad = make_plan(inst, [1, 0], [False, False])
    assert bad.cost_mm == pytest.approx(6.0)
    improved = two_opt_improve(inst, bad)
    assert improved.cost_mm == pytest.approx(2.0)
    assert improved.cost_mm < bad.cost_mm
    assert improved.order == (0, 1)


def test_two_opt_leaves_optimal_plan_unchanged():
    rng = np.random.default_rng(0)
    inst = _random_instance(rng, 5)
    best = brute_force_optimal(inst)
    again = two_opt_improve(inst, best)
    assert again.order == best.order
    assert again.reversed_flags == best.reversed_flags
    assert again.cost_mm == pytest.approx(best.cost_mm)


def test_two_opt_monotone_over_random_starts():
    rng = np.random.default_rng(1)
    for _ in range(100):
        inst = _random_instance(rng, int(rng.integers(1, 8)))
        order = rng.permutation(inst.n_strokes)
        flags = rng.integers(0, 2, size=inst.n_strokes).astype(bool)
        start = make_plan(inst, order.tolist(), flags.tolist())
        out = two_opt_improve(inst, start)
        assert out.cost_mm <= start.cost_mm + 1e-9
        assert out.cost_mm == pytest.approx(plan_cost(inst, out))


def test_brute_force_selects_reversal_when_it_saves_travel():
    inst = GtspInstance(
        (_segment([0.0, 0.0], [5.0, 0.0]), _segment([10.0, 0.0], [6.0, 0.0])),
        home=[0.0, 0.0],
    )
    plan = brute_force_optimal(inst)
    assert plan.order == (0, 1)
    assert plan.reversed_flags == (False, True)  # enter second stroke at (6, 0)
    assert plan.cost_mm == pytest.approx(1.0)


def test_brute_force_matches_cost_recomputation():
    rng = np.random.default_rng(2)
    for _ in range(20):
        inst = _random_instance(rng, int(rng.integers(1, 6)))
        plan = brute_force_optimal(inst)
        assert plan.cost_mm == pytest.approx(plan_cost(inst, plan), abs=1e-9)


def test_brute_force_rejects_large_instances():
    rng = np.random.default_rng(3)
    inst = _random_instance(rng, 9)
    with pytest.raises(ValueError, match="at most 8"):
        brute_force_optimal(inst)


def test_heuristic_near_optimal_on_small_instances():
    rng = np.random.default_rng(4)
    for _ in range(100):
        inst = _random_instance(rng, int(rng.integers(1, 7)))
        nn = nearest_neighbor_plan(inst)
        improved = plan_strokes(inst)
        best = brute_force_optimal(inst)
        assert best.cost_mm <= nn.cost_mm + 1e-9
        assert best.cost_mm <= improved.cost_mm + 1e-9
        assert improved.cost_mm <= nn.cost_mm + 1e-9
        assert improved.cost_mm <= 1.05 * best.cost_mm + 1e-9


def test_plan_invariant_under_translation():
    rng = np.random.default_rng(5)
    inst = _random_instance(rng, 6)
    shift = np.array([17.5, -3.25])
    moved = GtspInstance(tuple(s + shift for s in inst.strokes), inst.home + shift)
    a = plan_strokes(inst)
    b = plan_strokes(moved)
    assert a.order == b.order
    assert a.reversed_flags == b.reversed_flags
    assert a.cost_mm == pytest.approx(b.cost_mm)


def test_apply_plan_reverses_geometry():
    strokes = [_segment([0.0, 0.0], [1.0, 0.0]), _segment([5.0, 0.0], [2.0, 0.0])]
    plan = make_plan(GtspInstance(tuple(strokes), [0.0, 0.0]), [1, 0], [True, False])
    out = apply_plan(strokes, plan)
    np.testing.assert_allclose(out[0], [[2.0, 0.0], [5.0, 0.0]])
    np.testing.assert_allclose(out[1], [[0.0, 0.0], [1.0, 0.0]])


def test_plan_serializes_to_json():
    inst = GtspInstance((_segment([1.0, 0.0], [2.0, 0.0]),), [0.0, 0.0])
    plan = plan_strokes(inst)
    data = json.loads(json.dumps(plan.to_dict()))
    assert data["order"] == [0]
    assert data["reversed"] == [False]
    assert data["cost_mm"] == pytest.approx(1.0)
