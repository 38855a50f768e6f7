import numpy as np
import pytest

from projgreedy.dictionaries import Dictionary, bridge_dictionaries
from projgreedy.engine import StopRule, run_greedy, run_projection, segment_functional_check
from projgreedy.errors import DimensionMismatch, InstanceInvalid, PreconditionViolated
from projgreedy.geometry import ConvexSet, distance
from projgreedy.instances import gen_cone_instance, gen_dictionary_instance
from projgreedy.schedules import Schedule

R = np.sqrt(0.5)
LINES = [ConvexSet.subspace([[1, 0]]), ConvexSet.subspace([[R, R]])]


def test_orthogonal_lines():
    sets = [ConvexSet.subspace([[1, 0]]), ConvexSet.subspace([[0, 1]])]
    tr = run_projection(sets, Schedule.cyclic(2), [1, 1], StopRule(100, norm_tol=1e-12))
    assert tr.steps == 2 and tr.stop_reason == "norm_tol"
    assert np.allclose(tr.iterate(1), [1, 0]) and np.allclose(tr.iterate(2), 0)


def test_two_line_contraction():
    tr = run_projection(LINES, Schedule.cyclic(2), [1, 1], StopRule(40), thin=1)
    assert tr.norm_at(0) == pytest.approx(np.sqrt(2))
    assert tr.norm_at(1) == pytest.approx(1.0)
    ratios = tr.norm[1:] / tr.norm[:-1]
    assert np.allclose(ratios, R, rtol=1e-12)


def test_greedy_coordinate_example():
    dicts = [Dictionary.finite([[1, 0], [-1, 0]]), Dictionary.finite([[0, 1], [0, -1]])]
    tr = run_greedy(dicts, Schedule.cyclic(2), [3, 4], StopRule(10, norm_tol=0.0), thin=1)
    assert np.allclose(tr.iterate(1), [0, 4]) and np.allclose(tr.iterate(2), 0)
    assert tr.coefficient[:2].tolist() == [3.0, 4.0]


def test_stop_rules():
    tr = run_projection(LINES, Schedule.cyclic(2), [1, 1], StopRule(5))
    assert tr.steps == 5 and tr.stop_reason == "max_iters"
    tr = run_projection(LINES, Schedule.cyclic(2), [1, 1],
                        StopRule(10**5, stagnation=(3, 1e-3)))
    assert tr.stop_reason == "stagnation" and tr.step_norm[-3:].max() <= 1e-3
    tr = run_projection(LINES, Schedule.custom([1, 2], wrap=False), [1, 1], StopRule(10))
    assert tr.stop_reason == "schedule_exhausted" and tr.steps == 2


def test_validation_errors():
    with pytest.raises(InstanceInvalid):
        run_projection(LINES[:1], Schedule.cyclic(2), [1, 1], StopRule(3))
    with pytest.raises(InstanceInvalid):
        run_projection([LINES[0], ConvexSet.ball([5, 0], 1)], Schedule.cyclic(2), [1, 1],
                       StopRule(3))
    with pytest.raises(DimensionMismatch):
        run_projection(LINES, Schedule.cyclic(2), [1, 1, 1], StopRule(3))
    with pytest.raises(InstanceInvalid):
        run_greedy([Dictionary.finite([[1, 0]]), Dictionary.finite([[0, 1]])],
                   Schedule.cyclic(2), [1, 1], StopRule(3))


def test_trace_invariants_random_cones():
    inst = gen_cone_instance(4, 3, 11)
    tr = run_projection(inst.sets, Schedule.random(3, 5), inst.x0, StopRule(10**5, 1e-6),
                        record_distances=True, thin=1)
    assert tr.final_norm <= 1e-6 and tr.violation is None
    norms = np.r_[np.linalg.norm(inst.x0), tr.norm]
    assert np.all(norms[1:] <= norms[:-1] * (1 + 1e-12))
    assert tr.summability_residual() <= 1e-8
    for n in range(1, tr.steps + 1):
        s = inst.sets[tr.index_at(n) - 1]
        assert distance(s, tr.iterate(n)) <= 1e-9 * max(1, tr.norm_at(n))
        assert tr.distances[n - 1, tr.index_at(n) - 1] <= 1e-9
    # partial sums from every m, not only from the start
    tail = np.cumsum((tr.step_norm ** 2)[::-1])[::-1]
    for m in range(tr.steps):
        assert tail[m] <= tr.norm_at(m) ** 2 - tr.r_est ** 2 + 1e-8


def test_greedy_pythagoras_equality():
    inst = gen_dictionary_instance(4, 2, 3)
    tr = run_greedy(inst.dictionaries, Schedule.cyclic(2), inst.x0, StopRule(10**5, 1e-6))
    assert tr.final_norm <= 1e-6
    assert abs(tr.summability_residual()) <= 1e-8


def test_bridged_trajectories_match():
    inst = gen_cone_instance(3, 2, 2)
    dicts = bridge_dictionaries(inst.sets)
    stop = StopRule(200, norm_tol=0.0)
    tp = run_projection(inst.sets, Schedule.cyclic(2), inst.x0, stop, thin=1)
    tg = run_greedy(dicts, Schedule.cyclic(2), inst.x0, stop, thin=1)
    assert tp.steps == tg.steps
    for n in range(1, tp.steps + 1):
        assert np.linalg.norm(tp.iterate(n) - tg.iterate(n)) <= 1e-10


def test_determinism():
    inst = gen_cone_instance(3, 4, 1)
    a = run_projection(inst.sets, Schedule.random(4, 99), inst.x0, StopRule(500))
    b = run_projection(inst.sets, Schedule.random(4, 99), inst.x0, StopRule(500))
    assert np.array_equal(a.norm, b.norm) and np.array_equal(a.index, b.index)
    assert np.array_equal(a.final, b.final)


def test_thinning_and_tail():
    tr = run_projection(LINES, Schedule.cyclic(2), [1, 1], StopRule(1000), thin=100, tail=10)
    assert set(range(0, 1001, 100)) <= set(tr.iterates)
    assert [n for n, _ in tr.tail()] == list(range(991, 1001))
    with pytest.raises(KeyError):
        tr.iterate(55)


def test_checked_mode_catches_corruption():
    bad = [Dictionary.finite([[2, 0], [-2, 0]], validate=False),
           Dictionary.finite([[0, 1], [0, -1]])]
    tr = run_greedy(bad, Schedule.cyclic(2), [3, 4], StopRule(10), validate=False)
    assert tr.violation["invariant"] == "pythagoras" and tr.stop_reason == "invariant"
    tr = run_greedy(bad, Schedule.cyclic(2), [3, 4], StopRule(10), validate=False,
                    checked=False)
    assert tr.violation is None


def test_segment_functional_examples():
    tr = run_projection(LINES, Schedule.cyclic(2), [1, 1], StopRule(10), thin=1)
    rep = segment_functional_check(tr, (0, 2), [0, 0], {1, 2}, "projection", LINES)
    assert rep.passed and rep.margin >= 0
    with pytest.raises(PreconditionViolated):
        segment_functional_check(tr, (0, 2), [R * 0.1, R * 0.1], {1, 2}, "projection", LINES)
    with pytest.raises(PreconditionViolated):
        segment_functional_check(tr, (0, 2), [0, 0], {1}, "projection", LINES)
    dicts = [Dictionary.finite([[1, 0], [0, 1]]), Dictionary.finite([[-1, -1]] / np.sqrt(2))]
    polars = [ConvexSet.halfspace_cone(D.atoms) for D in dicts]
    tg = run_greedy(dicts, Schedule.cyclic(2), [3, 1], StopRule(6), thin=1, validate=False)
    rep = segment_functional_check(tg, (0, 1), [-1, -2], {1}, "greedy", polars)
    assert rep.passed and rep.margin == pytest.approx(3.0)
