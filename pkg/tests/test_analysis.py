import numpy as np
import pytest

from projgreedy import analysis as A
from projgreedy.dictionaries import Dictionary
from projgreedy.engine import StopRule, Trace, run_greedy, run_projection
from projgreedy.errors import (
    InsufficientIterates,
    NotApplicable,
    NotInterleaved,
    SegmentIndexOutside,
)
from projgreedy.geometry import ConvexSet, distance
from projgreedy.instances import generate_suite_instance
from projgreedy.schedules import Schedule

R = np.sqrt(0.5)


def synthetic(points, index=None, K=4, mode="projection"):
    """A trace whose stored iterates are exactly ``points`` (x_0 first)."""
    pts = [np.asarray(p, dtype=float) for p in points]
    n = len(pts) - 1
    index = np.asarray(index if index is not None else [1 + k % 2 for k in range(n)])
    norms = np.array([np.linalg.norm(p) for p in pts[1:]])
    steps = np.array([np.linalg.norm(pts[k] - pts[k - 1]) for k in range(1, n + 1)])
    return Trace(mode, pts[0], index, norms, steps, None, None,
                 {k: p for k, p in enumerate(pts)}, 0, metadata={"K": K})


# four cones in R^3 with J(w) = {1,2,4} and J(w') = {1,2,3,4}
FLAG_SETS = [
    ConvexSet.halfspace_cone([[0, 0, 1]]),
    ConvexSet.halfspace_cone([[0, 0, -1]]),
    ConvexSet.halfspace_cone([[R, -R, 0]]),
    ConvexSet.halfspace_cone([[0, -1, 0]]),
]
W, WP = np.array([1.0, 0, 0]), np.array([1.0, 1, 0])


def test_cluster_examples():
    const = synthetic([[1, 2]] * 6)
    cl = A.cluster_points(const, 1e-3)
    assert len(cl) == 1 and np.allclose(cl[0].w, [1, 2]) and cl[0].radius == 0
    alt = synthetic([[1, 0], [0, 1]] * 5)
    cl = A.cluster_points(alt, 1e-3)
    assert len(cl) == 2
    assert cl[0].support == [0, 2, 4, 6, 8] and cl[1].support == [1, 3, 5, 7, 9]
    with pytest.raises(InsufficientIterates):
        A.cluster_points(synthetic([[1, 0], [0, 1]]), 1e-3)


def test_cluster_of_convergent_run():
    sets = [ConvexSet.subspace([[1, 0]]), ConvexSet.subspace([[R, R]])]
    tr = run_projection(sets, Schedule.cyclic(2), [1, 1], StopRule(200))
    eps = 1e-3
    assert tr.final_norm <= eps / 10
    cl = A.cluster_points(tr, eps)
    last = max(cl, key=lambda c: max(c.support))
    assert last.norm <= eps
    for c in cl:
        assert c.radius <= eps and len(c.support) >= 3
        assert c.support == sorted(set(c.support))


def test_j_set_examples():
    js = A.j_set([0, 0, 0], FLAG_SETS, 1e-9)
    assert js.J == {1, 2, 3, 4}
    assert A.j_set(W, FLAG_SETS, 1e-9).J == {1, 2, 4}
    assert A.j_set(WP, FLAG_SETS, 1e-9).J == {1, 2, 3, 4}
    x = np.array([0.3, -0.2, 0.1])
    prev = None
    for tol in np.logspace(0, -6, 13):
        js = A.j_set(x, FLAG_SETS, tol)
        for j in range(4):
            assert ((j + 1) in js.J) == (distance(FLAG_SETS[j], x) <= tol)
        if prev is not None:
            assert js.J <= prev
        prev = js.J
    with pytest.raises(ValueError):
        A.j_set(x, FLAG_SETS, 0.0)


def test_interleave():
    assert A.interleave([0, 2, 4], [1, 3, 5]) == [(0, 1), (2, 3), (4, 5)]
    assert A.interleave([0, 1, 2, 7], [5, 6, 9]) == [(2, 5), (7, 9)]
    assert A.interleave([5, 6], [1, 2]) == []


def test_theorem1_degenerate_pair():
    tr = synthetic([W, W, W, W, W])
    c = A.cluster_points(tr, 1e-3)[0]
    rep = A.verify_pair_theorem1(tr, c, c, FLAG_SETS)
    assert not rep.checks["i_new_index"].passed
    assert rep.checks["iv_functional"].residual == 0
    assert rep.checks["norm_growth"].residual == 0
    assert rep.label == "diagnostic"


def test_theorem1_constructed_pair():
    tr = synthetic([W, WP] * 5)
    w, wp = A.cluster_points(tr, 1e-3)
    rep = A.verify_pair_theorem1(tr, w, wp, FLAG_SETS)
    assert rep.J_w.J == {1, 2, 4} and rep.J_w_prime.J == {1, 2, 3, 4}
    assert rep.all_passed, rep.to_dict()
    # the widened set is reported alongside, without changing the other checks
    wide = A.verify_pair_theorem1(tr, w, wp, FLAG_SETS, widen=True)
    assert wide.widened_J == {2} and "iv_widened" in wide.checks
    # every boolean is reproducible from its residual and tolerance
    for name, chk in rep.checks.items():
        expect = chk.residual >= (chk.tol if name[:3] in ("i_n", "ii_", "iii") else -chk.tol)
        assert chk.passed == expect
    back = A.verify_pair_theorem1(tr, wp, w, FLAG_SETS)
    assert not back.all_passed


def test_pair_requires_interleaving():
    tr = synthetic([W] * 4 + [WP] * 4)
    w, wp = A.cluster_points(tr, 1e-3)
    with pytest.raises(NotInterleaved):
        A.verify_pair_theorem1(tr, wp, w, FLAG_SETS)


def test_theorem2_checks():
    tr = synthetic([W, WP] * 5, index=[1, 2] * 4 + [1])
    w, wp = A.cluster_points(tr, 1e-3)
    rep = A.verify_pair_theorem2(tr, w, wp, FLAG_SETS)
    assert set(rep.checks) >= {"i_functional_w", "ii_functional_w_prime"}
    assert rep.checks["i_functional_w"].passed
    # segment (0, 3) has interior steps 1, 2 using index 3, outside J(w) ∩ J(w')
    far = [np.array([5.0 + k, 0, 0]) for k in range(6)]
    pts = [W, far[0], far[1], WP, W, far[2], far[3], WP, W, far[4], far[5], WP]
    tr2 = synthetic(pts, index=[3, 3, 1, 2, 1, 2, 1, 2, 1, 2, 1])
    w, wp = A.cluster_points(tr2, 1e-3)
    with pytest.raises(SegmentIndexOutside):
        A.verify_pair_theorem2(tr2, w, wp, FLAG_SETS)


def test_wip_examples():
    ok, wit = A.wip_check(ConvexSet.subspace([[1, 0, 0], [0, 1, 0]]))
    assert ok and wit is None
    ok, wit = A.wip_check(ConvexSet.cone([[1, 0], [0, 1]]))
    assert not ok and np.allclose(wit, [1, 0])
    ok, wit = A.wip_check(ConvexSet.halfspace([1, 0], 0.0))
    assert not ok and wit[0] < 0


def test_separation_examples():
    d1 = Dictionary.finite([[1, 0], [-1, 0]])
    d2 = Dictionary.finite([[0, 1], [0, -1]])
    est = A.separation_value([d1, d2], quadruple=(1, 2, 1, 2))
    assert est.value == pytest.approx(R, abs=1e-6)
    assert est.n_dirs > 0 and est.depth > 0
    half = [Dictionary.finite([[1, 0]]), Dictionary.finite([[0, 1]])]
    assert A.separation_value(half, quadruple=(1, 2, 1, 2)).value <= 1e-9
    with pytest.raises(NotApplicable):
        A.separation_value([d1, d2, d1])


def test_separation_sets_mode():
    cones = [ConvexSet.cone([[1, 0, 0]]), ConvexSet.cone([[0, 1, 0]]),
             ConvexSet.cone([[0, 0, 1]]), ConvexSet.cone([[1, 1, 1]])]
    est = A.separation_value(cones, quadruple=(1, 2, 3, 4), samples=8)
    assert est.value == np.inf and est.mode == "sets"


def test_analyze_flags_constructed_candidate():
    tr = synthetic([W, WP] * 8)
    rep = A.analyze(tr, FLAG_SETS)
    assert rep.counterexample
    assert rep.to_dict()["counterexample_candidates"]


@pytest.mark.parametrize("cls", ["subspaces", "cones", "dicts"])
def test_analyze_suite_runs_are_clean(cls):
    inst = generate_suite_instance(cls, 6)
    run = run_projection if inst.mode == "projection" else run_greedy
    tr = run(inst.members, Schedule.cyclic(inst.K), inst.x0, StopRule(10**5, 1e-6))
    try:
        rep = A.analyze(tr, inst.members)
    except InsufficientIterates:
        return
    assert not rep.counterexample


def test_functional_segments_on_suite():
    for cls in ("subspaces", "symmetric_dicts"):
        inst = generate_suite_instance(cls, 9)
        run = run_projection if inst.mode == "projection" else run_greedy
        tr = run(inst.members, Schedule.random(inst.K, 3), inst.x0, StopRule(3000, 1e-9),
                 thin=1)
        sets = A.constraint_sets(inst.mode, inst.members)
        reps = A.functional_segments(tr, sets, n_segments=6, sample_count=8)
        assert reps and all(r.passed for r in reps)
