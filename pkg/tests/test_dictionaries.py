import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projgreedy.dictionaries import (
    Dictionary,
    bridge_dictionaries,
    greedy_step,
    halfspace_free_check,
    polar_cone_of_dictionary,
    select,
    union_is_halfspace_free,
)
from projgreedy.errors import (
    IntersectionNotTrivial,
    InvalidDictionary,
    UnsupportedDictionary,
)
from projgreedy.geometry import ConvexSet, is_member, project

E = np.eye(2)
QUAD = ConvexSet.cone([[1, 0], [0, 1]])


def test_select_finite():
    D = Dictionary.finite(E)
    ch = select(D, [3, 4])
    assert np.array_equal(ch.atom, [0, 1]) and ch.coefficient == 4
    assert np.allclose(greedy_step(D, [3, 4]), [3, 0])
    zero = select(D, [-1, -2])
    assert zero.is_zero and not np.any(zero.atom)
    assert np.array_equal(greedy_step(D, [-1, -2]), [-1, -2])


def test_ties_go_to_lowest_index():
    D = Dictionary.finite([[1, 0], [0, 1]])
    assert np.array_equal(select(D, [2, 2]).atom, [1, 0])


def test_select_cone_section():
    D = Dictionary.cone_section(QUAD)
    ch = select(D, [3, 4])
    assert np.allclose(ch.atom, [0.6, 0.8]) and ch.coefficient == pytest.approx(5)
    assert np.allclose(greedy_step(D, [3, 4]), [0, 0], atol=1e-14)


def test_invalid_dictionaries():
    with pytest.raises(InvalidDictionary):
        Dictionary.finite([[2, 0]])
    with pytest.raises(InvalidDictionary):
        Dictionary.finite(np.zeros((0, 2)))
    with pytest.raises(InvalidDictionary):
        Dictionary.cone_section(ConvexSet.subspace(np.zeros((0, 2)), 2))
    with pytest.raises(InvalidDictionary):
        Dictionary.cone_section(ConvexSet.ball([0, 0], 1))


def test_halfspace_free_examples():
    ok, w = halfspace_free_check([Dictionary.finite(E)])
    assert not ok and np.allclose(w, [-np.sqrt(0.5), -np.sqrt(0.5)])
    assert halfspace_free_check([Dictionary.finite(np.vstack([E, -E]))])[0]
    tri = [[1, 0], [-0.6, 0.8], [-0.6, -0.8]]
    assert halfspace_free_check([Dictionary.finite(tri)])[0]
    hs = Dictionary.cone_section(ConvexSet.halfspace_cone([[1, 0]]))
    with pytest.raises(UnsupportedDictionary):
        halfspace_free_check([hs])
    assert not union_is_halfspace_free([hs])[0]


def test_polar_cone_of_dictionary():
    A = polar_cone_of_dictionary(Dictionary.finite(E))
    assert is_member(A, [-1, -2]) and not is_member(A, [1, -2])
    sym = polar_cone_of_dictionary(Dictionary.finite(np.vstack([E, -E])))
    assert np.allclose(project(sym, [3, -7]), 0)
    c = ConvexSet.cone([[1, 0], [1, 1]])
    pc = polar_cone_of_dictionary(Dictionary.cone_section(c))
    for x in np.random.default_rng(0).standard_normal((20, 2)):
        assert np.allclose(project(pc, x), x - project(c, x), atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 6), m=st.integers(1, 8))
def test_step_identities(seed, d, m):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, d))
    D = Dictionary.finite(a / np.linalg.norm(a, axis=1)[:, None])
    x = rng.standard_normal(d) * 4
    ch = select(D, x)
    g = greedy_step(D, x)
    # same left-to-right summation as the kernel, so the comparison is exact
    best = max(sum(float(gi) * float(xi) for gi, xi in zip(row, x)) for row in D.atoms)
    assert ch.coefficient >= best or ch.is_zero
    assert abs((x - g) @ g) <= 1e-10
    assert abs(g @ g - x @ x + ch.coefficient ** 2) <= 1e-10
    # the step leaves x unchanged exactly when x lies in the polar cone
    assert np.array_equal(g, x) == is_member(polar_cone_of_dictionary(D), x) or \
        ch.coefficient <= 1e-12


def test_bridge_rays():
    d1, d2 = bridge_dictionaries((ConvexSet.cone([[1, 0]]), ConvexSet.cone([[0, 1]])))
    x1 = greedy_step(d1, [1, 1])
    assert np.allclose(x1, [1, 0], atol=1e-12)
    assert np.allclose(greedy_step(d2, x1), [0, 0], atol=1e-12)


def test_bridge_coordinate_cones_r3():
    a = ConvexSet.cone([[1, 0, 0], [0, 1, 0]])
    b = ConvexSet.cone([[0, 0, 1], [-1, -1, -1]])
    d1, d2 = bridge_dictionaries((a, b))
    rng = np.random.default_rng(5)
    for x in rng.standard_normal((1000, 3)):
        assert np.linalg.norm(greedy_step(d1, x) - project(a, x)) <= 1e-10
        assert np.linalg.norm(greedy_step(d2, x) - project(b, x)) <= 1e-10


def test_bridge_rejects_overlap():
    with pytest.raises(IntersectionNotTrivial):
        bridge_dictionaries((ConvexSet.cone([[1, 0], [1, 1]]), ConvexSet.cone([[0, 1], [1, 1]])))


def test_symmetry_flag():
    assert Dictionary.finite(np.vstack([E, -E])).is_symmetric
    assert not Dictionary.finite(E).is_symmetric
    assert Dictionary.cone_section(ConvexSet.subspace([[1, 0]])).is_symmetric
