import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projgreedy.errors import InvalidCustom
from projgreedy.schedules import RNG_NAME, Schedule, default_window, validate_prefix


def test_cyclic():
    assert Schedule.cyclic(3).prefix(7).tolist() == [1, 2, 3, 1, 2, 3, 1]


def test_random_is_reproducible():
    a = Schedule.random(3, 42).prefix(10**6)
    b = Schedule.random(3, 42).prefix(10**6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a[:100], Schedule.random(3, 43).prefix(100))


def test_chunked_draws_match_one_draw():
    st_ = Schedule.random(5, 9).start()
    parts = np.concatenate([st_.take(k) for k in (1, 7, 100, 3)])
    assert np.array_equal(parts, Schedule.random(5, 9).prefix(111))


@settings(max_examples=40, deadline=None)
@given(K=st.integers(2, 9), seed=st.integers(0, 2**64 - 1))
def test_random_adjacency_and_range(K, seed):
    seq = Schedule.random(K, seed).prefix(2000)
    assert seq.min() >= 1 and seq.max() <= K
    assert np.all(seq[1:] != seq[:-1])


def test_random_is_uniform_over_other_indices():
    seq = Schedule.random(4, 1).prefix(200000)
    nxt = seq[1:][seq[:-1] == 1]
    freq = np.bincount(nxt, minlength=5)[1:] / nxt.size
    assert freq[0] == 0
    assert np.allclose(freq[1:], 1 / 3, atol=0.01)


@pytest.mark.parametrize("items,K,wrap", [([1, 1, 2], 2, True), ([1, 2, 1], 2, True),
                                          ([1, 2], 3, True), ([1, 4], 3, False), ([], 2, True)])
def test_custom_rejects(items, K, wrap):
    with pytest.raises(InvalidCustom):
        Schedule.custom(items, K, wrap)


def test_custom_wrap_and_exhaustion():
    assert Schedule.custom([1, 2, 3]).prefix(7).tolist() == [1, 2, 3, 1, 2, 3, 1]
    state = Schedule.custom([2, 1, 2], 2, wrap=False).start()
    assert state.take(10).tolist() == [2, 1, 2]
    assert state.exhausted
    with pytest.raises(StopIteration):
        state.next_index()


def test_validate_prefix_examples():
    assert validate_prefix([1, 2, 3, 1, 2, 3], 3, 3)
    assert not validate_prefix([1, 2, 1, 2, 1, 2], 3, 6)
    assert not validate_prefix([1, 1, 2, 3], 3, 4)
    assert validate_prefix(Schedule.random(4, 7).prefix(10**4), 4, 200)
    with pytest.raises(ValueError):
        validate_prefix([1, 2], 3, 2)


@pytest.mark.parametrize("K", [2, 3, 6])
def test_cyclic_coverage_all_prefixes(K):
    seq = Schedule.cyclic(K).prefix(5 * K)
    for n in range(K, seq.size + 1):
        assert validate_prefix(seq[:n], K, K)


def test_serialization_roundtrip():
    for s in (Schedule.cyclic(3), Schedule.random(4, 2**63 + 5), Schedule.custom([1, 3, 2])):
        assert Schedule.from_dict(s.to_dict()) == s
    assert Schedule.random(3, 1).to_dict()["rng"] == RNG_NAME
    assert default_window(4) == 200
