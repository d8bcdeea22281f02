import itertools
from math import comb, perm

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from kikuchi_hsbm.combinatorics import TupleIndex, all_subsets, subset_rank, subset_unrank


def colex_key(s):
    return tuple(reversed(s))


def test_all_subsets_is_colex_order():
    for n, p in [(5, 2), (7, 3), (8, 4)]:
        expected = sorted(itertools.combinations(range(n), p), key=colex_key)
        assert all_subsets(n, p).tolist() == [list(s) for s in expected]


def test_all_subsets_read_only():
    S = all_subsets(6, 3)
    assert not S.flags.writeable


@given(st.integers(2, 20).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, min(n, 6)))), st.data())
@settings(max_examples=60, deadline=None)
def test_subset_rank_roundtrip(np_, data):
    n, p = np_
    r = data.draw(st.integers(0, comb(n, p) - 1))
    s = subset_unrank(r, n, p)
    assert list(s) == sorted(set(s.tolist()))
    assert subset_rank(s, n) == r


def test_tuple_index_matches_permutations():
    for n, ell in [(5, 2), (6, 4), (7, 3)]:
        idx = TupleIndex(n, ell)
        ref = np.array(list(itertools.permutations(range(n), ell)))
        assert idx.size == perm(n, ell)
        assert np.array_equal(idx.all(), ref)
        assert np.array_equal(idx.rank(ref), np.arange(len(ref)))


@given(st.integers(4, 30), st.integers(1, 6), st.data())
@settings(max_examples=60, deadline=None)
def test_tuple_rank_roundtrip(n, ell, data):
    ell = min(ell, n)
    idx = TupleIndex(n, ell)
    r = data.draw(st.integers(0, idx.size - 1))
    t = idx.unrank(r)
    assert len(set(t.tolist())) == ell
    assert idx.rank(t) == r


def test_unrank_large_index_consistent():
    idx = TupleIndex(30, 4)
    r = np.arange(0, idx.size, 9973)
    assert np.array_equal(idx.rank(idx.unrank(r)), r)
