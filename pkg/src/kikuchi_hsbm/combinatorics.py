"""Ranking helpers for p-subsets (colex) and collision-free tuples (lex).

All vertices are 0-based internally. Subset ranks follow the colexicographic
order, tuple ranks follow the order of ``itertools.permutations``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from math import comb, perm

import numpy as np

__all__ = [
    "binom_table",
    "subset_rank",
    "subset_unrank",
    "all_subsets",
    "TupleIndex",
]


@lru_cache(maxsize=64)
def binom_table(n: int, k: int) -> np.ndarray:
    """Table ``B[m, j] = C(m, j)`` for ``0 <= m <= n``, ``0 <= j <= k`` as int64."""
    B = np.zeros((n + 1, k + 1), dtype=np.int64)
    for m in range(n + 1):
        for j in range(min(m, k) + 1):
            B[m, j] = comb(m, j)
    B.setflags(write=False)
    return B


def subset_rank(subsets, n: int) -> np.ndarray:
    """Colex rank of sorted subsets given as an array of shape (..., p)."""
    S = np.asarray(subsets, dtype=np.int64)
    p = S.shape[-1]
    B = binom_table(n, p)
    r = np.zeros(S.shape[:-1], dtype=np.int64)
    for i in range(p):
        r += B[S[..., i], i + 1]
    return r


def subset_unrank(ranks, n: int, p: int) -> np.ndarray:
    """Inverse of :func:`subset_rank`; returns sorted subsets of shape (..., p)."""
    r = np.array(ranks, dtype=np.int64, copy=True)
    B = binom_table(n, p)
    out = np.empty(r.shape + (p,), dtype=np.int64)
    for i in range(p - 1, -1, -1):
        # largest m with C(m, i+1) <= r
        col = B[:, i + 1]
        m = np.searchsorted(col, r, side="right") - 1
        out[..., i] = m
        r = r - col[m]
    return out


@lru_cache(maxsize=16)
def _all_subsets_cached(n: int, p: int) -> np.ndarray:
    S = subset_unrank(np.arange(comb(n, p)), n, p)
    S.setflags(write=False)
    return S


def all_subsets(n: int, p: int) -> np.ndarray:
    """All p-subsets of range(n), row ``r`` holding the subset with colex rank ``r``."""
    return _all_subsets_cached(n, p)


def _falling(m: int, r: int) -> int:
    return perm(m, r) if 0 <= r <= m else 0


class TupleIndex:
    """Bijection between ell-tuples of distinct values in range(n) and ranks.

    The order is lexicographic, identical to ``itertools.permutations(range(n), ell)``.
    """

    def __init__(self, n: int, ell: int):
        if not 0 <= ell <= n:
            raise ValueError(f"need 0 <= ell <= n, got ell={ell}, n={n}")
        self.n = n
        self.ell = ell
        self.size = perm(n, ell)
        # weight of position i: number of completions of the remaining slots
        self._w = np.array([_falling(n - 1 - i, ell - 1 - i) for i in range(ell)], dtype=np.int64)

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"TupleIndex(n={self.n}, ell={self.ell})"

    def rank(self, tuples) -> np.ndarray:
        T = np.asarray(tuples, dtype=np.int64)
        if T.shape[-1] != self.ell:
            raise ValueError("tuple length mismatch")
        r = np.zeros(T.shape[:-1], dtype=np.int64)
        for i in range(self.ell):
            c = T[..., i].copy()
            for j in range(i):
                c -= T[..., j] < T[..., i]
            r += c * self._w[i]
        return r

    def unrank(self, ranks) -> np.ndarray:
        r = np.array(ranks, dtype=np.int64, copy=True)
        out = np.empty(r.shape + (self.ell,), dtype=np.int64)
        for i in range(self.ell):
            d, r = np.divmod(r, self._w[i])
            # d-th smallest value not used by the earlier slots
            v = d.copy()
            for _ in range(i + 1):
                cnt = np.zeros_like(v)
                for j in range(i):
                    cnt += out[..., j] <= v
                v_new = d + cnt
                if np.array_equal(v_new, v):
                    break
                v = v_new
            out[..., i] = v
        return out

    def all(self) -> np.ndarray:
        """All tuples as an array of shape (size, ell), in rank order (read-only, cached)."""
        return _all_tuples(self.n, self.ell)


@lru_cache(maxsize=4)
def _all_tuples(n: int, ell: int) -> np.ndarray:
    size = perm(n, ell)
    if size <= 20000:
        T = np.array(list(itertools.permutations(range(n), ell)), dtype=np.int64).reshape(size, ell)
    else:
        T = TupleIndex(n, ell).unrank(np.arange(size, dtype=np.int64))
    T.setflags(write=False)
    return T
