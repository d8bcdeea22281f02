"""Bosonic Kikuchi matrix as a matrix-free operator, plus its dense relatives.

Matvec layout
-------------
For a fixed set P of p/2 positions, every row S splits into the part S_P
that changes and the rest S_R that is kept. Put x into a matrix X whose row
is the base-n code of S_P and whose column is the rank of S_R among
(ell - p/2)-tuples. Then the contribution of all neighbours V that differ
from S exactly on P is ``(M @ X)[code(S_P), rank(S_R)]``, where ``M[q, r]``
is A on the p distinct vertices of q and r and zero when they collide.
Summing over the C(ell, p/2) position sets gives Kx with one dense matmul
per position set.

M only depends on the sets underlying q and r, so the product is taken
with the smaller C(n, p/2) x C(n, p/2) set-pair matrix after summing the
rows of X over the orderings of each set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial, perm

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .combinatorics import TupleIndex, all_subsets, subset_rank
from .model import STREAM_SOLVER, Hypergraph, ModelParams, rng_for
from .moments import leading_constant

__all__ = [
    "LOG",
    "sym_diff_tuple",
    "row_degree",
    "KikuchiOperator",
    "dense_tuple_kikuchi",
    "dense_set_kikuchi",
    "symmetric_embedding",
    "SpectralEstimate",
    "lambda_max",
    "Thresholds",
    "thresholds",
]

LOG = math.log  # every "log n" in the threshold formulas is natural
DENSE_SET_CAP = 50_000
DENSE_TUPLE_CAP = 20_000


def sym_diff_tuple(S, V, p: int):
    """S's disagreeing entries then V's (same position order), or None.

    Defined only when exactly p/2 positions disagree.
    """
    S, V = tuple(S), tuple(V)
    if len(S) != len(V):
        raise ValueError("tuples must have the same length")
    pos = [i for i, (s, v) in enumerate(zip(S, V)) if s != v]
    if 2 * len(pos) != p:
        return None
    return tuple(S[i] for i in pos) + tuple(V[i] for i in pos)


def row_degree(n: int, ell: int, p: int) -> int:
    """Nonzero pattern size of every row: C(ell, p/2) (n - ell)_{p/2}."""
    h = p // 2
    return comb(ell, h) * perm(n - ell, h)


def _edge_weights(h: Hypergraph, mask) -> np.ndarray:
    A = h.A
    if mask is None:
        return A
    keep = np.asarray(mask, dtype=bool)
    if keep.shape != A.shape:
        raise ValueError("mask must cover every p-subset")
    return np.where(keep, A, 0.0)


def _pair_matrix(weights: np.ndarray, n: int, p: int) -> np.ndarray:
    """M[q, r] = w of the set q ∪ r for (p/2)-tuples q, r with all entries distinct."""
    h = p // 2
    grid = np.indices((n,) * p).reshape(p, -1).T  # all p-tuples, q first
    srt = np.sort(grid, axis=1)
    ok = np.all(np.diff(srt, axis=1) > 0, axis=1)
    vals = np.zeros(grid.shape[0])
    vals[ok] = weights[subset_rank(srt[ok], n)]
    return vals.reshape(n**h, n**h)


def _set_pair_matrix(weights: np.ndarray, n: int, p: int) -> np.ndarray:
    """Ms[a, b] = w of a ∪ b for disjoint (p/2)-sets a, b (colex ranks), else 0."""
    h = p // 2
    sets = all_subsets(n, h)
    Nh = sets.shape[0]
    a = np.repeat(np.arange(Nh), Nh)
    b = np.tile(np.arange(Nh), Nh)
    joined = np.concatenate([sets[a], sets[b]], axis=1)
    joined.sort(axis=1)
    ok = np.all(np.diff(joined, axis=1) > 0, axis=1)
    vals = np.zeros(Nh * Nh)
    vals[ok] = weights[subset_rank(joined[ok], n)]
    return vals.reshape(Nh, Nh)


@lru_cache(maxsize=4)
def _position_layout(n: int, ell: int, h: int):
    """Flat scatter/gather indices per position set; depends only on (n, ell, p)."""
    T = TupleIndex(n, ell).all()
    rest_index = TupleIndex(n, ell - h)
    Nh, R = comb(n, h), rest_index.size
    layout = []
    for P in itertools.combinations(range(ell), h):
        rest = [i for i in range(ell) if i not in P]
        changed = T[:, list(P)]
        srows = subset_rank(np.sort(changed, axis=1), n)
        cols = rest_index.rank(T[:, rest])
        # rows sharing a set differ only in the order of S_P
        order = np.argsort(changed, axis=1, kind="stable")
        perm_id = TupleIndex(h, h).rank(np.argsort(order, axis=1))
        layout.append(((perm_id * Nh + srows) * R + cols, srows * R + cols))
    return tuple(layout)


class KikuchiOperator:
    """Implicit ell-th order bosonic Kikuchi matrix of a hypergraph.

    Parameters
    ----------
    h : Hypergraph
    ell : int
        Tuple length, a multiple of p with ell <= n - p/2.
    mask : bool array over p-subsets, optional
        Only subsets with ``mask`` True contribute (the complement batches of
        a sample split).
    """

    def __init__(self, h: Hypergraph, ell: int, mask=None):
        P = h.params
        n, p = P.n, P.p
        if p % 2:
            raise ValueError("the Kikuchi operator needs even p")
        if ell % p or ell <= 0:
            raise ValueError(f"ell must be a positive multiple of p={p}")
        if ell > n - p // 2:
            raise ValueError(f"ell must be <= n - p/2 = {n - p // 2}")
        self.h = h
        self.ell = ell
        self.n, self.p = n, p
        self.half = p // 2
        self.mask = None if mask is None else np.asarray(mask, dtype=bool)
        self.index = TupleIndex(n, ell)
        self.rest_index = TupleIndex(n, ell - self.half)
        self.shape = (self.index.size, self.index.size)
        self._weights = _edge_weights(h, self.mask)
        self._M = None
        self._Ms = None
        self.matvecs = 0

    def __repr__(self):
        return f"KikuchiOperator(n={self.n}, p={self.p}, ell={self.ell}, dim={self.shape[0]}, masked={self.mask is not None})"

    @property
    def dim(self) -> int:
        return self.shape[0]

    @property
    def M(self) -> np.ndarray:
        if self._M is None:
            self._M = _pair_matrix(self._weights, self.n, self.p)
        return self._M

    @property
    def Ms(self) -> np.ndarray:
        if self._Ms is None:
            self._Ms = _set_pair_matrix(self._weights, self.n, self.p)
        return self._Ms

    def _position_layout(self):
        return _position_layout(self.n, self.ell, self.half)

    def matmat(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        one = X.ndim == 1
        if one:
            X = X[:, None]
        N, m = X.shape
        if N != self.dim:
            raise ValueError(f"expected {self.dim} rows, got {N}")
        Ms = self.Ms
        Nh = Ms.shape[0]
        R = self.rest_index.size
        nperm = factorial(self.half)
        if m == 1:
            return self._matvec1(X[:, 0], Ms, Nh, R, nperm, one)
        out = np.zeros((N, m))
        buf = np.zeros((nperm, Nh * R, m))
        flatbuf = buf.reshape(nperm * Nh * R, m)
        for scatter, gather in self._position_layout():
            flatbuf[scatter] = X
            Xs = buf.sum(axis=0) if nperm > 1 else buf[0]
            Z = Ms @ Xs.reshape(Nh, R * m)
            out += Z.reshape(Nh * R, m)[gather]
            buf.fill(0.0)
        self.matvecs += m
        return out[:, 0] if one else out

    def _matvec1(self, x, Ms, Nh, R, nperm, one):
        out = np.zeros(x.shape[0])
        buf = np.zeros((nperm, Nh * R))
        flatbuf = buf.reshape(-1)
        for scatter, gather in self._position_layout():
            flatbuf[scatter] = x
            Xs = buf.sum(axis=0) if nperm > 1 else buf[0]
            out += (Ms @ Xs.reshape(Nh, R)).reshape(-1)[gather]
            buf.fill(0.0)
        self.matvecs += 1
        return out if one else out[:, None]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matmat(x)

    __matmul__ = matmat

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.matvec, matmat=self.matmat, dtype=float)

    def to_dense(self, block: int = 256) -> np.ndarray:
        """Materialize by applying the operator to blocks of basis vectors."""
        N = self.dim
        if N > DENSE_TUPLE_CAP:
            raise ValueError(f"tuple dimension {N} exceeds the dense cap {DENSE_TUPLE_CAP}")
        K = np.empty((N, N))
        for s in range(0, N, block):
            e = np.zeros((N, min(block, N - s)))
            e[np.arange(s, s + e.shape[1]), np.arange(e.shape[1])] = 1.0
            K[:, s : s + e.shape[1]] = self.matmat(e)
        return K


def dense_tuple_kikuchi(h: Hypergraph, ell: int, mask=None) -> np.ndarray:
    """Tuple-indexed Kikuchi matrix built straight from the pairwise entry rule.

    Slow reference for small n: compares every pair of tuples.
    """
    P = h.params
    n, p = P.n, P.p
    T = TupleIndex(n, ell).all()
    N = T.shape[0]
    if N > 4000:
        raise ValueError("reference construction is limited to 4000 tuples")
    w = _edge_weights(h, mask)
    K = np.zeros((N, N))
    for i in range(N):
        S = T[i]
        diff = T != S
        cand = np.nonzero(diff.sum(axis=1) == p // 2)[0]
        for j in cand:
            d = sym_diff_tuple(S, T[j], p)
            if len(set(d)) == p:
                K[i, j] = w[int(subset_rank(sorted(d), n))]
    return K


def dense_set_kikuchi(h: Hypergraph, ell: int, mask=None) -> np.ndarray:
    """Set-indexed Kikuchi matrix: entry A_{S △ V} when |S △ V| = p."""
    P = h.params
    n, p = P.n, P.p
    hp = p // 2
    N = comb(n, ell)
    if N > DENSE_SET_CAP:
        raise ValueError(f"C(n, ell) = {N} exceeds the dense cap {DENSE_SET_CAP}")
    if not hp <= ell <= n - hp:
        raise ValueError("ell out of range")
    w = _edge_weights(h, mask)
    sets = all_subsets(n, ell)
    member = np.zeros((N, n), dtype=bool)
    member[np.arange(N)[:, None], sets] = True
    comp = np.nonzero(~member)[1].reshape(N, n - ell)
    K = np.zeros((N, N))
    rm_choices = list(itertools.combinations(range(ell), hp))
    add_choices = np.array(list(itertools.combinations(range(n - ell), hp)), dtype=np.int64)
    for rm in rm_choices:
        keep_pos = [i for i in range(ell) if i not in rm]
        removed = sets[:, list(rm)]  # (N, hp)
        kept = sets[:, keep_pos]
        added = comp[:, add_choices]  # (N, A, hp)
        A_ = added.shape[1]
        V = np.concatenate([np.broadcast_to(kept[:, None, :], (N, A_, ell - hp)), added], axis=2)
        V.sort(axis=2)
        E = np.concatenate([np.broadcast_to(removed[:, None, :], (N, A_, hp)), added], axis=2)
        E.sort(axis=2)
        rows = np.broadcast_to(np.arange(N)[:, None], (N, A_))
        K[rows, subset_rank(V, n)] = w[subset_rank(E, n)]
    return K


def symmetric_embedding(n: int, ell: int):
    """Sparse isometry J from set-indexed vectors to symmetric tuple vectors."""
    import scipy.sparse as sp

    T = TupleIndex(n, ell).all()
    cols = subset_rank(np.sort(T, axis=1), n)
    vals = np.full(T.shape[0], 1.0 / math.sqrt(factorial(ell)))
    return sp.csr_matrix((vals, (np.arange(T.shape[0]), cols)), shape=(T.shape[0], comb(n, ell)))


@dataclass
class SpectralEstimate:
    lambda_max: float
    iterations: int
    residual: float
    method: str
    converged: bool
    vector: np.ndarray | None = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        return {
            "lambda_max": self.lambda_max,
            "iterations": self.iterations,
            "residual": self.residual,
            "method": self.method,
            "converged": self.converged,
        }


def _default_max_iter(op) -> int:
    ell = getattr(op, "ell", 1)
    return int(math.ceil(10 * ell * math.log(max(op.shape[0], 2))))


def _start_vector(N: int, seed) -> np.ndarray:
    v = rng_for(0 if seed is None else seed, STREAM_SOLVER).standard_normal(N)
    return v / np.linalg.norm(v)


def lambda_max(op, tol: float = 1e-6, max_iter: int | None = None, seed=0, method: str = "lanczos") -> SpectralEstimate:
    """Largest (signed) eigenvalue of a Kikuchi operator or a dense symmetric matrix.

    ``method`` is "lanczos" (ARPACK, implicitly restarted), "power" (shifted
    power iteration) or "dense" (full eigendecomposition). ``iterations``
    counts matrix-vector products. ``residual`` is ||Kv - lv|| / ||v||; a run
    counts as converged when it is at most ``tol * |l|``.
    """
    dense = isinstance(op, np.ndarray)
    N = op.shape[0]
    if max_iter is None:
        max_iter = _default_max_iter(op)
    apply = (lambda x: op @ x) if dense else op.matvec

    if method == "dense":
        K = op if dense else op.to_dense()
        w, V = scipy.linalg.eigh(K, subset_by_index=[N - 1, N - 1])
        v = V[:, 0]
        res = float(np.linalg.norm(K @ v - w[0] * v))
        return SpectralEstimate(float(w[0]), 1, res, "dense", True, v)

    v0 = _start_vector(N, seed)
    counter = [0]

    def mv(x):
        counter[0] += 1
        return apply(np.asarray(x, dtype=float).ravel())

    if method == "lanczos":
        if N <= 3:
            return lambda_max(op, tol, max_iter, seed, "dense")
        lo = spla.LinearOperator((N, N), matvec=mv, dtype=float)
        ncv = min(N - 1, 24)
        try:
            w, V = spla.eigsh(lo, k=1, which="LA", v0=v0, tol=tol, ncv=ncv, maxiter=max(1, max_iter // ncv + 1))
            lam, v = float(w[0]), V[:, 0]
        except spla.ArpackNoConvergence as exc:
            if len(exc.eigenvalues):
                lam, v = float(exc.eigenvalues[0]), exc.eigenvectors[:, 0]
            else:
                return lambda_max(op, tol, max_iter, seed, "power")
        iters = counter[0]
        r = apply(v) - lam * v
        res = float(np.linalg.norm(r) / np.linalg.norm(v))
        return SpectralEstimate(lam, iters, res, "lanczos", res <= tol * max(abs(lam), 1e-300), v)

    if method == "power":
        # shift by a Gershgorin-type bound so the top algebraic eigenvalue dominates
        if dense:
            shift = float(np.max(np.abs(op).sum(axis=1)))
        else:
            shift = float(np.max(np.abs(op._weights))) * row_degree(op.n, op.ell, op.p)
        v = v0
        lam, res = 0.0, np.inf
        for it in range(1, max_iter + 1):
            Kv = mv(v)
            lam = float(v @ Kv)
            res = float(np.linalg.norm(Kv - lam * v))
            if res <= tol * max(abs(lam), 1e-300):
                return SpectralEstimate(lam, counter[0], res, "power", True, v)
            w_ = Kv + shift * v
            v = w_ / np.linalg.norm(w_)
        return SpectralEstimate(lam, counter[0], res, "power", False, v)

    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class Thresholds:
    tau: float
    null_bound: float
    beta_min: float
    constant: float
    gap: float

    def as_dict(self):
        return {
            "tau": self.tau,
            "null_bound": self.null_bound,
            "beta_min": self.beta_min,
            "constant": self.constant,
            "gap": self.gap,
        }


def thresholds(params: ModelParams, ell: int, gap: float = 2.0, constant: float | None = None, beta: float | None = None) -> Thresholds:
    """Detection threshold tau, null spectral bound and minimal SNR at order ell.

    tau = C beta n^{p/2} ell^{p/2} / gap, null_bound = sqrt(6 n^{p/2} ell^{1+p/2} log n),
    beta_min = (3 sqrt 6 / C) ell^{1/2-p/4} n^{-p/4} sqrt(log n).
    """
    n, p, k = params.n, params.p, params.k
    if p % 2:
        raise ValueError("p must be even")
    if not p / 2 <= ell <= n - p / 2:
        raise ValueError(f"ell must lie in [{p // 2}, {n - p // 2}]")
    C = leading_constant(k, p) if constant is None else constant
    b = params.beta if beta is None else beta
    h = p / 2
    tau = C * b * n**h * ell**h / gap
    null = math.sqrt(6 * n**h * ell ** (1 + h) * LOG(n))
    bmin = 3 * math.sqrt(6) / C * ell ** (0.5 - p / 4) * n ** (-p / 4) * math.sqrt(LOG(n))
    return Thresholds(tau, null, bmin, C, gap)
