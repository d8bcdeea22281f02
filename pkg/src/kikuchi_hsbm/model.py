"""The p-marginal hypergraph stochastic block model.

Labels and vertices are 0-based in memory. The text format (see
:mod:`kikuchi_hsbm.fileio`) uses 1-based ids.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .combinatorics import all_subsets, subset_rank

__all__ = [
    "ModelParams",
    "BiasFunction",
    "Hypergraph",
    "whitened_indicator",
    "whiten",
    "sample",
    "edge_value",
    "edge_uniforms",
    "occupancies",
]

# one named substream per purpose, derived from the user seed
STREAM_LABELS = 1
STREAM_EDGES = 2
STREAM_MASK = 3
STREAM_SOLVER = 4


def rng_for(seed: int, stream: int) -> np.random.Generator:
    """Philox generator for a named substream of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


def edge_uniforms(seed: int, start: int, stop: int, stream: int = STREAM_EDGES) -> np.ndarray:
    """Uniforms for subset ranks ``start..stop-1``.

    Philox is counter based, so the value attached to rank ``r`` does not
    depend on how the rank range is chunked.
    """
    bg = np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(stream,)))
    block, offset = divmod(start, 4)  # four 64-bit words per counter step
    bg.advance(block)
    raw = bg.random_raw(offset + (stop - start))[offset:]
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True)
class ModelParams:
    n: int
    k: int
    p: int
    theta0: float
    eps: float
    moments_only: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.p < 2:
            raise ValueError("p must be >= 2")
        if self.n < self.p:
            raise ValueError("n must be >= p")
        if self.p % 2 and not self.moments_only:
            raise ValueError("odd p is only supported for moment computations")
        if not 0.0 < self.theta0 < 0.5:
            raise ValueError("theta0 must lie in (0, 1/2)")
        if not 0.0 <= self.eps < self.theta0:
            raise ValueError("eps must lie in [0, theta0)")

    @property
    def beta(self) -> float:
        return self.eps / math.sqrt(self.theta0 * (1.0 - self.theta0))

    @property
    def sigma(self) -> float:
        return math.sqrt(self.theta0 * (1.0 - self.theta0))

    @classmethod
    def from_beta(cls, n, k, p, theta0, beta):
        return cls(n, k, p, theta0, beta * math.sqrt(theta0 * (1.0 - theta0)))

    def regime_flags(self, ell: int | None = None, warn: bool = False) -> dict:
        """Which asymptotic parameter conditions hold at this (finite) size.

        The flags compare against the leading powers only, without constants.
        """
        n, p = self.n, self.p
        flags = {
            "beta_below_n^-p/4": self.beta <= n ** (-p / 4),
            "beta_above_n^(1/2-p/2)": self.beta >= n ** (0.5 - p / 2),
            "theta0_above_n^(1-p)": self.theta0 >= n ** (1 - p),
        }
        if ell is not None:
            flags["ell_below_sqrt_n"] = ell <= math.sqrt(n)
        if warn:
            bad = [k for k, v in flags.items() if not v]
            if bad:
                warnings.warn("asymptotic regime not met: " + ", ".join(bad), stacklevel=2)
        return flags


def occupancies(k: int, p: int) -> list[tuple[int, ...]]:
    """All occupancy vectors (m_1..m_k) with sum p, in lexicographic order."""
    out = []
    for bars in itertools.combinations(range(p + k - 1), k - 1):
        prev = -1
        m = []
        for b in bars:
            m.append(b - prev - 1)
            prev = b
        m.append(p + k - 1 - prev - 1)
        out.append(tuple(m))
    return sorted(out)


class BiasFunction:
    """Symmetric real function on [k]^p stored by occupancy vector."""

    def __init__(self, k: int, p: int, table: dict):
        self.k = int(k)
        self.p = int(p)
        occ = occupancies(self.k, self.p)
        missing = [m for m in occ if m not in table]
        if missing:
            raise ValueError(f"table misses occupancies, e.g. {missing[0]}")
        self.table = {m: float(table[m]) for m in occ}

    def __repr__(self):
        return f"BiasFunction(k={self.k}, p={self.p}, entries={len(self.table)})"

    def __call__(self, labels) -> np.ndarray | float:
        """Evaluate on label arrays of shape (..., p) with entries in range(k)."""
        a = np.asarray(labels)
        scalar = a.ndim == 1
        a = a.reshape(-1, self.p)
        counts = np.zeros((a.shape[0], self.k), dtype=np.int64)
        for i in range(self.k):
            counts[:, i] = (a == i).sum(axis=1)
        uniq, inv = np.unique(counts, axis=0, return_inverse=True)
        vals = np.array([self.table[tuple(int(c) for c in row)] for row in uniq])
        out = vals[inv.reshape(-1)]
        if scalar:
            return float(out[0])
        return out.reshape(np.asarray(labels).shape[:-1])

    def dense(self) -> np.ndarray:
        """Full table of shape (k,)*p."""
        grid = np.array(list(itertools.product(range(self.k), repeat=self.p)), dtype=np.int64)
        return self(grid).reshape((self.k,) * self.p)

    def max_abs(self) -> float:
        return max(abs(v) for v in self.table.values())

    def monochromatic(self) -> float:
        return self.table[(self.p,) + (0,) * (self.k - 1)]

    @classmethod
    def from_dense(cls, table: np.ndarray, symmetrize: bool = True) -> "BiasFunction":
        t = np.asarray(table, dtype=float)
        p = t.ndim
        k = t.shape[0]
        if symmetrize:
            t = _symmetrize(t)
        entries = {}
        for m in occupancies(k, p):
            idx = tuple(i for i, c in enumerate(m) for _ in range(c))
            entries[m] = t[idx]
        return cls(k, p, entries)

    def allclose(self, other: "BiasFunction", atol=1e-12) -> bool:
        return (self.k, self.p) == (other.k, other.p) and all(
            abs(self.table[m] - other.table[m]) <= atol for m in self.table
        )


def whitened_indicator(k: int, p: int) -> BiasFunction:
    """f(m) = sum_i (1 - 1/k)^{m_i} (-1/k)^{p - m_i}."""
    if k < 2 or p < 2:
        raise ValueError("need k >= 2 and p >= 2")
    a, b = 1.0 - 1.0 / k, -1.0 / k
    table = {m: math.fsum(a**mi * b ** (p - mi) for mi in m) for m in occupancies(k, p)}
    return BiasFunction(k, p, table)


def _symmetrize(t: np.ndarray) -> np.ndarray:
    p = t.ndim
    acc = np.zeros_like(t)
    for sigma in itertools.permutations(range(p)):
        acc += np.transpose(t, sigma)
    return acc / math.factorial(p)


def conditional_mean(t: np.ndarray, keep) -> np.ndarray:
    """E[t | a_keep] broadcast back to the full shape."""
    axes = tuple(i for i in range(t.ndim) if i not in set(keep))
    if not axes:
        return t.copy()
    return np.broadcast_to(t.mean(axis=axes, keepdims=True), t.shape).copy()


def whiten(f_tilde, p_star: int) -> BiasFunction:
    """Keep the components of order >= p_star of the Hoeffding decomposition.

    ``f_tilde`` is a dense (k,)*p array or a :class:`BiasFunction`; dense
    input is symmetrized by averaging over argument permutations first.
    """
    t = f_tilde.dense() if isinstance(f_tilde, BiasFunction) else np.asarray(f_tilde, dtype=float)
    p = t.ndim
    if not 2 <= p_star <= p:
        raise ValueError(f"p_star must lie in [2, {p}]")
    t = _symmetrize(t)
    out = np.zeros_like(t)
    # f = sum_{|S|>=p*} sum_{T<=S} (-1)^{|S-T|} m_T = sum_T c_{|T|} m_T
    for size in range(p + 1):
        c = sum(comb(p - size, j - size) * (-1) ** (j - size) for j in range(max(p_star, size), p + 1))
        if c == 0:
            continue
        for T in itertools.combinations(range(p), size):
            out += c * conditional_mean(t, T)
    return BiasFunction.from_dense(out, symmetrize=False)


class Hypergraph:
    """An observed instance: presence bit per p-subset (indexed by colex rank)."""

    def __init__(self, params: ModelParams, present: np.ndarray, planted: bool, labels=None, seed: int = 0):
        present = np.asarray(present, dtype=bool)
        if present.shape != (comb(params.n, params.p),):
            raise ValueError("presence bitmap has the wrong length")
        self.params = params
        self.present = present.copy()
        self.present.setflags(write=False)
        self.planted = bool(planted)
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64).copy()
            if labels.shape != (params.n,) or labels.min() < 0 or labels.max() >= params.k:
                raise ValueError("labels must be n entries in range(k)")
            labels.setflags(write=False)
        self.labels = labels
        self.seed = int(seed)
        self._A = None

    def __eq__(self, other):
        if not isinstance(other, Hypergraph):
            return NotImplemented
        same_labels = (self.labels is None and other.labels is None) or (
            self.labels is not None and other.labels is not None and np.array_equal(self.labels, other.labels)
        )
        return (
            self.params == other.params
            and self.planted == other.planted
            and self.seed == other.seed
            and same_labels
            and np.array_equal(self.present, other.present)
        )

    def __repr__(self):
        P = self.params
        return f"Hypergraph(n={P.n}, p={P.p}, k={P.k}, edges={self.num_edges}, planted={self.planted})"

    @property
    def num_edges(self) -> int:
        return int(self.present.sum())

    @property
    def A(self) -> np.ndarray:
        """Centered, scaled edge variables A_S over all subsets (colex order)."""
        if self._A is None:
            P = self.params
            A = (self.present.astype(float) - P.theta0) / P.sigma
            A.setflags(write=False)
            self._A = A
        return self._A

    def edges(self) -> np.ndarray:
        """Present edges as sorted 0-based rows, in lexicographic order."""
        S = all_subsets(self.params.n, self.params.p)[self.present]
        order = np.lexsort(S.T[::-1])
        return S[order]

    def with_labels(self, labels) -> "Hypergraph":
        return Hypergraph(self.params, self.present, self.planted, labels, self.seed)


def edge_value(h: Hypergraph, S) -> float:
    """A_S = (Y_S - theta0)/sqrt(theta0 (1 - theta0)) for a p-subset S (0-based)."""
    s = sorted(int(v) for v in S)
    P = h.params
    if len(s) != P.p or len(set(s)) != P.p or s[0] < 0 or s[-1] >= P.n:
        raise ValueError(f"not a {P.p}-subset of range({P.n}): {S!r}")
    return float(h.A[int(subset_rank(s, P.n))])


def sample(params: ModelParams, f: BiasFunction, planted: bool, seed: int, chunk: int = 1 << 20) -> Hypergraph:
    """Draw an instance. Planted: Y_S ~ Bern(theta0 + eps f(x_S)); null: Bern(theta0)."""
    if (f.k, f.p) != (params.k, params.p):
        raise ValueError("bias function does not match the model parameters")
    n, p = params.n, params.p
    if planted:
        lo = params.theta0 - params.eps * f.max_abs()
        hi = params.theta0 + params.eps * f.max_abs()
        if not (0.0 < lo and hi < 1.0):
            raise ValueError("edge probabilities leave (0, 1)")
    N = comb(n, p)
    labels = rng_for(seed, STREAM_LABELS).integers(0, params.k, n) if planted else None
    present = np.empty(N, dtype=bool)
    subsets = all_subsets(n, p)
    for start in range(0, N, chunk):
        stop = min(N, start + chunk)
        u = edge_uniforms(seed, start, stop)
        prob = np.full(stop - start, params.theta0)
        if planted and params.eps != 0.0:
            prob = prob + params.eps * f(labels[subsets[start:stop]])
        present[start:stop] = u < prob
    return Hypergraph(params, present, planted, labels, seed)
