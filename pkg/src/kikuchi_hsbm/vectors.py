"""Certificate and guiding vectors, the collision-free sector, and overlaps.

A :class:`ProductVector` stands for Π_λ base^{⊗λ}: the λ-fold tensor power
of a vector over symmetrized p-sets, restricted to tuples of pairwise
disjoint sets. Its tuple coordinate at T = (T_1, ..., T_λ) is
prod_t base[set(T_t)] / sqrt(p!)^λ.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from math import comb, factorial

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .combinatorics import TupleIndex, all_subsets, subset_rank
from .kikuchi import DENSE_TUPLE_CAP, KikuchiOperator, _start_vector, dense_set_kikuchi
from .model import STREAM_MASK, BiasFunction, Hypergraph, rng_for

__all__ = [
    "ProductVector",
    "BatchMask",
    "batch_mask",
    "certificate_base",
    "guiding_base",
    "collision_free_count",
    "collision_free_sum",
    "collision_free_norm2",
    "overlap",
    "materialize",
    "rayleigh",
    "Spectrum",
    "spectrum",
    "eigenspace_overlap",
    "split",
    "directional_check",
    "certificate_mass_bound",
    "enumerate_collision_free",
    "overlap_count_histogram",
]

EXACT_CAP = 10**7
RAYLEIGH_CAP = 10**6


@dataclass(frozen=True)
class ProductVector:
    lam: int
    base: np.ndarray
    n: int
    p: int

    def __post_init__(self):
        if self.base.shape != (comb(self.n, self.p),):
            raise ValueError("base must have one coefficient per p-subset")
        if not np.all(np.isfinite(self.base)):
            raise ValueError("base coefficients must be finite")
        if self.lam * self.p > self.n:
            raise ValueError("lambda * p exceeds n")

    @property
    def ell(self) -> int:
        return self.lam * self.p

    def normalized_base(self) -> "ProductVector":
        return ProductVector(self.lam, self.base / np.linalg.norm(self.base), self.n, self.p)


@dataclass(frozen=True)
class BatchMask:
    assignment: np.ndarray  # batch id in range(L) per p-subset rank; batch "1" is id 0
    L: int
    seed: int

    @property
    def zeta(self) -> float:
        return 1.0 / self.L

    def batch(self, b: int = 0) -> np.ndarray:
        return self.assignment == b

    def complement(self, b: int = 0) -> np.ndarray:
        return self.assignment != b


def batch_mask(n: int, p: int, seed: int, L: int | None = None) -> BatchMask:
    """Assign every p-subset to one of L = ceil(ln n) batches uniformly at random."""
    if L is None:
        L = max(1, math.ceil(math.log(n)))
    a = rng_for(seed, STREAM_MASK).integers(0, L, comb(n, p))
    a.setflags(write=False)
    return BatchMask(a, L, int(seed))


def certificate_base(h: Hypergraph, f: BiasFunction) -> np.ndarray:
    """f(x_S) for every p-subset S."""
    if h.labels is None:
        raise ValueError("the certificate needs the ground-truth labels")
    S = all_subsets(h.params.n, h.params.p)
    return np.asarray(f(h.labels[S]), dtype=float)


def guiding_base(h: Hypergraph, mask: BatchMask | None = None, batch: int | None = None) -> np.ndarray:
    """A_S, or M_S A_S when restricted to one batch."""
    if mask is None:
        if batch is not None:
            raise ValueError("a batch id needs a mask")
        return np.array(h.A)
    if mask.assignment.shape != h.A.shape:
        raise ValueError("mask does not match the hypergraph")
    b = 0 if batch is None else batch
    if not 0 <= b < mask.L:
        raise ValueError("batch id out of range")
    return np.where(mask.batch(b), h.A, 0.0)


def collision_free_count(n: int, p: int, lam: int) -> int:
    """|C_λ| = prod_{r < λ} C(n - r p, p)."""
    return math.prod(comb(n - r * p, p) for r in range(lam))


def enumerate_collision_free(n: int, p: int, lam: int) -> np.ndarray:
    """Rank tuples (r_1..r_λ) of all ordered λ-tuples of pairwise disjoint p-sets."""
    S = all_subsets(n, p)
    bits = (np.int64(1) << S).sum(axis=1)
    out = [np.arange(len(S))[:, None]]
    used = bits.copy()
    for _ in range(lam - 1):
        prev = out[-1]
        ok = (used[:, None] & bits[None, :]) == 0
        i, j = np.nonzero(ok)
        out.append(np.concatenate([prev[i], j[:, None]], axis=1))
        used = used[i] | bits[j]
    return out[-1]


def _sum_lambda2(w: np.ndarray, n: int, p: int) -> float:
    """Σ over ordered disjoint pairs (S1, S2) of w_S1 w_S2, by inclusion-exclusion.

    With M_U = Σ_{S ⊇ U} w_S, the weight of sets meeting S1 is
    Σ_{∅≠U⊆S1} (-1)^{|U|+1} M_U.
    """
    S = all_subsets(n, p)
    total = math.fsum(w)
    meets = np.zeros_like(w)
    for j in range(1, p + 1):
        Mj = np.zeros(comb(n, j))
        pats = list(itertools.combinations(range(p), j))
        ranks = [subset_rank(S[:, list(pos)], n) for pos in pats]
        for r in ranks:
            Mj += np.bincount(r, weights=w, minlength=Mj.size)
        sign = 1.0 if j % 2 else -1.0
        for r in ranks:
            meets += sign * Mj[r]
    return math.fsum(w * (total - meets))


def _sum_enumerated(w: np.ndarray, n: int, p: int, lam: int) -> float:
    C = enumerate_collision_free(n, p, lam)
    return math.fsum(np.prod(w[C], axis=1))


def _sum_sampled(w: np.ndarray, n: int, p: int, lam: int, samples: int, seed: int) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    vals = []
    left = samples
    while left > 0:
        m = min(left, 100_000)
        left -= m
        perm_ = np.argsort(rng.random((m, n)), axis=1)[:, : lam * p].reshape(m, lam, p)
        perm_.sort(axis=2)
        vals.append(np.prod(w[subset_rank(perm_, n)], axis=1))
    v = np.concatenate(vals)
    size = collision_free_count(n, p, lam)
    return size * float(v.mean()), size * float(v.std(ddof=1)) / math.sqrt(v.size)


def collision_free_sum(w: np.ndarray, n: int, p: int, lam: int, samples: int = 200_000, seed: int = 0) -> tuple[float, float]:
    """Σ_{C ∈ C_λ} prod_t w_{C_t}; returns (value, standard error).

    Exact for λ <= 2 (inclusion-exclusion for λ = 2) and whenever
    C(n,p)^λ <= 10^7; otherwise uniform sampling of C_λ.
    """
    if lam * p > n:
        raise ValueError("lambda * p exceeds n")
    w = np.asarray(w, dtype=float)
    if lam == 1:
        return math.fsum(w), 0.0
    if lam == 2:
        return _sum_lambda2(w, n, p), 0.0
    if comb(n, p) ** lam <= EXACT_CAP:
        return _sum_enumerated(w, n, p, lam), 0.0
    return _sum_sampled(w, n, p, lam, samples, seed)


def collision_free_norm2(pv: ProductVector, **kw) -> float:
    return collision_free_sum(pv.base**2, pv.n, pv.p, pv.lam, **kw)[0]


def overlap(pv1: ProductVector, pv2: ProductVector, normalized: bool = False, **kw) -> float:
    if (pv1.n, pv1.p, pv1.lam) != (pv2.n, pv2.p, pv2.lam):
        raise ValueError("product vectors live in different spaces")
    val = collision_free_sum(pv1.base * pv2.base, pv1.n, pv1.p, pv1.lam, **kw)[0]
    if normalized:
        val /= math.sqrt(collision_free_norm2(pv1, **kw) * collision_free_norm2(pv2, **kw))
    return val


def materialize(pv: ProductVector, cap: int = RAYLEIGH_CAP) -> np.ndarray:
    """Explicit coordinates over collision-free ell-tuples (rank order)."""
    idx = TupleIndex(pv.n, pv.ell)
    if idx.size > cap:
        raise ValueError(f"tuple dimension {idx.size} exceeds the cap {cap}")
    T = idx.all().reshape(idx.size, pv.lam, pv.p)
    ranks = subset_rank(np.sort(T, axis=2), pv.n)
    return np.prod(pv.base[ranks], axis=1) / math.sqrt(factorial(pv.p)) ** pv.lam


def rayleigh(op: KikuchiOperator, pv: ProductVector) -> float:
    """<v|K|v> / <v|v> with the implicit matvec."""
    if op.ell != pv.ell or op.n != pv.n:
        raise ValueError("operator and vector dimensions differ")
    v = materialize(pv)
    nv = float(v @ v)
    if nv == 0.0:
        raise ValueError("zero vector")
    return float(v @ op.matvec(v)) / nv


@dataclass
class Spectrum:
    """Eigenpairs of a Kikuchi operator in either the set basis (ell = p) or the tuple basis.

    In the set basis the eigenvalues are those of (p/2)! K_set, the
    restriction of the bosonic matrix to fully symmetric vectors.
    """

    evals: np.ndarray
    evecs: np.ndarray
    basis: str
    n: int
    p: int
    ell: int
    complete: bool = True

    def coords(self, pv: ProductVector) -> np.ndarray:
        if pv.ell != self.ell or pv.n != self.n:
            raise ValueError("vector does not match the spectrum")
        if self.basis == "set":
            return pv.base
        return materialize(pv)

    def weights(self, pv: ProductVector) -> np.ndarray:
        """|<psi_i|v>|^2 / <v|v> for every stored eigenvector."""
        c = self.coords(pv)
        proj = self.evecs.T @ c
        return proj**2 / float(c @ c)

    def mass(self, pv: ProductVector, tau: float) -> float:
        w = self.weights(pv)
        if not self.complete and tau <= self.evals.min():
            raise ValueError("partial spectrum does not reach below tau")
        return float(w[self.evals >= tau].sum())


def spectrum(op: KikuchiOperator, tau: float | None = None, block: int = 8) -> Spectrum:
    """Eigendecomposition used by the eigenspace statistics.

    ell = p: dense set-indexed matrix scaled by (p/2)!.
    Small tuple dimension: dense tuple matrix.
    Otherwise (needs ``tau``): Lanczos for the top eigenpairs, widening the
    block until an eigenvalue below ``tau`` turns up.
    """
    n, p, ell = op.n, op.p, op.ell
    if ell == p:
        K = factorial(p // 2) * dense_set_kikuchi(op.h, ell, op.mask)
        w, V = scipy.linalg.eigh(K)
        return Spectrum(w, V, "set", n, p, ell)
    if op.dim <= DENSE_TUPLE_CAP:
        w, V = scipy.linalg.eigh(op.to_dense())
        return Spectrum(w, V, "tuple", n, p, ell)
    if tau is None:
        raise ValueError("tuple dimension too large for a dense eigendecomposition; pass tau")
    lo = op.as_linear_operator()
    k = block
    while True:
        w, V = spla.eigsh(lo, k=k, which="LA", v0=_start_vector(op.dim, 0), tol=1e-8)
        order = np.argsort(w)
        w, V = w[order], V[:, order]
        if w[0] < tau or k >= op.dim - 2:
            return Spectrum(w, V, "tuple", n, p, ell, complete=False)
        k = min(2 * k, op.dim - 2)


def eigenspace_overlap(op: KikuchiOperator, pv: ProductVector, tau: float) -> float:
    """<v|Π_≥(K)|v> / <v|v> for the eigenvalues at least tau."""
    return spectrum(op, tau).mass(pv, tau)


def split(h: Hypergraph, seed: int, ell: int | None = None, L: int | None = None):
    """Sample splitting: operator on batches 2..L, guide on batch 1.

    Returns (mask, complement operator, guide ProductVector).
    """
    P = h.params
    ell = P.p if ell is None else ell
    mask = batch_mask(P.n, P.p, seed, L)
    op = KikuchiOperator(h, ell, mask=mask.complement(0))
    guide = ProductVector(ell // P.p, guiding_base(h, mask, 0), P.n, P.p)
    return mask, op, guide


def certificate_mass_bound(zeta: float, constant: float) -> float:
    """(1 - 4 zeta) / (6/C' - 1) with C' = 2C/3."""
    cp = 2.0 * constant / 3.0
    return (1.0 - 4.0 * zeta) / (6.0 / cp - 1.0)


def directional_check(spec: Spectrum, cert: ProductVector, guide: ProductVector, tau: float, zeta: float, beta: float) -> dict:
    """Compare <s|u~> with (zeta beta)^λ <s|v> / 2 for s = Π_≥ v / |Π_≥ v|.

    Also returns FAIL = 4 λ! / ((zeta beta)^{2λ} <s|v>^2).
    """
    lam = cert.lam
    keep = spec.evals >= tau
    cv = spec.evecs[:, keep].T @ spec.coords(cert)
    cu = spec.evecs[:, keep].T @ spec.coords(guide)
    sv = float(np.linalg.norm(cv))
    if sv == 0.0:
        return {"s_u": 0.0, "s_v": 0.0, "rhs": 0.0, "holds": False, "fail_bound": math.inf}
    su = float(cv @ cu) / sv
    rhs = 0.5 * (zeta * beta) ** lam * sv
    fail = 4.0 * factorial(lam) / ((zeta * beta) ** (2 * lam) * sv**2)
    return {"s_u": su, "s_v": sv, "rhs": rhs, "holds": su >= rhs, "fail_bound": fail}


def overlap_count_histogram(n: int, p: int, lam: int) -> np.ndarray:
    """counts[r] = #{(C, C') in C_λ^2 whose vertex unions share r vertices}."""
    C = enumerate_collision_free(n, p, lam)
    S = all_subsets(n, p)
    bits = (np.int64(1) << S).sum(axis=1)
    union = np.bitwise_or.reduce(bits[C], axis=1)
    counts = np.zeros(lam * p + 1, dtype=np.int64)
    # group tuples by their vertex union: pairs only depend on the two unions
    uniq, mult = np.unique(union, return_counts=True)
    for i in range(len(uniq)):
        inter = uniq[i] & uniq
        r = np.array([int(v).bit_count() for v in inter])
        np.add.at(counts, r, mult[i] * mult)
    return counts
