"""Moment oracles, characteristic tensors and the low-degree threshold.

Every closed form here has a brute-force counterpart so the two can be
compared directly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .model import BiasFunction, whitened_indicator

__all__ = [
    "MomentSet",
    "moment_set",
    "brute_force_moments",
    "closed_form_moments",
    "g_overlap",
    "g_product_configuration",
    "g_product_brute",
    "w_moments",
    "w_moments_mc",
    "CharacteristicTensor",
    "characteristic_tensor",
    "characteristic_tensor_lr",
    "contract",
    "marginal_order",
    "LCDFThreshold",
    "lcdf_threshold",
    "injective_norm_power",
    "leading_constant",
    "certificate_energy_mean",
]

DENSE_CAP = 5**12


@dataclass(frozen=True)
class MomentSet:
    mu: float
    gamma: float
    alpha: float
    c: float
    mu_bf: float
    gamma_bf: float
    alpha_bf: float
    provenance: str  # "closed-form" when the closed forms apply, else "brute-force"

    def max_discrepancy(self) -> float:
        return max(abs(self.mu - self.mu_bf), abs(self.gamma - self.gamma_bf), abs(self.alpha - self.alpha_bf))

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "gamma": self.gamma,
            "alpha": self.alpha,
            "c": self.c,
            "mu_bf": self.mu_bf,
            "gamma_bf": self.gamma_bf,
            "alpha_bf": self.alpha_bf,
            "provenance": self.provenance,
        }


def brute_force_moments(f: BiasFunction) -> tuple[float, float, float]:
    """E f^2, E f^3, E f^4 over uniform a in [k]^p, exactly summed."""
    vals = f.dense().ravel()
    N = vals.size
    return (
        math.fsum(vals**2) / N,
        math.fsum(vals**3) / N,
        math.fsum(vals**4) / N,
    )


def closed_form_moments(k: int, p: int) -> tuple[float, float, float]:
    """(mu, gamma, alpha) of the whitened indicator, valid for every p."""
    s = (-1) ** p
    mu = k * ((k - 1) ** p + (k - 1) * s) / k ** (2 * p)
    gamma = k ** (1 - 3 * p) * (
        (k - 1) ** p * (k - 2) ** p + 3 * (k - 1) * s * (k - 2) ** p + (k - 1) * (k - 2) * 2**p
    )
    single = (k - 1) * ((k - 1) ** 3 + 1) / k**5
    three_one = -((k - 1) ** 3 + 1) / k**5
    two_two = (2 * k - 3) / k**4
    two_one_one = (k - 3) / k**4
    alpha = math.fsum(
        [
            k * single**p,
            4 * k * (k - 1) * three_one**p,
            3 * k * (k - 1) * two_two**p,
            6 * k * (k - 1) * (k - 2) * two_one_one**p,
            k * (k - 1) * (k - 2) * (k - 3) * (-3.0) ** p / k ** (4 * p),
        ]
    )
    return mu, gamma, alpha


def moment_set(f: BiasFunction, theta0: float) -> MomentSet:
    mu_bf, gamma_bf, alpha_bf = brute_force_moments(f)
    c = (1.0 - 2.0 * theta0) / (theta0 * (1.0 - theta0))
    if f.allclose(whitened_indicator(f.k, f.p), atol=1e-15):
        mu, gamma, alpha = closed_form_moments(f.k, f.p)
        prov = "closed-form"
    else:
        mu, gamma, alpha = mu_bf, gamma_bf, alpha_bf
        prov = "brute-force"
    return MomentSet(mu, gamma, alpha, c, mu_bf, gamma_bf, alpha_bf, prov)


def g_overlap(k: int, p: int, s: int) -> float:
    """g_{k,p}(s) for two p-sets sharing s vertices."""
    if not 0 <= s <= p:
        raise ValueError(f"s must lie in [0, {p}]")
    a = (k - 1) / k**2
    b = -1.0 / k**2
    return (
        a ** (2 * p - s)
        + 2 * (k - 1) * a ** (p - s) * b**p
        + (k - 1) * a**s * b ** (2 * (p - s))
        + (k - 1) * (k - 2) * b ** (2 * p - s)
    )


def g_product_configuration(p: int, s_list) -> tuple[list, list, list, int]:
    """Explicit blocks (A_u, B_u) with |A_u & B_u| = s_u and C = union of A_u ^ B_u.

    Returns (A, B, C, support_size). Blocks use disjoint vertex ranges.
    """
    A, B = [], []
    nxt = 0
    for s in s_list:
        a = list(range(nxt, nxt + p))
        nxt += p
        b = a[:s] + list(range(nxt, nxt + p - s))
        nxt += p - s
        A.append(a)
        B.append(b)
    C = sorted(v for a, b in zip(A, B) for v in set(a) ^ set(b))
    if len(C) != p:
        raise ValueError(f"sum of 2(p - s_u) must equal p, got |C| = {len(C)}")
    return A, B, C, nxt


def g_product_brute(f: BiasFunction, s_list) -> float:
    """E_x[prod_u f(x_A_u) f(x_B_u) * f(x_C)] by enumerating labels on the support."""
    k, p = f.k, f.p
    A, B, C, m = g_product_configuration(p, s_list)
    if k**m > 10**7:
        raise ValueError("support too large for exhaustive enumeration")
    X = np.array(list(itertools.product(range(k), repeat=m)), dtype=np.int8)
    prod = f(X[:, C])
    for a, b in zip(A, B):
        prod = prod * f(X[:, a]) * f(X[:, b])
    return math.fsum(prod) / X.shape[0]


def w_moments(k: int, p: int, theta0: float, eps: float, lam: int, a: int, b: int) -> tuple[float, float]:
    """Mean and variance over labels of W(a, b) on disjoint blocks."""
    if a < 0 or b < 0 or a + b != lam:
        raise ValueError("need a, b >= 0 with a + b = lambda")
    mu, gamma, alpha = closed_form_moments(k, p)
    c = (1.0 - 2.0 * theta0) / (theta0 * (1.0 - theta0))
    beta2 = eps**2 / (theta0 * (1.0 - theta0))
    h2 = (1.0 + eps**2 * mu * c**2) ** a + (beta2**2 * alpha) ** a - 2.0 * (beta2 * (mu + eps * gamma * c)) ** a
    if b >= 1:
        return 0.0, (beta2 * mu) ** (2 * b) * h2
    mean = 1.0 - (beta2 * mu) ** lam
    return mean, h2 - mean**2


def _conditional_A_moments(prob, theta0):
    """E[A | theta] and E[A^2 | theta] for A = (Y - theta0)/sigma, Y ~ Bern(theta)."""
    var0 = theta0 * (1.0 - theta0)
    m1 = (prob - theta0) / math.sqrt(var0)
    m2 = (prob * (1.0 - theta0) ** 2 + (1.0 - prob) * theta0**2) / var0
    return m1, m2


def w_moments_mc(
    f: BiasFunction,
    theta0: float,
    eps: float,
    a: int,
    b: int,
    samples: int = 10**6,
    seed: int = 0,
    route: str = "x",
    chunk: int = 200_000,
) -> dict:
    """Monte Carlo estimate of mean and variance over x of W(a, b).

    route "x": sample labels, use exact conditional Bernoulli moments per set.
    route "xy": also sample edges; four independent edge draws per x give
    unbiased estimates of W(x) and W(x)^2.
    Returns dict with mean, var and their standard errors.
    """
    rng = np.random.default_rng(seed)
    p, k = f.p, f.k
    nsets = a + 2 * b
    acc = {"w": [], "w1w2": []}
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        done += m
        x = rng.integers(0, k, size=(m, nsets, p))
        prob = theta0 + eps * f(x)  # (m, nsets)
        Ua, Vp, Vpp = prob[:, :a], prob[:, a : a + b], prob[:, a + b :]
        if route == "x":
            m1a, m2a = _conditional_A_moments(Ua, theta0)
            m1p, _ = _conditional_A_moments(Vp, theta0)
            m1pp, _ = _conditional_A_moments(Vpp, theta0)
            g = np.prod(m1p, axis=1) * np.prod(m1pp, axis=1)
            w = g * (np.prod(m2a, axis=1) - np.prod(m1a, axis=1) ** 2)
            acc["w"].append(w)
            acc["w1w2"].append(w * w)
        elif route == "xy":
            sig = math.sqrt(theta0 * (1.0 - theta0))

            def draw():
                Y = rng.random(prob.shape) < prob
                return (Y - theta0) / sig

            def w_hat():
                A1, A2 = draw(), draw()
                U1 = np.prod(A1[:, :a], axis=1)
                U2 = np.prod(A2[:, :a], axis=1)
                first = U1**2 * np.prod(A1[:, a : a + b], axis=1) * np.prod(A1[:, a + b :], axis=1)
                second = U1 * np.prod(A1[:, a : a + b], axis=1) * U2 * np.prod(A2[:, a + b :], axis=1)
                return first - second

            w1, w2 = w_hat(), w_hat()
            acc["w"].append(0.5 * (w1 + w2))
            acc["w1w2"].append(w1 * w2)
        else:
            raise ValueError("route must be 'x' or 'xy'")
    w = np.concatenate(acc["w"])
    ww = np.concatenate(acc["w1w2"])
    mean = float(w.mean())
    second = float(ww.mean())
    var = second - mean**2
    se_mean = float(w.std(ddof=1) / math.sqrt(w.size))
    # delta method for second - mean^2
    grad = np.vstack([ww, w]).T
    cov = np.cov(grad, rowvar=False) / w.size
    jac = np.array([1.0, -2.0 * mean])
    se_var = float(math.sqrt(max(jac @ cov @ jac, 0.0)))
    return {"mean": mean, "var": var, "se_mean": se_mean, "se_var": se_var, "samples": int(w.size)}


@dataclass(frozen=True)
class CharacteristicTensor:
    """Dense tensor over j slot pairs; axis i is a_i, axis j+i is b_i."""

    k: int
    order: int
    entries: np.ndarray

    def pair_view(self) -> np.ndarray:
        """Reshape to (k^2,)*order with slot index a*k + b."""
        j, k = self.order, self.k
        perm_axes = [ax for i in range(j) for ax in (i, j + i)]
        return np.transpose(self.entries, perm_axes).reshape((k * k,) * j)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.entries))) if self.entries.size else 0.0


def _check_dense(k, j):
    if k ** (2 * j) > DENSE_CAP:
        raise ValueError(f"dense tensor with k^(2j) = {k ** (2 * j)} entries exceeds the cap {DENSE_CAP}")


def characteristic_tensor(f: BiasFunction, theta0: float, eps: float) -> CharacteristicTensor:
    """(eps^2/p!)(1/theta0 + 1/(1 - theta0)) f(a) f(b) for the Bernoulli channel."""
    if not (0.0 < theta0 - eps * f.max_abs() and theta0 + eps * f.max_abs() < 1.0):
        raise ValueError("channel probabilities leave (0, 1)")
    _check_dense(f.k, f.p)
    F = f.dense()
    coef = eps**2 / factorial(f.p) * (1.0 / theta0 + 1.0 / (1.0 - theta0))
    return CharacteristicTensor(f.k, f.p, coef * np.multiply.outer(F, F))


def characteristic_tensor_lr(prob: np.ndarray) -> CharacteristicTensor:
    """Characteristic tensor of a Bernoulli GSBM from its probability table.

    Uses the likelihood ratios of Bern(prob[a]) against the average measure,
    summing over the two outcomes of y explicitly.
    """
    prob = np.asarray(prob, dtype=float)
    j, k = prob.ndim, prob.shape[0]
    _check_dense(k, j)
    avg = prob.mean()
    T = np.zeros(prob.shape * 2)
    for y_prob_a, y_prob_avg in ((prob, avg), (1.0 - prob, 1.0 - avg)):
        lr = y_prob_a / y_prob_avg - 1.0
        T += y_prob_avg * np.multiply.outer(lr, lr)
    return CharacteristicTensor(k, j, T / factorial(j))


def contract(T: CharacteristicTensor, j: int) -> CharacteristicTensor:
    """T^{(p-j)}: average the first j slot pairs against the all-ones vector."""
    p = T.order
    if not 0 <= j <= p:
        raise ValueError("j out of range")
    axes = tuple(range(j)) + tuple(range(p, p + j))
    return CharacteristicTensor(T.k, p - j, T.entries.mean(axis=axes) if j else T.entries.copy())


def marginal_order(f: BiasFunction, theta0: float, eps: float, rtol: float = 1e-12) -> int:
    T = characteristic_tensor(f, theta0, eps)
    scale = T.max_abs()
    if scale == 0.0:
        raise ValueError("trivial model: characteristic tensor vanishes")
    for order in range(1, f.p + 1):
        if contract(T, f.p - order).max_abs() > rtol * scale:
            return order
    raise AssertionError("unreachable")


def injective_norm_power(T: CharacteristicTensor, iters: int = 200, restarts: int = 8, seed: int = 0) -> float:
    """Heuristic estimate of max_{|v|=1} |T(v, ..., v)| by symmetric power iteration.

    Any unit vector gives a lower bound on the injective norm; this returns
    the best value found over random restarts and the e_(1,1) start.
    """
    Tp = T.pair_view()
    j = T.order
    N = Tp.shape[0]
    rng = np.random.default_rng(seed)

    def value(v):
        out = Tp
        for _ in range(j):
            out = out @ v
        return float(out)

    def grad(v):
        out = Tp
        for _ in range(j - 1):
            out = out @ v
        return out

    starts = [np.eye(N)[0]] + [rng.standard_normal(N) for _ in range(restarts)]
    best = 0.0
    for v in starts:
        v = v / np.linalg.norm(v)
        for _ in range(iters):
            g = grad(v)
            if value(v) < 0:
                g = -g
            nrm = np.linalg.norm(g)
            if nrm == 0:
                break
            v_new = g / nrm
            if np.linalg.norm(v_new - v) < 1e-13:
                v = v_new
                break
            v = v_new
        best = max(best, abs(value(v)))
    return best


@dataclass(frozen=True)
class LCDFThreshold:
    beta: np.ndarray | float
    constant: float  # C with beta = C D^{1/2-p/4} n^{-p/4}
    witness_f2: float  # f(monochromatic)^2: the e_(1,1) witness divided by beta^2/p!
    printed_f2: float  # [(1-1/k)^p + (k-1)k^{-p}]^2 (equals witness_f2 for even p)
    c_budget: float
    note: str = "witness-based constant, not tight"


def lcdf_threshold(k: int, p: int, n, D, c_budget: float = 1.0) -> LCDFThreshold:
    """SNR below which no coordinate-degree-D test separates the models.

    The injective norm of T is at least beta^2 f(1..1)^2 / p! (evaluate at
    e_(1,1)); requiring that to stay under c n^{-p/2} D^{1-p/2} and solving
    for beta gives C = sqrt(c p!)/|f(1..1)|.
    """
    if p <= 2:
        raise ValueError("the coordinate-degree bound needs p > 2")
    D = np.asarray(D, dtype=float)
    if np.any(D < 1):
        raise ValueError("D must be >= 1")
    fmono = (1 - 1 / k) ** p + (k - 1) * (-1 / k) ** p
    printed = ((1 - 1 / k) ** p + (k - 1) * k ** (-p)) ** 2
    C = math.sqrt(c_budget * factorial(p)) / abs(fmono)
    beta = C * D ** (0.5 - p / 4) * np.asarray(n, dtype=float) ** (-p / 4)
    if beta.ndim == 0:
        beta = float(beta)
    return LCDFThreshold(beta, C, fmono**2, printed, c_budget)


def leading_constant(k: int, p: int) -> float:
    """Closed-form leading constant of the planted certificate energy.

    k (g(p-1)/mu)^{p/2} / (p/2)!, from the term with p/2 blocks each sharing
    p-1 vertices.
    """
    if p % 2:
        raise ValueError("p must be even")
    mu = closed_form_moments(k, p)[0]
    return k * (g_overlap(k, p, p - 1) / mu) ** (p // 2) / factorial(p // 2)


def _compositions(total: int, parts: int, lo: int, hi: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(lo, min(hi, total) + 1):
        for rest in _compositions(total - first, parts - 1, lo, hi):
            yield (first,) + rest


def certificate_energy_mean(k: int, p: int, n: int, lam: int, beta: float = 1.0) -> float:
    """E<v|K|v> / E<v|v> for the certificate at level lam, exact at finite n.

    Sums every block-disagreement pattern: r blocks change, block u keeps
    s_u of its p vertices, and the p/2 new vertices come from outside the
    current tuple.
    """
    if p % 2:
        raise ValueError("p must be even")
    h = p // 2
    mu = closed_form_moments(k, p)[0]
    outside = math.comb(n - lam * p, h) * factorial(h)
    total = 0.0
    for r in range(1, min(lam, h) + 1):
        inner = 0.0
        # d_u = p - s_u >= 1 new vertices per changed block, summing to p/2
        for d in _compositions(h, r, 1, p):
            term = k / mu**r
            for du in d:
                s = p - du
                term *= comb(p, s) * g_overlap(k, p, s)
            inner += term
        total += comb(lam, r) * inner
    return beta * outside * total
