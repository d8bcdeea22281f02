"""Idealized simulation of the quantum detector and its cost model.

Phase estimation is replaced by sampling eigenvalues of the (exactly
diagonalized) Kikuchi operator with probabilities given by the guiding
state's weights. Amplitude amplification is accounted for analytically.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .kikuchi import DENSE_SET_CAP, DENSE_TUPLE_CAP, thresholds
from .model import Hypergraph, rng_for
from .vectors import ProductVector, Spectrum, collision_free_norm2, spectrum, split

__all__ = [
    "STREAM_QPE",
    "QSimConfig",
    "prep_success_probability",
    "QPEResult",
    "qpe_sample",
    "amplified_success",
    "CostRecord",
    "detection_cost_sim",
    "QSimReport",
    "qsim_detect",
    "ResourceEstimate",
    "resource_estimate",
    "ESTIMATE_COLUMNS",
    "speedup_asymptote",
]

STREAM_QPE = 5


@dataclass
class QSimConfig:
    tau: float | None = None  # None: design threshold scaled to the operator's batches
    shots: int = 100
    use_amplitude_amplification: bool = False
    bits: int | None = None  # None: exact eigenvalues
    seed: int = 0
    set_cap: int = DENSE_SET_CAP
    tuple_cap: int = DENSE_TUPLE_CAP
    amp_constant: float = 1.0

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.bits is not None and self.bits < 1:
            raise ValueError("bits must be >= 1")


def prep_success_probability(base, lam: int, n: int | None = None, p: int | None = None) -> float:
    """Probability that lam copies of the normalized base land in the collision-free sector."""
    if isinstance(base, ProductVector):
        n, p, base = base.n, base.p, base.base
    if n is None or p is None:
        raise ValueError("n and p are required for a raw base vector")
    if lam * p > n:
        raise ValueError(f"lambda * p = {lam * p} exceeds n = {n}")
    base = np.asarray(base, dtype=float)
    nrm = np.linalg.norm(base)
    if nrm == 0:
        raise ValueError("zero base vector")
    return collision_free_norm2(ProductVector(lam, base / nrm, n, p))


def _round_to_bits(values: np.ndarray, bits: int, radius: float) -> np.ndarray:
    """Nearest point of a 2^bits grid spanning [-radius, radius]."""
    if radius == 0:
        return values.copy()
    step = 2 * radius / (2**bits - 1)
    return -radius + np.round((values + radius) / step) * step


@dataclass
class QPEResult:
    hits: int
    shots: int
    hit_probability: float  # exact, from the eigendecomposition
    histogram: dict = field(default_factory=dict)  # outcome -> count

    @property
    def hit_rate(self) -> float:
        return self.hits / self.shots


def qpe_sample(op, guide: ProductVector, tau: float, shots: int, seed: int = 0, bits: int | None = None) -> QPEResult:
    """Sample idealized phase-estimation outcomes for the guiding state.

    ``op`` is a :class:`KikuchiOperator` or an already computed
    :class:`Spectrum`. With ``bits`` set, each eigenvalue is rounded to a
    2^bits grid over [-Λ, Λ], Λ the spectral radius, before comparing to tau.
    """
    spec = op if isinstance(op, Spectrum) else spectrum(op, tau)
    if not spec.complete:
        raise ValueError("qpe_sample needs a full eigendecomposition (dense cap exceeded)")
    w = spec.weights(guide)
    w = w / w.sum()
    vals = spec.evals
    if bits is not None:
        vals = _round_to_bits(vals, bits, float(np.abs(spec.evals).max()))
    hit = vals >= tau
    rng = rng_for(seed, STREAM_QPE)
    draws = rng.choice(len(vals), size=shots, p=w)
    outcomes, counts = np.unique(vals[draws], return_counts=True)
    return QPEResult(
        hits=int(hit[draws].sum()),
        shots=shots,
        hit_probability=float(w[hit].sum()),
        histogram={float(o): int(c) for o, c in zip(outcomes, counts)},
    )


def amplified_success(o: float) -> tuple[float, int]:
    """Success probability and oracle rounds of one amplified attempt at base probability o.

    Uses the textbook rotation picture: r = floor(pi / (4 theta)) iterations
    with sin^2 theta = o give success sin^2((2r+1) theta).
    """
    if o <= 0:
        return 0.0, 1
    if o >= 1:
        return 1.0, 1
    theta = math.asin(math.sqrt(o))
    r = int(math.floor(math.pi / (4 * theta)))
    return math.sin((2 * r + 1) * theta) ** 2, r + 1


@dataclass
class CostRecord:
    overlaps: list
    plain_median: list  # empirical median of Geometric(o) draws
    plain_analytic: list  # ceil(-ln 2 / ln(1 - o))
    amplified: list  # ceil(c / sqrt(o))
    dims: list
    zero_overlap: list  # indices of flagged instances
    exponent_ratio: float  # least-squares slope of log(amplified) on log(plain)

    def as_dict(self):
        return asdict(self)


def _geometric_median(o: float) -> int:
    if o >= 1:
        return 1
    return math.ceil(-math.log(2) / math.log1p(-o))


def detection_cost_sim(instances, config: QSimConfig | None = None, ell: int | None = None, trials: int = 1001) -> CostRecord:
    """Repetitions to the first top-eigenspace hit, with and without amplification.

    ``instances`` yields overlaps (floats) or planted hypergraphs; the latter
    are split, diagonalized and their guide weight above tau is used.
    """
    cfg = config or QSimConfig()
    rng = rng_for(cfg.seed, STREAM_QPE)
    ovs, dims = [], []
    for inst in instances:
        if isinstance(inst, Hypergraph):
            rep = qsim_detect(inst, ell or inst.params.p, cfg, sample_shots=False)
            ovs.append(rep.overlap)
            dims.append(rep.dim)
        else:
            ovs.append(float(inst))
            dims.append(None)
    plain, analytic, amp, zero = [], [], [], []
    for i, o in enumerate(ovs):
        if o <= 0:
            zero.append(i)
            plain.append(math.inf)
            analytic.append(math.inf)
            amp.append(math.inf)
            continue
        plain.append(float(np.median(rng.geometric(min(o, 1.0), size=trials))))
        analytic.append(_geometric_median(o))
        amp.append(math.ceil(cfg.amp_constant / math.sqrt(o)))
    ok = [i for i in range(len(ovs)) if i not in zero and analytic[i] > 1]
    if len(ok) >= 1:
        x = np.log([analytic[i] for i in ok])
        y = np.log([amp[i] for i in ok])
        ratio = float(x @ y / (x @ x))
    else:
        ratio = math.nan
    return CostRecord(ovs, plain, analytic, amp, dims, zero, ratio)


@dataclass
class QSimReport:
    verdict: str
    tau: float
    overlap: float  # guide weight on eigenvalues >= tau
    prep_probability: float
    hits: int
    shots: int
    oracle_rounds: int
    lambda_max: float
    dim: int
    zeta: float
    seed: int
    amplified: bool
    bits: int | None

    def as_dict(self):
        return asdict(self)


def qsim_detect(h: Hypergraph, ell: int, config: QSimConfig | None = None, sample_shots: bool = True) -> QSimReport:
    """Split the instance, build the guide from one batch and run simulated phase estimation.

    The default tau is the design threshold times (1 - zeta), the share of
    p-sets left to the operator after splitting.
    """
    cfg = config or QSimConfig()
    P = h.params
    mask, op, guide = split(h, cfg.seed, ell)
    if ell == P.p and math.comb(P.n, P.p) > cfg.set_cap:
        raise ValueError("set dimension exceeds the dense cap")
    if ell != P.p and op.dim > cfg.tuple_cap:
        raise ValueError("tuple dimension exceeds the dense cap")
    tau = cfg.tau if cfg.tau is not None else (1 - mask.zeta) * thresholds(P, ell).tau
    spec = spectrum(op, tau)
    lam = ell // P.p
    eta = prep_success_probability(guide, lam) if lam > 1 else 1.0
    w = spec.weights(guide)
    vals = spec.evals if cfg.bits is None else _round_to_bits(spec.evals, cfg.bits, float(np.abs(spec.evals).max()))
    o = float(w[vals >= tau].sum() / w.sum())
    per_shot = eta * o
    rounds = 1
    if cfg.use_amplitude_amplification:
        per_shot, rounds = amplified_success(per_shot)
    hits = 0
    if sample_shots:
        rng = rng_for(cfg.seed, STREAM_QPE)
        hits = int(rng.binomial(cfg.shots, min(max(per_shot, 0.0), 1.0)))
    dim = len(spec.evals)
    return QSimReport(
        verdict="Planted" if hits > 0 else "Random",
        tau=tau,
        overlap=o,
        prep_probability=eta,
        hits=hits,
        shots=cfg.shots,
        oracle_rounds=rounds * cfg.shots,
        lambda_max=float(spec.evals.max()),
        dim=dim,
        zeta=mask.zeta,
        seed=cfg.seed,
        amplified=cfg.use_amplitude_amplification,
        bits=cfg.bits,
    )


ESTIMATE_COLUMNS = [
    "n",
    "p",
    "ell",
    "c_exp",
    "log_gates",
    "log_gates_leading",
    "log_polylog",
    "log_exp_factor",
    "log_classical_time",
    "qubits",
    "classical_bits",
    "speedup_exponent",
    "speedup_exponent_full",
]


@dataclass
class ResourceEstimate:
    """Cost model at one (n, p, ell); all ``log_*`` fields are natural logs.

    Gates: n^{ell/4} n^p ell^{ell/4 - ell/2p} (ln n)^{ell/2p} exp(c_exp ell).
    The speedup exponent compares classical time n^ell with the leading
    quantum factor n^{ell/4} ell^{ell/4 - ell/2p}; the polylog, exp(O(ell))
    and per-step n^p factors are kept as separate columns.
    """

    n: float
    p: int
    ell: float
    c_exp: float
    log_gates: float
    log_gates_leading: float
    log_polylog: float
    log_exp_factor: float
    log_classical_time: float
    qubits: int
    classical_bits: float
    speedup_exponent: float
    speedup_exponent_full: float

    @property
    def gate_count_scaling(self) -> float:
        return math.exp(self.log_gates) if self.log_gates < 700 else math.inf

    @property
    def classical_time(self) -> float:
        return math.exp(self.log_classical_time) if self.log_classical_time < 700 else math.inf

    def row(self) -> list:
        return [getattr(self, c) for c in ESTIMATE_COLUMNS]


def resource_estimate(n, p: int, ell, c_exp: float = 1.0) -> ResourceEstimate:
    if n < 2 or ell <= 0 or p < 2:
        raise ValueError("need n >= 2, p >= 2, ell > 0")
    ln = math.log(n)
    lead = ell / 4 * ln + (ell / 4 - ell / (2 * p)) * math.log(ell)
    poly = ell / (2 * p) * math.log(ln) if ln > 0 else 0.0
    expf = c_exp * ell
    gates = lead + p * ln + poly + expf
    classical = ell * ln
    return ResourceEstimate(
        n=n,
        p=p,
        ell=ell,
        c_exp=c_exp,
        log_gates=gates,
        log_gates_leading=lead,
        log_polylog=poly,
        log_exp_factor=expf,
        log_classical_time=classical,
        qubits=int(math.ceil(ell)) * math.ceil(math.log2(n)),
        classical_bits=float(ell) * float(n) ** p,
        speedup_exponent=classical / lead,
        speedup_exponent_full=classical / gates,
    )


def speedup_asymptote(p: int, ell_of_n, n_grid) -> dict:
    """Large-n limit of the speedup exponent from a grid of n values.

    The reciprocal exponent is affine in 1/ln n when ell is constant and
    constant when ell is a power of n, so a least-squares line in 1/ln n
    extrapolated to zero recovers the limit in both regimes.
    """
    n_grid = np.asarray(n_grid, dtype=float)
    E = np.array([resource_estimate(n, p, ell_of_n(n)).speedup_exponent for n in n_grid])
    x = 1 / np.log(n_grid)
    A = np.vstack([np.ones_like(x), x]).T
    (icpt, slope), *_ = np.linalg.lstsq(A, 1 / E, rcond=None)
    return {"limit": float(1 / icpt), "largest_n": float(E[-1]), "slope": float(slope), "exponents": E.tolist()}
