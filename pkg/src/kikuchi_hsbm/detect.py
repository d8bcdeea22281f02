"""Spectral detection and the Monte Carlo harness around it."""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .kikuchi import KikuchiOperator, Thresholds, lambda_max, thresholds
from .model import Hypergraph, ModelParams, sample, whitened_indicator
from .moments import certificate_energy_mean, leading_constant
from .vectors import ProductVector, certificate_base, rayleigh

__all__ = [
    "DetectionConfig",
    "DetectionReport",
    "run_detection",
    "wilson_interval",
    "SweepSpec",
    "parse_sweep_spec",
    "sweep",
    "SWEEP_COLUMNS",
    "CalibrationRecord",
    "calibrate",
]

SWEEP_COLUMNS = ["n", "k", "p", "ell", "beta", "trials", "planted_rate", "null_fp_rate", "ci_low", "ci_high"]


@dataclass
class DetectionConfig:
    tol: float = 1e-6
    max_iter: int | None = None
    seed: int = 0
    method: str = "lanczos"
    gap: float = 2.0
    constant: float | None = None
    design_beta: float | None = None  # SNR used for tau; defaults to the instance's
    tau: float | None = None  # explicit override


@dataclass
class DetectionReport:
    verdict: str
    lambda_max: float
    tau: float
    null_bound: float
    beta_min: float
    ell: int
    beta: float
    seed: int
    instance_seed: int
    wall_time: float
    iterations: int
    residual: float
    converged: bool
    method: str
    n: int
    p: int
    k: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def run_detection(h: Hypergraph, ell: int, config: DetectionConfig | None = None) -> DetectionReport:
    """Build the order-ell Kikuchi operator, estimate its top eigenvalue, compare to tau."""
    cfg = config or DetectionConfig()
    P = h.params
    t0 = time.perf_counter()
    th = thresholds(P, ell, gap=cfg.gap, constant=cfg.constant, beta=cfg.design_beta)
    tau = th.tau if cfg.tau is None else cfg.tau
    op = KikuchiOperator(h, ell)
    est = lambda_max(op, tol=cfg.tol, max_iter=cfg.max_iter, seed=cfg.seed, method=cfg.method)
    verdict = "Planted" if est.lambda_max > tau else "Random"
    return DetectionReport(
        verdict=verdict,
        lambda_max=est.lambda_max,
        tau=tau,
        null_bound=th.null_bound,
        beta_min=th.beta_min,
        ell=ell,
        beta=P.beta if cfg.design_beta is None else cfg.design_beta,
        seed=cfg.seed,
        instance_seed=h.seed,
        wall_time=time.perf_counter() - t0,
        iterations=est.iterations,
        residual=est.residual,
        converged=est.converged,
        method=est.method,
        n=P.n,
        p=P.p,
        k=P.k,
    )


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ph = successes / trials
    den = 1 + z * z / trials
    centre = (ph + z * z / (2 * trials)) / den
    half = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class SweepSpec:
    n: list = field(default_factory=list)
    k: list = field(default_factory=lambda: [2])
    p: list = field(default_factory=lambda: [4])
    ell: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    theta0: float = 0.45
    trials: int = 10
    seed: int = 0
    tol: float = 1e-6
    gap: float = 2.0
    out: str | None = None

    def snr_values(self, theta0: float) -> list[float]:
        if self.beta and self.eps:
            raise ValueError("give beta or eps, not both")
        if self.eps:
            return [e / math.sqrt(theta0 * (1 - theta0)) for e in self.eps]
        return list(self.beta)

    def cells(self) -> list[tuple]:
        snr = self.snr_values(self.theta0)
        out = []
        for n, k, p, ell, (bi, b) in itertools.product(self.n, self.k, self.p, self.ell, enumerate(snr)):
            if ell % p or not p / 2 <= ell <= n - p / 2:
                raise ValueError(f"invalid cell n={n}, p={p}, ell={ell}: need ell = 0 mod p and p/2 <= ell <= n - p/2")
            out.append((n, k, p, ell, bi, b))
        return out


_LIST_KEYS = {"n": int, "k": int, "p": int, "ell": int, "beta": float, "eps": float}
_SCALAR_KEYS = {"theta0": float, "trials": int, "seed": int, "tol": float, "gap": float, "out": str}


def parse_sweep_spec(text: str) -> SweepSpec:
    """Parse ``key=value`` lines; list values are comma separated, ``#`` starts a comment."""
    spec = SweepSpec()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value")
        if key in seen:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key in _LIST_KEYS:
            conv = _LIST_KEYS[key]
            setattr(spec, key, [conv(v) for v in val.split(",") if v.strip()] if val else [])
        elif key in _SCALAR_KEYS:
            setattr(spec, key, _SCALAR_KEYS[key](val))
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    if spec.trials < 1:
        raise ValueError("trials must be >= 1")
    return spec


def _cell_seeds(seed: int, cell: tuple, trials: int) -> np.ndarray:
    n, k, p, ell, bi, _ = cell
    ss = np.random.SeedSequence([seed, n, k, p, ell, bi])
    return ss.generate_state(2 * trials, dtype=np.uint64)


def run_cell(spec: SweepSpec, cell: tuple) -> dict:
    n, k, p, ell, _, beta = cell
    params = ModelParams.from_beta(n, k, p, spec.theta0, beta)
    f = whitened_indicator(k, p)
    seeds = _cell_seeds(spec.seed, cell, spec.trials)
    cfg = DetectionConfig(tol=spec.tol, gap=spec.gap)
    hits = fps = 0
    for t in range(spec.trials):
        hp = sample(params, f, True, int(seeds[2 * t]))
        hits += run_detection(hp, ell, cfg).verdict == "Planted"
        hn = sample(params, f, False, int(seeds[2 * t + 1]))
        fps += run_detection(hn, ell, cfg).verdict == "Planted"
    lo, hi = wilson_interval(hits, spec.trials)
    return {
        "n": n,
        "k": k,
        "p": p,
        "ell": ell,
        "beta": beta,
        "trials": spec.trials,
        "planted_rate": hits / spec.trials,
        "null_fp_rate": fps / spec.trials,
        "ci_low": lo,
        "ci_high": hi,
    }


def _fmt_row(row: dict) -> list[str]:
    return [repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in SWEEP_COLUMNS]


def _row_key(row) -> tuple:
    return (int(row["n"]), int(row["k"]), int(row["p"]), int(row["ell"]), float(row["beta"]))


def _read_existing(path: str) -> dict:
    done = {}
    if not os.path.exists(path):
        return done
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for row in csv.DictReader(lines):
        done[_row_key(row)] = row
    return done


def sweep(spec: SweepSpec, out: str | None = None, threads: int = 1) -> list[dict]:
    """Run every grid cell; rows are persisted one by one so a rerun resumes.

    Returns the rows in grid order. When ``out`` is given the CSV carries a
    version comment line and a sibling ``.manifest.json`` records per-row
    checksums.
    """
    cells = spec.cells()
    out = out or spec.out
    done = _read_existing(out) if out else {}
    todo = [c for c in cells if (c[0], c[1], c[2], c[3], float(c[5])) not in done]

    fh = None
    if out:
        fresh = not os.path.exists(out) or os.path.getsize(out) == 0
        fh = open(out, "a", newline="")
        if fresh:
            fh.write(f"# kikuchi-hsbm {__version__}\n")
            fh.write(",".join(SWEEP_COLUMNS) + "\n")
            fh.flush()

    results = {}
    try:
        if threads > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                futs = {pool.submit(run_cell, spec, c): c for c in todo}
                for fut in futs:
                    row = fut.result()
                    results[_row_key(row)] = row
                    if fh:
                        fh.write(",".join(_fmt_row(row)) + "\n")
                        fh.flush()
        else:
            for c in todo:
                row = run_cell(spec, c)
                results[_row_key(row)] = row
                if fh:
                    fh.write(",".join(_fmt_row(row)) + "\n")
                    fh.flush()
    finally:
        if fh:
            fh.close()

    rows = []
    for c in cells:
        key = (c[0], c[1], c[2], c[3], float(c[5]))
        if key in results:
            rows.append(results[key])
        else:
            r = done[key]
            rows.append({col: (float(r[col]) if col in ("beta", "planted_rate", "null_fp_rate", "ci_low", "ci_high") else int(r[col])) for col in SWEEP_COLUMNS})
    if out:
        _write_sorted(out, rows)
        manifest = {
            "tool": "kikuchi-hsbm",
            "version": __version__,
            "spec": asdict(spec),
            "rows": [hashlib.sha256(",".join(_fmt_row(r)).encode()).hexdigest() for r in rows],
            "sha256": _sha256_file(out),
        }
        with open(out + ".manifest.json", "w") as mf:
            json.dump(manifest, mf, indent=2, sort_keys=True)
    return rows


def _write_sorted(path: str, rows: list[dict]):
    buf = io.StringIO()
    buf.write(f"# kikuchi-hsbm {__version__}\n")
    buf.write(",".join(SWEEP_COLUMNS) + "\n")
    for r in rows:
        buf.write(",".join(_fmt_row(r)) + "\n")
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def _sha256_file(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


@dataclass
class CalibrationRecord:
    k: int
    p: int
    ell: int
    beta: float
    theta0: float
    n_list: list
    trials: int
    slope: float  # Monte Carlo constant
    closed_form: float
    ratio: float
    warn: bool
    cell_means: dict
    cell_slopes: dict
    exact_constants: dict  # finite-n constant from the exact expected energy

    def as_dict(self):
        return asdict(self)


def calibrate(k: int, p: int, n_list, trials: int, beta: float = 0.3, theta0: float = 0.3, ell: int | None = None, seed: int = 0) -> CalibrationRecord:
    """Fit certificate Rayleigh quotients against beta n^{p/2} ell^{p/2} through the origin."""
    if trials < 2:
        raise ValueError("calibration needs at least two trials per size")
    ell = p if ell is None else ell
    f = whitened_indicator(k, p)
    xs, ys = [], []
    means, slopes, exact = {}, {}, {}
    for n in n_list:
        params = ModelParams.from_beta(n, k, p, theta0, beta)
        x = beta * n ** (p / 2) * ell ** (p / 2)
        seeds = np.random.SeedSequence([seed, n, k, p, ell]).generate_state(trials, dtype=np.uint64)
        vals = []
        for s in seeds:
            h = sample(params, f, True, int(s))
            pv = ProductVector(ell // p, certificate_base(h, f), n, p)
            vals.append(rayleigh(KikuchiOperator(h, ell), pv))
        xs += [x] * trials
        ys += vals
        means[n] = float(np.mean(vals))
        slopes[n] = means[n] / x
        exact[n] = certificate_energy_mean(k, p, n, ell // p, beta) / x
    xs, ys = np.array(xs), np.array(ys)
    slope = float(xs @ ys / (xs @ xs))
    cf = leading_constant(k, p)
    ratio = slope / cf
    warn = not 0.75 <= ratio <= 1.33
    if warn:
        warnings.warn(f"Monte Carlo constant {slope:.4g} differs from the closed form {cf:.4g} (ratio {ratio:.3f})", stacklevel=2)
    return CalibrationRecord(k, p, ell, beta, theta0, list(n_list), trials, slope, cf, ratio, warn, means, slopes, exact)
