"""Acceptance criteria, each run at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line (shown in the terminal
summary) before asserting. Criteria whose preconditions cannot be met at
desk scale still run and fail; the statistics they print explain why.
"""

import itertools
import math
import time
import warnings

import numpy as np
from conftest import ACCEPTANCE_LINES

from kikuchi_hsbm.detect import DetectionConfig, calibrate, run_detection
from kikuchi_hsbm.kikuchi import KikuchiOperator, dense_tuple_kikuchi, thresholds
from kikuchi_hsbm.model import BiasFunction, ModelParams, conditional_mean, occupancies, sample, whiten, whitened_indicator
from kikuchi_hsbm.moments import (
    brute_force_moments,
    certificate_energy_mean,
    closed_form_moments,
    g_overlap,
    g_product_brute,
    leading_constant,
    marginal_order,
    w_moments,
    w_moments_mc,
)
from kikuchi_hsbm.qsim import QSimConfig, qsim_detect, speedup_asymptote
from kikuchi_hsbm.vectors import (
    ProductVector,
    certificate_base,
    certificate_mass_bound,
    directional_check,
    guiding_base,
    overlap,
    rayleigh,
    spectrum,
    split,
)

F24 = whitened_indicator(2, 4)
MU24 = closed_form_moments(2, 4)[0]


def record(num, ok, detail):
    line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_criterion_01_moment_oracles():
    t0 = time.perf_counter()
    worst = 0.0
    for k in (2, 3, 4, 5):
        for p in (2, 3, 4, 6):
            cf = np.array(closed_form_moments(k, p))
            bf = np.array(brute_force_moments(whitened_indicator(k, p)))
            worst = max(worst, float(np.abs(cf - bf).max()))
    wall = time.perf_counter() - t0
    assert record(1, worst <= 1e-12 and wall < 10, f"max |closed - enumerated| = {worst:.2e}, {wall:.1f}s")


def test_criterion_02_g_product_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for k in (2, 3):
        f = whitened_indicator(k, 4)
        for s in [(2,), (3, 3), (2, 4), (4, 2)]:
            lhs = g_product_brute(f, s)
            rhs = k * math.prod(g_overlap(k, 4, x) for x in s)
            worst = max(worst, abs(lhs - rhs))
    wall = time.perf_counter() - t0
    assert record(2, worst <= 1e-12 and wall < 60, f"max |E prod - k prod g| = {worst:.2e}, {wall:.1f}s")


def _low_marginal(F, below):
    worst = 0.0
    for r in range(1, below):
        for keep in itertools.combinations(range(F.ndim), r):
            worst = max(worst, float(np.abs(conditional_mean(F, keep)).max()))
    return worst


def test_criterion_03_whitening():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for p_star in (2, 3, 4):
        for _ in range(5):
            F = whiten(rng.standard_normal((3,) * 4), p_star).dense()
            worst = max(worst, _low_marginal(F, p_star))
    k, p = 3, 4
    shifted = BiasFunction(k, p, {m: float(max(m) == p) - k ** (1 - p) for m in occupancies(k, p)})
    diff = float(np.abs(whiten(shifted, p).dense() - whitened_indicator(k, p).dense()).max())
    wall = time.perf_counter() - t0
    ok = worst < 1e-12 and diff < 1e-12 and wall < 5
    assert record(3, ok, f"max low-order marginal {worst:.2e}, indicator mismatch {diff:.2e}, {wall:.1f}s")


def test_criterion_04_marginal_order():
    t0 = time.perf_counter()
    k, p = 2, 4
    got_w = marginal_order(whitened_indicator(k, p), 0.3, 0.1)
    raw = BiasFunction(k, p, {m: float(max(m) == p) - k ** (1 - p) for m in occupancies(k, p)})
    got_raw = marginal_order(raw, 0.3, 0.1)
    w3 = whiten(np.random.default_rng(4).standard_normal((3,) * 4), 3)
    got_3 = marginal_order(w3, 0.3, 0.1 / w3.max_abs())
    wall = time.perf_counter() - t0
    ok = (got_w, got_raw, got_3) == (4, 2, 3) and wall < 10
    assert record(4, ok, f"orders whitened={got_w} raw={got_raw} p*=3 construction={got_3}, {wall:.1f}s")


def test_criterion_05_operator_equivalence():
    t0 = time.perf_counter()
    worst, cases = 0.0, 0
    for p in (2, 4):
        for ell in (2, 4):
            if ell % p:
                continue
            for n in range(ell + p // 2, 9):
                h = sample(ModelParams(n, 2, p, 0.3, 0.2), whitened_indicator(2, p), True, 100 * n + ell)
                D = dense_tuple_kikuchi(h, ell)
                worst = max(worst, float(np.abs(KikuchiOperator(h, ell).to_dense() - D).max()))
                cases += 1
    wall = time.perf_counter() - t0
    assert record(5, worst <= 1e-10 and wall < 60, f"{cases} cases, max |implicit - dense| = {worst:.2e}, {wall:.1f}s")


def test_criterion_06_null_spectrum_bound():
    t0 = time.perf_counter()
    P = ModelParams(20, 2, 4, 0.3, 0.0)
    bound = math.sqrt(6 * 400 * 64 * math.log(20))
    lams = []
    for s in range(50):
        h = sample(P, F24, False, 6000 + s)
        lams.append(run_detection(h, 4, DetectionConfig(seed=s)).lambda_max)
    frac = float(np.mean(np.array(lams) < bound))
    wall = time.perf_counter() - t0
    ok = frac >= 0.95 and wall < 600
    assert record(6, ok, f"bound {bound:.1f}; below in {frac:.0%}; lambda_max range [{min(lams):.1f}, {max(lams):.1f}], {wall:.0f}s")


def test_criterion_07_certificate_energy():
    t0 = time.perf_counter()
    n, beta, theta0 = 30, 0.3, 0.3
    P = ModelParams.from_beta(n, 2, 4, theta0, beta)
    C = leading_constant(2, 4)
    target = C * beta * n**2 * 16
    vals = []
    for s in range(100):
        h = sample(P, F24, True, 7000 + s)
        vals.append(rayleigh(KikuchiOperator(h, 4), ProductVector(1, certificate_base(h, F24), n, 4)))
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / 10)
    exact = certificate_energy_mean(2, 4, n, 1, beta)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # the ratio is reported below
        rec = calibrate(2, 4, [20, 25, 30], 20, beta=beta, theta0=theta0, seed=77)
    wall = time.perf_counter() - t0
    ok_energy = abs(mean / target - 1) <= 0.25
    ok_cal = abs(rec.slope / C - 1) <= 0.33
    ok = ok_energy and ok_cal and wall < 1800
    record(
        7,
        ok,
        f"MC mean {mean:.1f} +- {se:.1f} vs C beta n^2 l^2 = {target:.1f} (ratio {mean / target:.3f}); "
        f"exact finite-n mean {exact:.1f}; calibrated C_MC {rec.slope:.4f} vs {C:.4f} (ratio {rec.ratio:.3f}), {wall:.0f}s",
    )
    assert ok


def test_criterion_08_overlap_concentration():
    t0 = time.perf_counter()
    n, beta = 30, 0.5
    P = ModelParams.from_beta(n, 2, 4, 0.3, beta)
    res = {1: [], 2: []}
    for s in range(100):
        h = sample(P, F24, True, 8000 + s)
        cb, gb = certificate_base(h, F24), guiding_base(h)
        for lam in (1, 2):
            res[lam].append(overlap(ProductVector(lam, gb, n, 4), ProductVector(lam, cb, n, 4), normalized=True))
    parts, ok = [], True
    for lam in (1, 2):
        target = (beta * math.sqrt(MU24)) ** lam
        med = float(np.median(res[lam]))
        ok &= abs(med / target - 1) <= 0.2
        parts.append(f"lambda={lam}: median {med:.5f} vs {target:.5f} ({med / target:.3f})")
    wall = time.perf_counter() - t0
    ok &= wall < 1200
    assert record(8, ok, "; ".join(parts) + f", {wall:.0f}s")


def test_criterion_09_w_dictionary():
    t0 = time.perf_counter()
    k, p, theta0, eps = 2, 4, 0.3, 0.1
    worst, ok = 0.0, True
    for lam in (1, 2):
        for b in range(lam + 1):
            a = lam - b
            mean, var = w_moments(k, p, theta0, eps, lam, a, b)
            for route in ("x", "xy"):
                mc = w_moments_mc(F24, theta0, eps, a, b, samples=10**6, seed=900 + 10 * lam + b, route=route)
                for got, ref, se in ((mc["mean"], mean, mc["se_mean"]), (mc["var"], var, mc["se_var"])):
                    z = abs(got - ref) / se if se > 0 else (0.0 if got == ref else math.inf)
                    worst = max(worst, z)
                    ok &= z <= 3
    wall = time.perf_counter() - t0
    ok &= wall < 600
    assert record(9, ok, f"largest deviation {worst:.2f} sigma over both routes, {wall:.0f}s")


def test_criterion_10_eigenspace_mass_and_directional():
    t0 = time.perf_counter()
    n = 12
    theta0, eps = 0.45, 0.44  # largest SNR the model allows at this theta0
    P = ModelParams(n, 2, 4, theta0, eps)
    th = thresholds(P, 4)
    feasible = P.beta >= 1.5 * th.beta_min
    mass_ok, dir_fail, fail_bounds = 0, 0, []
    for s in range(50):
        h = sample(P, F24, True, 10_000 + s)
        mask, op, guide = split(h, 20_000 + s)
        tau = (1 - mask.zeta) * th.tau
        sp = spectrum(op)
        cert = ProductVector(1, certificate_base(h, F24), n, 4)
        mass_ok += sp.mass(cert, tau) >= certificate_mass_bound(mask.zeta, th.constant)
        d = directional_check(sp, cert, guide, tau, mask.zeta, P.beta)
        dir_fail += not d["holds"]
        fail_bounds.append(d["fail_bound"])
    wall = time.perf_counter() - t0
    allowed = 2 * float(np.median(fail_bounds))
    ok = feasible and mass_ok / 50 >= 0.8 and dir_fail / 50 <= allowed and wall < 1200
    record(
        10,
        ok,
        f"needs beta >= 1.5 beta_min = {1.5 * th.beta_min:.2f} but beta = {P.beta:.3f} (< 1 always); "
        f"at this beta: mass criterion {mass_ok}/50, directional failures {dir_fail}/50 "
        f"(2 FAIL = {allowed:.2f}), {wall:.0f}s",
    )
    assert ok


def test_criterion_11_strong_detection():
    t0 = time.perf_counter()
    # classical leg at n = 30: at n = 20 tau exceeds the expected planted energy
    P = ModelParams(30, 2, 4, 0.45, 0.44)
    hits = fps = 0
    for s in range(100):
        hits += run_detection(sample(P, F24, True, 11_000 + s), 4, DetectionConfig(seed=s)).verdict == "Planted"
    for s in range(100):
        fps += run_detection(sample(P, F24, False, 12_000 + s), 4, DetectionConfig(seed=s)).verdict == "Planted"
    t_classical = time.perf_counter() - t0

    Q = ModelParams(12, 2, 4, 0.45, 0.44)
    qh = qf = 0
    for s in range(100):
        qh += qsim_detect(sample(Q, F24, True, 13_000 + s), 4, QSimConfig(shots=100, seed=s)).verdict == "Planted"
        qf += qsim_detect(sample(Q, F24, False, 14_000 + s), 4, QSimConfig(shots=100, seed=s)).verdict == "Planted"
    wall = time.perf_counter() - t0
    ok_c = hits >= 90 and fps <= 10
    ok_q = qh >= 80 and qf <= 10
    ok = ok_c and ok_q and wall < 2700
    record(
        11,
        ok,
        f"classical n=30 beta={P.beta:.3f}: planted {hits}%, null FP {fps}% ({'ok' if ok_c else 'miss'}, {t_classical:.0f}s); "
        f"qsim n=12: planted {qh}%, null FP {qf}% ({'ok' if ok_q else 'miss'}), {wall:.0f}s",
    )
    assert ok


def test_criterion_12_speedup_exponents():
    t0 = time.perf_counter()
    grid = np.logspace(2, 6, 13)
    root = speedup_asymptote(4, math.sqrt, grid)
    const = speedup_asymptote(4, lambda n: 8, grid)
    wall = time.perf_counter() - t0
    ok = abs(root["limit"] - 16 / 5) <= 0.05 and abs(const["limit"] - 4) <= 0.05 and wall < 1
    assert record(
        12,
        ok,
        f"ell=sqrt(n): limit {root['limit']:.4f} (n=1e6: {root['largest_n']:.4f}); "
        f"ell=8: limit {const['limit']:.4f} (n=1e6: {const['largest_n']:.4f}), {wall * 1000:.0f}ms",
    )
