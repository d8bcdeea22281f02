"""Command-line entry point: ``kikuchi-hsbm <verb> [flags]``.

Machine-readable output goes to stdout and diagnostics to stderr. Exit code
0 means success, 1 a usage error and 2 a runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from contextlib import nullcontext

import numpy as np

from . import __version__
from .detect import DetectionConfig, calibrate, parse_sweep_spec, run_detection, sweep
from .fileio import format_decimal, load, save
from .model import ModelParams, sample, whitened_indicator
from .moments import lcdf_threshold, moment_set, w_moments
from .qsim import ESTIMATE_COLUMNS, QSimConfig, qsim_detect, resource_estimate
from .vectors import ProductVector, certificate_base, guiding_base, overlap

VERBS = ["sample", "detect", "sweep", "moments", "lcdf", "overlap", "qsim", "estimate", "calibrate"]
THREADS_ENV = "KIKUCHI_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _thread_limit(threads: int):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover - threadpoolctl ships with scipy installs
        return nullcontext()
    return threadpool_limits(limits=threads)


def _write_manifest(path: str, verb: str, params: dict, seeds: list, outputs: list, wall: float):
    entry = {
        "tool": "kikuchi-hsbm",
        "version": __version__,
        "verb": verb,
        "params": params,
        "seeds": seeds,
        "outputs": {o: _sha256(o) for o in outputs if os.path.exists(o)},
        "wall_time": wall,
    }
    with open(path, "w") as fh:
        json.dump(entry, fh, indent=2, sort_keys=True)


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _model_args(p: argparse.ArgumentParser, need_snr: bool = True):
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--theta0", type=float, default=0.3)
    if need_snr:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--eps", type=float)
        g.add_argument("--beta", type=float)


def _params(a) -> ModelParams:
    if getattr(a, "beta", None) is not None:
        return ModelParams.from_beta(a.n, a.k, a.p, a.theta0, a.beta)
    eps = a.eps if a.eps is not None else 0.0
    return ModelParams(a.n, a.k, a.p, a.theta0, eps)


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="kikuchi-hsbm", description="Kikuchi spectral detection for p-marginal hypergraph block models.")
    top.add_argument("--version", action="version", version=f"kikuchi-hsbm {__version__}")
    sub = top.add_subparsers(dest="verb", metavar="verb", parser_class=_Parser)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("--threads", type=int, default=None, help=f"BLAS threads (default: ${THREADS_ENV} or all cores)")
        sp.add_argument("--manifest", help="write a run manifest to this path")
        return sp

    sp = add("sample", "Draw an instance and write it in hsbm text format.")
    _model_args(sp)
    sp.add_argument("--planted", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("detect", "Run the spectral detector on a stored instance.")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--ell", type=int, required=True)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--max-iter", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--mode", choices=["implicit", "dense"], default="implicit")
    sp.add_argument("--method", choices=["lanczos", "power"], default="lanczos", help="iterative solver in implicit mode")
    sp.add_argument("--gap", type=float, default=2.0)
    sp.add_argument("--design-beta", type=float, default=None, help="SNR used to set tau (default: the instance's)")
    sp.add_argument("--tau", type=float, default=None)

    sp = add("sweep", "Monte Carlo grid of detection rates.")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--out", default=None)

    sp = add("moments", "Moment quantities of the whitened indicator bias.")
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--p", type=int, default=4)
    sp.add_argument("--theta0", type=float, default=0.3)
    sp.add_argument("--eps", type=float, default=None, help="also print W(a,b) mean/variance at this eps")
    sp.add_argument("--lam", type=int, default=1)
    sp.add_argument("--format", choices=["text", "json"], default="text")

    sp = add("lcdf", "Coordinate-degree lower-bound SNR table.")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=int, default=4)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--D", default="1,2,4,8,16", help="comma-separated degrees")
    sp.add_argument("--c-budget", type=float, default=1.0)

    sp = add("overlap", "Certificate/guide overlap statistics over seeds.")
    _model_args(sp)
    sp.add_argument("--ell", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=10)

    sp = add("qsim", "Simulated quantum detector on a stored instance.")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--ell", type=int, default=None)
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--shots", type=int, default=100)
    sp.add_argument("--amp", choices=["on", "off"], default="off")
    sp.add_argument("--bits", default="exact", help="phase register bits, or 'exact'")
    sp.add_argument("--seed", type=int, default=0)

    sp = add("estimate", "Resource estimate table for the quantum detector.")
    sp.add_argument("--n", default="100,1000,10000,100000,1000000")
    sp.add_argument("--p", type=int, default=4)
    sp.add_argument("--ell", default="8", help="comma list of integers, or 'sqrt' for ell = sqrt(n)")
    sp.add_argument("--c-exp", type=float, default=1.0)

    sp = add("calibrate", "Monte Carlo estimate of the certificate-energy constant.")
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--p", type=int, default=4)
    sp.add_argument("--n", default="12,16,20")
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--beta", type=float, default=0.3)
    sp.add_argument("--theta0", type=float, default=0.3)
    sp.add_argument("--ell", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    return top


def _ints(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {s!r}") from None


def _cmd_sample(a, out):
    params = _params(a)
    h = sample(params, whitened_indicator(a.k, a.p), a.planted, a.seed)
    digest = save(h, a.out)
    print(json.dumps({"out": a.out, "sha256": digest, "edges": h.num_edges}), file=out)
    return {"seeds": [a.seed], "outputs": [a.out]}


def _cmd_detect(a, out):
    h = load(a.inp)
    cfg = DetectionConfig(tol=a.tol, max_iter=a.max_iter, seed=a.seed, gap=a.gap, design_beta=a.design_beta, tau=a.tau)
    cfg.method = "dense" if a.mode == "dense" else a.method
    rep = run_detection(h, a.ell, cfg)
    if not rep.converged:
        print(f"warning: solver did not converge (residual {rep.residual:.3g})", file=sys.stderr)
    print(rep.to_json(), file=out)
    print(rep.verdict, file=out)
    return {"seeds": [a.seed, h.seed], "outputs": []}


def _cmd_sweep(a, out, threads):
    with open(a.spec) as fh:
        spec = parse_sweep_spec(fh.read())
    target = a.out or spec.out
    rows = sweep(spec, target, threads=threads if target else 1)
    if not target:
        w = csv.writer(out, lineterminator="\n")
        out.write(f"# kikuchi-hsbm {__version__}\n")
        w.writerow(["n", "k", "p", "ell", "beta", "trials", "planted_rate", "null_fp_rate", "ci_low", "ci_high"])
        for r in rows:
            w.writerow([r["n"], r["k"], r["p"], r["ell"], repr(r["beta"]), r["trials"], r["planted_rate"], r["null_fp_rate"], r["ci_low"], r["ci_high"]])
    else:
        print(json.dumps({"out": target, "rows": len(rows)}), file=out)
    return {"seeds": [spec.seed], "outputs": [target] if target else []}


def _cmd_moments(a, out):
    f = whitened_indicator(a.k, a.p)
    ms = moment_set(f, a.theta0)
    report = {"k": a.k, "p": a.p, "theta0": a.theta0, **ms.as_dict()}
    if a.eps is not None:
        for b in range(a.lam + 1):
            m, v = w_moments(a.k, a.p, a.theta0, a.eps, a.lam, a.lam - b, b)
            report[f"W({a.lam - b},{b})_mean"] = m
            report[f"W({a.lam - b},{b})_var"] = v
    if a.format == "json":
        print(json.dumps(report, sort_keys=True), file=out)
    else:
        for key, val in report.items():
            print(f"{key}={format_decimal(val) if isinstance(val, float) else val}", file=out)
    return {"seeds": [], "outputs": []}


def _cmd_lcdf(a, out):
    D = _ints(a.D)
    res = lcdf_threshold(a.k, a.p, a.n, D, c_budget=a.c_budget)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["D", "beta_lcdf", "n", "p", "k"])
    for d, b in zip(D, np.atleast_1d(res.beta)):
        w.writerow([d, format_decimal(float(b)), a.n, a.p, a.k])
    print(f"# {res.note}; constant={res.constant:.6g}", file=sys.stderr)
    return {"seeds": [], "outputs": []}


def _cmd_overlap(a, out):
    params = _params(a)
    if a.ell % a.p:
        raise UsageError("ell must be a multiple of p")
    lam = a.ell // a.p
    f = whitened_indicator(a.k, a.p)
    mu = moment_set(f, a.theta0).mu
    target = (params.beta * math.sqrt(mu)) ** lam
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n", "p", "k", "ell", "beta", "seed", "stat_name", "value", "stderr"])
    seeds = np.random.SeedSequence(a.seed).generate_state(a.trials, dtype=np.uint64)
    vals = []
    for s in seeds:
        h = sample(params, f, True, int(s))
        v = ProductVector(lam, certificate_base(h, f), a.n, a.p)
        u = ProductVector(lam, guiding_base(h), a.n, a.p)
        o = overlap(u, v, normalized=True)
        vals.append(o)
        w.writerow([a.n, a.p, a.k, a.ell, format_decimal(params.beta), int(s), "normalized_overlap", format_decimal(o), ""])
    vals = np.array(vals)
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan
    w.writerow([a.n, a.p, a.k, a.ell, format_decimal(params.beta), a.seed, "median", format_decimal(float(np.median(vals))), ""])
    w.writerow([a.n, a.p, a.k, a.ell, format_decimal(params.beta), a.seed, "mean", format_decimal(float(vals.mean())), format_decimal(se)])
    w.writerow([a.n, a.p, a.k, a.ell, format_decimal(params.beta), a.seed, "target", format_decimal(target), ""])
    return {"seeds": [int(s) for s in seeds], "outputs": []}


def _cmd_qsim(a, out):
    h = load(a.inp)
    bits = None if a.bits == "exact" else int(a.bits)
    cfg = QSimConfig(tau=a.tau, shots=a.shots, use_amplitude_amplification=a.amp == "on", bits=bits, seed=a.seed)
    rep = qsim_detect(h, a.ell or h.params.p, cfg)
    print(json.dumps(rep.as_dict(), sort_keys=True), file=out)
    print(rep.verdict, file=out)
    return {"seeds": [a.seed, h.seed], "outputs": []}


def _cmd_estimate(a, out):
    try:
        ns = [float(v) for v in a.n.split(",") if v.strip()]
        ells = [v.strip() if v.strip() == "sqrt" else int(v) for v in a.ell.split(",") if v.strip()]
    except ValueError:
        raise UsageError("--n takes numbers and --ell integers or 'sqrt'") from None
    w = csv.writer(out, lineterminator="\n")
    w.writerow(ESTIMATE_COLUMNS)
    for ell in ells:
        for n in ns:
            e = resource_estimate(n, a.p, math.sqrt(n) if ell == "sqrt" else ell, a.c_exp)
            w.writerow([format_decimal(v) if isinstance(v, float) else v for v in e.row()])
    return {"seeds": [], "outputs": []}


def _cmd_calibrate(a, out):
    rec = calibrate(a.k, a.p, _ints(a.n), a.trials, beta=a.beta, theta0=a.theta0, ell=a.ell, seed=a.seed)
    print(json.dumps(rec.as_dict(), sort_keys=True, default=str), file=out)
    return {"seeds": [a.seed], "outputs": []}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        if a.verb is None:
            parser.print_help(sys.stderr)
            return 1
        threads = a.threads if a.threads is not None else _default_threads()
        if threads < 1:
            raise UsageError("--threads must be >= 1")
    except UsageError as e:
        print(f"kikuchi-hsbm: error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)

    t0 = time.perf_counter()
    try:
        with _thread_limit(threads):
            if a.verb == "sweep":
                info = _cmd_sweep(a, out, threads)
            else:
                info = globals()[f"_cmd_{a.verb}"](a, out)
    except UsageError as e:
        print(f"kikuchi-hsbm: error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError, ArithmeticError) as e:
        print(f"kikuchi-hsbm: {a.verb} failed: {e}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - t0
    manifest = a.manifest
    if manifest is None and info["outputs"]:
        manifest = info["outputs"][0] + ".run.json"
    if manifest:
        params = {k: v for k, v in vars(a).items() if k not in ("manifest",)}
        _write_manifest(manifest, a.verb, params, info["seeds"], info["outputs"], wall)
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
