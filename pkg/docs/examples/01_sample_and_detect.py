"""Draw a planted and a null instance and run the spectral detector on both.

The planted instance hides a 2-community labelling; edges on 4-sets appear
with probability theta0 + eps * f(labels), where f is the whitened
"all equal" indicator, so no statistic on fewer than 4 vertices carries a
signal. The order-4 Kikuchi matrix still sees it.
"""

from kikuchi_hsbm.detect import run_detection
from kikuchi_hsbm.model import ModelParams, sample, whitened_indicator

params = ModelParams(n=30, k=2, p=4, theta0=0.45, eps=0.44)
f = whitened_indicator(2, 4)
print(f"SNR beta = {params.beta:.3f}")

for planted in (True, False):
    h = sample(params, f, planted, seed=1)
    rep = run_detection(h, ell=4)
    kind = "planted" if planted else "null"
    print(f"{kind:>8}: lambda_max = {rep.lambda_max:7.1f}  tau = {rep.tau:6.1f}  -> {rep.verdict}"
          f"  ({rep.iterations} matvecs, {rep.wall_time:.1f}s)")

# The null spectrum sits far below the design threshold, and the threshold
# itself is well below the worst-case null bound used in the analysis.
print(f"null bound sqrt(6 n^2 l^3 ln n) = {rep.null_bound:.1f}")
