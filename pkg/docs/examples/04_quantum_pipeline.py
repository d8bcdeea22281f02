"""Simulated quantum detector on a tiny instance.

Edges are split into batches: one batch builds the guiding state, the rest
build the Kikuchi operator. Phase estimation is idealised as sampling
eigenvalues with the guide's weights. At n = 12 the planted spike is still
inside the noise bulk, so planted and null runs look alike; the printout
shows that plainly.
"""

from kikuchi_hsbm.model import ModelParams, sample, whitened_indicator
from kikuchi_hsbm.qsim import QSimConfig, detection_cost_sim, qsim_detect

params = ModelParams(12, 2, 4, 0.45, 0.44)
f = whitened_indicator(2, 4)

for planted in (True, False):
    reps = [qsim_detect(sample(params, f, planted, s), 4, QSimConfig(shots=100, seed=s)) for s in range(10)]
    rate = sum(r.verdict == "Planted" for r in reps) / len(reps)
    top = sorted(r.lambda_max for r in reps)[len(reps) // 2]
    print(f"{'planted' if planted else 'null':>8}: Planted verdicts {rate:.0%}, median top eigenvalue {top:.1f}, tau {reps[0].tau:.1f}")

rec = detection_cost_sim([sample(params, f, True, s) for s in range(5)], QSimConfig(seed=0), ell=4)
for o, plain, amp in zip(rec.overlaps, rec.plain_analytic, rec.amplified):
    print(f"overlap {o:.4f}: median repetitions {plain}, amplified rounds {amp}")
