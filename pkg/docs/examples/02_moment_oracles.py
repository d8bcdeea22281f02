"""Closed-form moments of the bias function against brute-force enumeration."""

from kikuchi_hsbm.model import whitened_indicator
from kikuchi_hsbm.moments import brute_force_moments, closed_form_moments, leading_constant, w_moments

print(" k  p        mu           gamma          alpha     max|diff|")
for k in (2, 3, 4):
    for p in (2, 4, 6):
        cf = closed_form_moments(k, p)
        bf = brute_force_moments(whitened_indicator(k, p))
        diff = max(abs(a - b) for a, b in zip(cf, bf))
        print(f"{k:2d} {p:2d}  {cf[0]:.6e}  {cf[1]: .6e}  {cf[2]:.6e}  {diff:.1e}")

print(f"\nleading certificate constant for k=2, p=4: {leading_constant(2, 4)}")

# Mean and variance over labels of the W(a, b) statistic, at lambda = 2.
for a, b in [(2, 0), (1, 1), (0, 2)]:
    m, v = w_moments(2, 4, 0.3, 0.1, 2, a, b)
    print(f"W({a},{b}): mean {m:.6e}  var {v:.6e}")
