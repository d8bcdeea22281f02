"""Speedup exponents from the cost model.

For constant ell the exponent creeps toward 4; at ell = sqrt(n) it is 16/5.
"""

import math

import numpy as np

from kikuchi_hsbm.qsim import resource_estimate, speedup_asymptote

for n in (1e2, 1e4, 1e6):
    e = resource_estimate(n, 4, 8)
    print(f"n={n:8.0e} ell=8: exponent {e.speedup_exponent:.3f}, qubits {e.qubits}, classical bits {e.classical_bits:.2e}")

grid = np.logspace(2, 6, 13)
print("limit, ell = 8      :", round(speedup_asymptote(4, lambda n: 8, grid)["limit"], 4))
print("limit, ell = sqrt(n):", round(speedup_asymptote(4, math.sqrt, grid)["limit"], 4))
