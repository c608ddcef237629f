"""
How many guesses does the solver need?
======================================

The solver sees the shared sign pattern of the digit matrices and nothing
else of use. Symmetries of that pattern (its automorphisms) make several
unscramblings equally plausible, which lowers the attacker's odds.
"""

import math

import numpy as np

from qubof import count_automorphisms, privacy_report, recovery_probability
from qubof.core import MatrixGenSpec, generate_matrix
from qubof.privacy import sign_matrix

# A random Normal(0, 4) matrix almost never has a non-trivial symmetry.
q = generate_matrix(MatrixGenSpec(n=10, seed=3))
report = privacy_report(q, k=5, r=4)
print("alpha =", report.alpha, "(exact)" if report.alpha_exact else "(lower bound)")
print(f"log-probability of an exact recovery: {report.log_recovery_probability:.2f}")
print(f"that is about 1 in 10^{-report.log_recovery_probability / math.log(10):.1f}")

# Later digits look uniform. The leading digit still follows the bell shape of
# the entries (most are small next to the peak), which the test flags.
for u in report.digit_uniformity:
    print(f"  digit {u.position}: p = {u.p_value:.3f}{'  <- flagged' if u.flagged else ''}")

# A structured matrix is a different story: a cycle of couplings is symmetric
# under rotation and reflection, so many more guesses are equally good.
n = 8
ring = np.zeros((n, n))
for i in range(n):
    ring[i, (i + 1) % n] = ring[(i + 1) % n, i] = -1
alpha = count_automorphisms(sign_matrix(ring))
print(f"\nring of {n}: alpha = {alpha}")
for k in (1, 3, 5):
    print(f"  k={k}: log p = {recovery_probability(alpha, k, n):.2f}")
