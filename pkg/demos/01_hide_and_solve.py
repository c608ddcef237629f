"""
Hiding a QUBO from the solver that answers it
=============================================

A small 4-variable problem is split into base-4 digit matrices, each one is
scrambled with its own permutation, and an in-process solver answers them.
The client then reassembles an answer for the original problem.
"""

import numpy as np

from qubof import ObfuscationParams, obfuscate, recover, solve_exact, submit
from qubof.protocol import SolverConfig

q = np.array(
    [
        [6, 0, 5, -9],
        [0, 0, -3, 2],
        [5, -3, -18, 2],
        [-9, 2, 2, -2],
    ],
    dtype=float,
)
print("brute-force optimum:", solve_exact(q))

# Split into k=4 digit matrices of radix 10, add two decoys, shuffle the lot.
transmit, secret = obfuscate(q, ObfuscationParams(r=10, k=4, decoys=2, seed=7))
print(f"\nthe solver receives {len(transmit)} integer matrices:")
for slot, m in enumerate(transmit.matrices):
    print(f"slot {slot}:\n{m}")

# Only these stay on the client.
print("\nscale kept private:", secret.scale)
print("decoy slots kept private:", sorted(secret.decoy_slots))

# One round trip; the solver never sees q, its scale, or the permutations.
vectors = submit(SolverConfig(), transmit)
print("\nper-slot answers:\n", vectors)

solution = recover(vectors, secret, q, t=200, seed=1)
print("\nrecovered:", solution)
