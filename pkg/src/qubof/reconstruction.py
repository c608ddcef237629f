"""Turn the server's per-slot answers back into a solution of the original QUBO."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ._rng import make_rng
from .core import SolutionVector, as_qubo, make_solution, objectives
from .errors import ContractViolation
from .obfuscation import ObfuscationSecret

DEFAULT_SAMPLES = 200


def _binary_stack(vectors, n: int | None = None) -> np.ndarray:
    arr = np.asarray(vectors)
    if arr.ndim != 2 or (n is not None and arr.shape[1] != n):
        raise ContractViolation(f"expected a stack of binary vectors of length {n}, got shape {arr.shape}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ContractViolation("vector entries must be 0 or 1")
    return arr.astype(np.int8)


def unshuffle(vectors, secret: ObfuscationSecret) -> np.ndarray:
    """Digit-ordered, unpermuted solutions ``v_1..v_k`` as a ``(k, n)`` array.

    Decoy slots are dropped. For digit ``m`` in slot ``s``,
    ``v_m[i] = returned[s][sigma_m^-1(i)]``.
    """
    k, d = secret.k, secret.params.decoys
    arr = _binary_stack(vectors, secret.n)
    if arr.shape[0] != k + d:
        raise ContractViolation(f"expected {k + d} vectors, got {arr.shape[0]}")
    out = np.empty((k, secret.n), dtype=np.int8)
    for m, slot in enumerate(secret.slot_of_digit):
        out[m] = arr[slot][np.argsort(secret.sigmas[m])]
    return out


def default_weights(r: int, k: int) -> np.ndarray:
    """``w[m] = r^-m`` for ``m = 1..k``."""
    if r < 2 or k < 1:
        raise ContractViolation("need r >= 2 and k >= 1")
    return float(r) ** -np.arange(1, k + 1)


def weighted_average(vectors, weights) -> np.ndarray:
    """Per-coordinate convex combination; read as ``Pr[x_i = 1]``."""
    arr = _binary_stack(vectors)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (arr.shape[0],):
        raise ContractViolation(f"need {arr.shape[0]} weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ContractViolation("weights must be finite and positive")
    p = (w @ arr) / w.sum()
    return np.clip(p, 0.0, 1.0)


def sample_candidates(p, t: int, seed) -> np.ndarray:
    """``t`` independent vectors with ``X[l, i] ~ Bernoulli(p[i])``, shape ``(t, n)``.

    Draws a row-major ``(t, n)`` block of uniforms, so the first ``t'`` rows
    for a smaller ``t'`` and the same seed are identical.
    """
    if t < 1:
        raise ContractViolation("need at least one sample")
    p = np.asarray(p, dtype=np.float64)
    if np.any((p < 0) | (p > 1)):
        raise ContractViolation("probabilities must lie in [0, 1]")
    u = make_rng(seed).random((t, p.shape[0]))
    return (u < p).astype(np.int8)


def select_best(candidates, q) -> SolutionVector:
    """Candidate with the lowest objective on ``q``; first occurrence wins ties."""
    q = as_qubo(q)
    cands = np.asarray(candidates)
    if cands.ndim != 2 or cands.shape[0] == 0:
        raise ContractViolation("need a non-empty list of candidates")
    cands = _binary_stack(cands, q.n)
    values = objectives(q, cands)
    return make_solution(q, cands[int(np.argmin(values))])


def recover(
    vectors,
    secret: ObfuscationSecret,
    q,
    t: int = DEFAULT_SAMPLES,
    weights: Sequence[float] | None = None,
    seed=None,
) -> SolutionVector:
    """Full client-side reconstruction, scored on the original (unscaled) ``q``."""
    v = unshuffle(vectors, secret)
    if weights is None:
        weights = default_weights(secret.params.r, secret.k)
    p = weighted_average(v, weights)
    return select_best(sample_candidates(p, t, seed), q)
