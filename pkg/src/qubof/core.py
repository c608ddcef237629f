"""QUBO instances, objective evaluation, test-matrix generation and solvers.

A QUBO instance asks for ``x in {0,1}^n`` minimising ``x^T Q x``. ``Q`` is any
real square matrix; nothing here assumes symmetry.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from os import PathLike

import numpy as np

from ._rng import make_rng
from .errors import ContractViolation, SizeLimitError

DEFAULT_EXACT_CAP = 22
DEFAULT_BUDGET = 2000
DEFAULT_SWEEPS_PER_RESTART = 100

# low-bit block size for the exhaustive solver; 2**11 x 2**11 values per chunk
_LOW_BITS = 11


@dataclass(frozen=True)
class QuboMatrix:
    """Immutable square model matrix.

    ``entries`` is stored as a read-only float64 array. Construct from any
    nested sequence or array; validation rejects non-square, empty, and
    non-finite input.
    """

    entries: np.ndarray
    symmetric_hint: bool = field(init=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ContractViolation(f"model matrix must be square and non-empty, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ContractViolation("model matrix entries must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "symmetric_hint", bool(np.array_equal(a, a.T)))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, QuboMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def to_json(self) -> dict:
        return {"n": self.n, "entries": self.entries.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "QuboMatrix":
        try:
            n, entries = obj["n"], obj["entries"]
        except (KeyError, TypeError) as exc:
            raise ContractViolation("matrix object needs 'n' and 'entries'") from exc
        q = cls(entries)
        if q.n != n:
            raise ContractViolation(f"declared n={n} but entries have order {q.n}")
        return q


def as_qubo(q) -> QuboMatrix:
    return q if isinstance(q, QuboMatrix) else QuboMatrix(q)


def load_matrix(path: str | PathLike) -> QuboMatrix:
    with open(path) as fh:
        return QuboMatrix.from_json(json.load(fh))


def save_matrix(q, path: str | PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(as_qubo(q).to_json(), fh)


@dataclass(frozen=True)
class SolutionVector:
    """A binary assignment and its objective value for one matrix."""

    bits: tuple[int, ...]
    value: float

    @property
    def array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.int8)

    def to_json(self) -> dict:
        return {"bits": list(self.bits), "value": self.value}


def _as_bits(x, n: int) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (n,):
        raise ContractViolation(f"expected a binary vector of length {n}, got shape {x.shape}")
    if not np.all((x == 0) | (x == 1)):
        raise ContractViolation("vector entries must be 0 or 1")
    return x.astype(np.int8)


def make_solution(q, x) -> SolutionVector:
    """Wrap ``x`` with its objective value on ``q``."""
    q = as_qubo(q)
    bits = _as_bits(x, q.n)
    return SolutionVector(tuple(int(b) for b in bits), objective(q, bits))


def objective(q, x) -> float:
    """``x^T Q x`` for a binary vector ``x``."""
    q = as_qubo(q)
    x = _as_bits(x, q.n)
    idx = np.flatnonzero(x)
    return float(q.entries[np.ix_(idx, idx)].sum())


def objectives(q, xs) -> np.ndarray:
    """Row-wise ``x^T Q x`` for a ``(t, n)`` stack of binary vectors."""
    a = np.asarray(q, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    return np.einsum("ti,ij,tj->t", xs, a, xs)


def _bit_table(m: int) -> np.ndarray:
    """All 2**m binary vectors, row ``i`` being the bits of ``i`` (bit 0 first)."""
    return ((np.arange(1 << m)[:, None] >> np.arange(m)) & 1).astype(np.float64)


def solve_exact(q, cap: int = DEFAULT_EXACT_CAP) -> SolutionVector:
    """Exhaustive minimiser over all ``2**n`` assignments.

    Ties go to the assignment with the smallest integer encoding, bit 0 being
    least significant. The enumeration splits the bits into a low block and a
    high block: the objective of ``x = (lo, hi)`` is
    ``f(lo) + f(hi) + lo^T (Q_lh + Q_hl^T) hi``, so each chunk of high-block
    assignments costs one small matrix product.
    """
    q = as_qubo(q)
    n = q.n
    if n > cap:
        raise SizeLimitError(f"order {n} exceeds the exhaustive limit {cap}; use solve_heuristic")
    a = q.entries
    lo_n = min(n, _LOW_BITS)
    hi_n = n - lo_n
    lo_bits = _bit_table(lo_n)
    f_lo = objectives(a[:lo_n, :lo_n], lo_bits)
    if hi_n == 0:
        best = int(np.argmin(f_lo))
        return make_solution(q, lo_bits[best].astype(np.int8))

    cross = a[:lo_n, lo_n:] + a[lo_n:, :lo_n].T
    q_hh = a[lo_n:, lo_n:]
    best_val, best_idx = math.inf, -1
    chunk = 1 << min(hi_n, _LOW_BITS)
    for start in range(0, 1 << hi_n, chunk):
        hi_idx = np.arange(start, start + chunk)
        hi_bits = ((hi_idx[:, None] >> np.arange(hi_n)) & 1).astype(np.float64)
        f_hi = objectives(q_hh, hi_bits)
        # values[h, l] for assignment integer l + (start + h) << lo_n
        values = f_hi[:, None] + f_lo[None, :] + hi_bits @ cross.T @ lo_bits.T
        i = int(np.argmin(values))
        if values.flat[i] < best_val:
            best_val = float(values.flat[i])
            h, l = divmod(i, 1 << lo_n)
            best_idx = ((start + h) << lo_n) | l
    bits = (best_idx >> np.arange(n)) & 1
    return make_solution(q, bits.astype(np.int8))


def solve_heuristic(
    q,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    sweeps_per_restart: int = DEFAULT_SWEEPS_PER_RESTART,
) -> SolutionVector:
    """Simulated annealing with restarts.

    ``budget`` is the total number of sweeps (``n`` single-bit flip proposals
    each) across all restarts; ``ceil(budget / sweeps_per_restart)`` restarts
    run as parallel chains. Inverse temperature grows geometrically from
    ``ln 2 / max|delta|`` to ``ln 100 / min|delta|``. Every chain finishes
    with a greedy descent, and the best chain (lowest index on ties) wins.
    """
    if budget < 1:
        raise ContractViolation("budget must be at least 1")
    q = as_qubo(q)
    n = q.n
    a = q.entries
    diag = np.diag(a).copy()
    coupling = a + a.T
    np.fill_diagonal(coupling, 0.0)

    max_delta = float(np.max(np.abs(diag) + np.abs(coupling).sum(axis=1)))
    if max_delta == 0.0:
        return make_solution(q, np.zeros(n, dtype=np.int8))
    nonzero = np.abs(np.concatenate([diag, coupling.ravel()]))
    min_delta = float(nonzero[nonzero > 0].min())

    sweeps = min(budget, sweeps_per_restart)
    chains = -(-budget // sweeps)
    rng = make_rng(seed)
    x = rng.integers(0, 2, size=(chains, n)).astype(np.float64)
    field = x @ coupling  # coupling is symmetric
    betas = np.geomspace(math.log(2) / max_delta, math.log(100) / min_delta, sweeps)
    rows = np.arange(chains)
    for beta in betas:
        thresholds = np.log(rng.random((n, chains))) / -beta
        for i in range(n):
            step = 1.0 - 2.0 * x[:, i]
            delta = step * (diag[i] + field[:, i])
            flip = delta < thresholds[i]
            if flip.any():
                x[flip, i] += step[flip]
                field[flip] += step[flip, None] * coupling[i]

    # greedy descent to a local minimum
    while True:
        delta = (1.0 - 2.0 * x) * (diag + field)
        i = np.argmin(delta, axis=1)
        d = delta[rows, i]
        move = d < 0
        if not move.any():
            break
        r, c = rows[move], i[move]
        step = 1.0 - 2.0 * x[r, c]
        x[r, c] += step
        field[r] += step[:, None] * coupling[c]

    values = objectives(a, x)
    best = int(np.argmin(values))
    return make_solution(q, x[best].astype(np.int8))


@dataclass(frozen=True)
class MatrixGenSpec:
    n: int
    mean: float = 0.0
    stddev: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ContractViolation("n must be positive")
        if not self.stddev > 0:
            raise ContractViolation("stddev must be positive")


def generate_matrix(spec: MatrixGenSpec) -> QuboMatrix:
    """I.i.d. Normal(mean, stddev) entries from the Philox stream of ``spec.seed``.

    Entries are drawn row-major with ``Generator.normal``.
    """
    rng = make_rng(spec.seed)
    return QuboMatrix(rng.normal(spec.mean, spec.stddev, size=(spec.n, spec.n)))
