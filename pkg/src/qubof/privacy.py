"""How hard is it for the solver to undo the obfuscation?

Under the assumption that digit magnitudes look uniform and independent,
all the server can exploit is the sign pattern shared by every digit matrix.
A correct reconstruction is then one guess among ``alpha^(k-1) * k! * n!``
equally plausible ones, where ``alpha`` counts the simultaneous row/column
permutations that fix the sign matrix.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln

from ._rng import make_rng
from .core import as_qubo
from .errors import ContractViolation, InfeasibleSizeError
from .obfuscation import (
    DEFAULT_EPSILON,
    DigitMatrix,
    TransmitSet,
    digit_split,
    normalize,
    unpermute_matrix,
)

DEFAULT_AUTOMORPHISM_CAP = 16
UNIFORMITY_ALPHA = 0.01


def sign_matrix(q) -> np.ndarray:
    """Elementwise sign as an int8 array over {-1, 0, 1}."""
    return np.sign(np.asarray(q, dtype=np.float64)).astype(np.int8)


# -- automorphisms -----------------------------------------------------------


def _refine(s: np.ndarray, colors_a: np.ndarray, colors_b: np.ndarray):
    """Jointly refine two colourings of ``s`` until stable.

    Each vertex is recoloured by its old colour plus the multiset of
    ``(s[v, w], s[w, v], colour[w])`` over all ``w``. Both sides share one
    signature-to-colour table, so matching colours stay comparable. Returns
    ``None`` when the two sides stop being compatible.
    """
    n = s.shape[0]
    diag = np.diag(s)
    while True:
        sigs = []
        for colors in (colors_a, colors_b):
            sig = []
            for v in range(n):
                profile = sorted(zip(s[v].tolist(), s[:, v].tolist(), colors.tolist()))
                sig.append((int(colors[v]), int(diag[v]), tuple(profile)))
            sigs.append(sig)
        if sorted(sigs[0]) != sorted(sigs[1]):
            return None
        table = {sig: i for i, sig in enumerate(sorted(set(sigs[0])))}
        new_a = np.array([table[x] for x in sigs[0]])
        new_b = np.array([table[x] for x in sigs[1]])
        if len(table) == len(set(colors_a.tolist())):
            return new_a, new_b
        colors_a, colors_b = new_a, new_b


def _individualize(colors: np.ndarray, v: int) -> np.ndarray:
    out = colors.copy()
    out[v] = colors.max() + 1
    return out


def _is_automorphism(s: np.ndarray, pi: np.ndarray) -> bool:
    return bool(np.array_equal(s[np.ix_(pi, pi)], s))


def _find_isomorphism(s: np.ndarray, colors_a: np.ndarray, colors_b: np.ndarray):
    """Some automorphism mapping the ``a``-colouring onto the ``b``-colouring, or None."""
    refined = _refine(s, colors_a, colors_b)
    if refined is None:
        return None
    colors_a, colors_b = refined
    counts = np.bincount(colors_a)
    if counts.max() == 1:
        # discrete: v must go to the image vertex carrying the same colour
        vertex_of_color = np.empty_like(colors_b)
        vertex_of_color[colors_b] = np.arange(len(colors_b))
        pi = vertex_of_color[colors_a]
        return pi if _is_automorphism(s, pi) else None
    cell = int(np.flatnonzero(counts > 1)[0])
    v = int(np.flatnonzero(colors_a == cell)[0])
    for u in np.flatnonzero(colors_b == cell):
        found = _find_isomorphism(s, _individualize(colors_a, v), _individualize(colors_b, int(u)))
        if found is not None:
            return found
    return None


def count_automorphisms(s, limit: int | None = DEFAULT_AUTOMORPHISM_CAP) -> int:
    """Exact ``|{pi : S[pi(i), pi(j)] == S[i, j] for all i, j}|``.

    Orbit-stabiliser over a base ``b_1, b_2, ...``: with ``b_1..b_{i-1}``
    fixed, the orbit of ``b_i`` is found by testing every vertex in its
    refined colour cell for an extending automorphism. The group order is the
    product of the orbit sizes.
    """
    s = np.asarray(s)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ContractViolation("sign matrix must be square")
    n = s.shape[0]
    if limit is not None and n > limit:
        raise InfeasibleSizeError(f"order {n} exceeds the exact automorphism cap {limit}")
    s = s.astype(np.int8)
    colors = np.zeros(n, dtype=np.int64)
    order = 1
    while True:
        colors, _ = _refine(s, colors, colors)
        counts = np.bincount(colors)
        if counts.max() == 1:
            return order
        cell = int(np.flatnonzero(counts > 1)[0])
        members = np.flatnonzero(colors == cell)
        base = int(members[0])
        fixed = _individualize(colors, base)
        orbit = 1
        for u in members[1:]:
            if _find_isomorphism(s, fixed, _individualize(colors, int(u))) is not None:
                orbit += 1
        order *= orbit
        colors = fixed


def count_automorphisms_brute(s) -> int:
    """Reference count by enumerating all ``n!`` permutations."""
    s = np.asarray(s)
    n = s.shape[0]
    return sum(
        _is_automorphism(s, np.array(p)) for p in itertools.permutations(range(n))
    )


# -- recovery probability ----------------------------------------------------


def recovery_probability(alpha: int, k: int, n: int) -> float:
    """Natural log of ``1 / (alpha^(k-1) k! n!)``."""
    if alpha < 1 or k < 1 or n < 1:
        raise ContractViolation("alpha, k and n must all be at least 1")
    return float(-((k - 1) * math.log(alpha) + gammaln(k + 1) + gammaln(n + 1)))


# -- digit statistics --------------------------------------------------------


@dataclass(frozen=True)
class UniformityResult:
    position: int
    chi2: float
    p_value: float
    flagged: bool


def digit_uniformity(digits, r: int | None = None, alpha: float = UNIFORMITY_ALPHA) -> list[UniformityResult]:
    """Chi-squared test of ``|entries|`` against uniform over ``0..r-1``, per position.

    Positions with ``p < alpha`` are flagged. Accepts :class:`DigitMatrix`
    objects or plain integer arrays (then ``r`` is required).
    """
    digits = list(digits)
    if not digits:
        raise ContractViolation("need at least one digit matrix")
    out = []
    for i, d in enumerate(digits, start=1):
        if isinstance(d, DigitMatrix):
            radix, position, entries = d.radix, d.position, d.entries
        else:
            if r is None:
                raise ContractViolation("radix required for plain arrays")
            radix, position, entries = r, i, np.asarray(d)
        counts = np.bincount(np.abs(entries).ravel().astype(np.int64), minlength=radix)
        if counts.size > radix:
            raise ContractViolation(f"digit magnitude exceeds r-1 at position {position}")
        if counts[1:].sum() == 0:
            # all-zero digits: degenerate, never consistent with uniform
            out.append(UniformityResult(position, math.inf, 0.0, True))
            continue
        chi2, p = stats.chisquare(counts)
        out.append(UniformityResult(position, float(chi2), float(p), bool(p < alpha)))
    return out


@dataclass
class PrivacyReport:
    alpha: int
    alpha_exact: bool
    k: int
    n: int
    log_recovery_probability: float
    digit_uniformity: list[UniformityResult] = field(default_factory=list)

    def to_json(self) -> dict:
        out = asdict(self)
        out["digit_uniformity"] = [
            {**asdict(u), "chi2": None if math.isinf(u.chi2) else u.chi2} for u in self.digit_uniformity
        ]
        return out


def privacy_report(q, k: int, r: int = 4, epsilon: float = DEFAULT_EPSILON, cap: int = DEFAULT_AUTOMORPHISM_CAP) -> PrivacyReport:
    """Automorphism count, recovery probability and digit diagnostics for ``q``.

    Above ``cap`` the count falls back to the lower bound 1 and
    ``alpha_exact`` is False; the probability is then an upper bound.
    """
    q = as_qubo(q)
    try:
        alpha, exact = count_automorphisms(sign_matrix(q), limit=cap), True
    except InfeasibleSizeError:
        alpha, exact = 1, False
    qstar, _ = normalize(q, epsilon)
    uniformity = digit_uniformity(digit_split(qstar, r, k))
    return PrivacyReport(alpha, exact, k, q.n, recovery_probability(alpha, k, q.n), uniformity)


# -- attack simulation -------------------------------------------------------


def guessing_attack(transmit: TransmitSet, truth: list[np.ndarray], guesses: int, seed) -> int:
    """Successes of a sign-consistent random guesser over ``guesses`` attempts.

    The attacker knows only ``transmit``. Each guess picks a slot order
    uniformly, an unscrambling permutation for the first slot uniformly, then
    for every other slot a uniform permutation among those that make its sign
    matrix agree with the first. A guess succeeds when it yields the true
    digit matrices ``truth`` (digit order, original labels). Enumerates
    ``S_n``, so only meant for tiny ``n``.
    """
    mats = transmit.matrices
    k, n = len(truth), transmit.n
    if len(mats) != k:
        raise ContractViolation("attack simulation assumes a decoy-free transmit set")
    perms = [np.array(p) for p in itertools.permutations(range(n))]
    # unpermuted[slot][p] is matrix bytes, by_signs[slot] maps sign bytes to perm ids
    unpermuted, by_signs = [], []
    for m in mats:
        table, groups = [], {}
        for pid, p in enumerate(perms):
            a = unpermute_matrix(m, p)
            table.append(a.tobytes())
            groups.setdefault(np.sign(a).tobytes(), []).append(pid)
        unpermuted.append(table)
        by_signs.append(groups)
    truth_bytes = [np.asarray(t, dtype=mats[0].dtype).tobytes() for t in truth]
    slot_orders = list(itertools.permutations(range(k)))

    rng = make_rng(seed)
    wins = 0
    for _ in range(guesses):
        order = slot_orders[rng.integers(len(slot_orders))]
        first = int(rng.integers(len(perms)))
        target = np.sign(unpermute_matrix(mats[order[0]], perms[first])).tobytes()
        ok = unpermuted[order[0]][first] == truth_bytes[0]
        for m in range(1, k):
            pool = by_signs[order[m]].get(target)
            if not pool:
                ok = False
                break
            pid = pool[int(rng.integers(len(pool)))]
            ok = ok and unpermuted[order[m]][pid] == truth_bytes[m]
        wins += ok
    return wins

