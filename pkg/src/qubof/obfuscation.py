"""Hide a model matrix behind shuffled, permuted base-r digit matrices.

Pipeline: scale ``Q`` into the open interval (-1, 1), split every entry into
its first ``k`` signed base-r fractional digits, permute rows and columns of
each digit matrix by its own random permutation, mix in optional decoy
matrices, and shuffle the slot order. The client keeps an
:class:`ObfuscationSecret`; the server only ever sees a :class:`TransmitSet`.

Permutations are stored 0-based as arrays ``sigma`` with
``permuted[i, j] = original[sigma[i], sigma[j]]``. JSON files store them
1-based.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from os import PathLike

import numpy as np

from ._rng import make_rng
from .core import QuboMatrix, as_qubo
from .errors import ContractViolation, DegenerateInputError

DEFAULT_EPSILON = 1e-9
DECOY_MODES = ("signs", "uniform")


@dataclass(frozen=True)
class ObfuscationParams:
    r: int = 4
    k: int = 5
    decoys: int = 0
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0
    decoy_mode: str = "signs"

    def __post_init__(self):
        if self.r < 2:
            raise ContractViolation("radix r must be at least 2")
        if self.k < 1:
            raise ContractViolation("digit count k must be at least 1")
        if self.decoys < 0:
            raise ContractViolation("decoy count must be non-negative")
        if not 0 < self.epsilon < 1:
            raise ContractViolation("epsilon must lie in (0, 1)")
        if self.decoy_mode not in DECOY_MODES:
            raise ContractViolation(f"decoy_mode must be one of {DECOY_MODES}")

    def to_json(self) -> dict:
        return {
            "r": self.r,
            "k": self.k,
            "decoys": self.decoys,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "decoy_mode": self.decoy_mode,
        }


@dataclass(frozen=True)
class DigitMatrix:
    """Signed base-r digits of one position (1 = most significant)."""

    entries: np.ndarray
    position: int
    radix: int

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class TransmitSet:
    """What the server receives: ``k + decoys`` integer matrices and the radix.

    Deliberately carries nothing that tells digit slots from decoy slots.
    """

    matrices: list[np.ndarray]
    radix: int

    def __post_init__(self):
        if not self.matrices:
            raise ContractViolation("transmit set must hold at least one matrix")
        n = self.matrices[0].shape[0]
        for m in self.matrices:
            if m.shape != (n, n):
                raise ContractViolation("transmitted matrices must share one square order")

    @property
    def n(self) -> int:
        return self.matrices[0].shape[0]

    def __len__(self):
        return len(self.matrices)

    def to_json(self) -> dict:
        return {
            "radix": self.radix,
            "matrices": [{"n": int(m.shape[0]), "entries": m.tolist()} for m in self.matrices],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TransmitSet":
        mats = [np.array(m["entries"], dtype=np.int64) for m in obj["matrices"]]
        return cls(mats, int(obj["radix"]))


@dataclass(frozen=True)
class ObfuscationSecret:
    """Client-held key material.

    ``send_order[slot]`` is the item placed in that slot: ``0..k-1`` are digit
    positions ``1..k``, ``k..k+decoys-1`` are decoys.
    """

    scale: float
    sigmas: list[np.ndarray]
    send_order: np.ndarray
    params: ObfuscationParams
    n: int
    decoy_slots: frozenset = field(init=False)

    def __post_init__(self):
        k = self.params.k
        for s in self.sigmas:
            _check_permutation(s, self.n)
        _check_permutation(self.send_order, k + self.params.decoys)
        if len(self.sigmas) != k:
            raise ContractViolation("need exactly k permutations")
        if not self.scale > 0:
            raise ContractViolation("scale must be positive")
        slots = frozenset(int(s) for s in np.flatnonzero(self.send_order >= k))
        object.__setattr__(self, "decoy_slots", slots)

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def slot_of_digit(self) -> np.ndarray:
        """``slot_of_digit[m]`` is the slot carrying digit position ``m + 1``."""
        return np.argsort(self.send_order)[: self.k]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "scale": self.scale,
            "sigmas": [(s + 1).tolist() for s in self.sigmas],
            "send_order": (self.send_order + 1).tolist(),
            "decoy_slots": [s + 1 for s in sorted(self.decoy_slots)],
            "params": self.params.to_json(),
            "seed": self.params.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ObfuscationSecret":
        params = ObfuscationParams(**obj["params"])
        secret = cls(
            scale=float(obj["scale"]),
            sigmas=[np.array(s, dtype=np.int64) - 1 for s in obj["sigmas"]],
            send_order=np.array(obj["send_order"], dtype=np.int64) - 1,
            params=params,
            n=int(obj["n"]),
        )
        listed = obj.get("decoy_slots")
        if listed is not None and sorted(secret.decoy_slots) != sorted(s - 1 for s in listed):
            raise ContractViolation("decoy_slots disagree with send_order")
        return secret


def _check_permutation(sigma, n: int) -> np.ndarray:
    sigma = np.asarray(sigma)
    if sigma.shape != (n,) or not np.array_equal(np.sort(sigma), np.arange(n)):
        raise ContractViolation(f"not a permutation of 0..{n - 1}: {sigma!r}")
    return sigma.astype(np.int64)


def normalize(q, epsilon: float = DEFAULT_EPSILON) -> tuple[QuboMatrix, float]:
    """Scale ``q`` by ``(1 + epsilon) * max|q|``; returns ``(Q*, scale)``.

    Divides by ``max|q|`` first and by ``1 + epsilon`` second, so positive
    rescalings of an integer matrix give bit-identical ``Q*``.
    """
    if not epsilon > 0:
        raise ContractViolation("epsilon must be positive")
    q = as_qubo(q)
    peak = float(np.max(np.abs(q.entries)))
    if peak == 0.0:
        raise DegenerateInputError("all-zero model matrix: the objective is constant")
    qstar = q.entries / peak / (1.0 + epsilon)
    return QuboMatrix(qstar), peak * (1.0 + epsilon)


def _truncated_magnitudes(values: np.ndarray, r: int, k: int) -> list[int]:
    """Exact ``floor(|v| * r**k)`` for each float ``v`` (floats are dyadic rationals)."""
    rk = r**k
    out = []
    for v in values:
        num, den = abs(float(v)).as_integer_ratio()
        out.append(num * rk // den)
    return out


def digit_split(qstar, r: int, k: int) -> list[DigitMatrix]:
    """First ``k`` signed base-r fractional digits of every entry of ``qstar``.

    Digit ``m`` of ``v`` is ``sign(v) * (floor(|v| r^m) mod r)``, so
    ``|v - sum_m digit_m r^-m| < r^-k``. Digits come from the exact integer
    ``floor(|v| r^k)``; no floating-point multiply drift.
    """
    if r < 2 or k < 1:
        raise ContractViolation("need r >= 2 and k >= 1")
    a = np.asarray(qstar, dtype=np.float64)
    if np.any(np.abs(a) >= 1):
        raise ContractViolation("digit_split needs every |entry| < 1; normalize first")
    mags = _truncated_magnitudes(a.ravel(), r, k)
    sign = np.sign(a).astype(np.int64)
    if r**k < 2**62:
        rest = np.array(mags, dtype=np.int64)
    else:
        rest = np.array(mags, dtype=object)
    digits = []
    for _ in range(k):
        rest, d = rest // r, rest % r
        digits.append(d.astype(np.int64).reshape(a.shape))
    digits.reverse()
    return [DigitMatrix(sign * d, m + 1, r) for m, d in enumerate(digits)]


def permute_matrix(m, sigma) -> np.ndarray:
    """``out[i, j] = m[sigma[i], sigma[j]]``."""
    a = np.asarray(m.entries if isinstance(m, DigitMatrix) else m)
    sigma = _check_permutation(sigma, a.shape[0])
    return a[np.ix_(sigma, sigma)]


def unpermute_matrix(m, sigma) -> np.ndarray:
    """Inverse of :func:`permute_matrix` for the same ``sigma``."""
    return permute_matrix(m, np.argsort(_check_permutation(sigma, np.asarray(m).shape[0])))


def make_decoy(n: int, r: int, seed, signs=None) -> np.ndarray:
    """Random digit-like matrix.

    Without ``signs``: entries uniform over ``-(r-1)..r-1``. With a sign
    pattern: ``signs * u`` with magnitudes ``u`` uniform over ``0..r-1``.
    """
    if n < 1 or r < 2:
        raise ContractViolation("need n >= 1 and r >= 2")
    rng = make_rng(seed)
    if signs is None:
        return rng.integers(-(r - 1), r, size=(n, n), dtype=np.int64)
    signs = np.asarray(signs, dtype=np.int64)
    if signs.shape != (n, n):
        raise ContractViolation("sign pattern shape does not match n")
    return signs * rng.integers(0, r, size=(n, n), dtype=np.int64)


def obfuscate(
    q,
    params: ObfuscationParams,
    *,
    permute: bool = True,
    shuffle: bool = True,
) -> tuple[TransmitSet, ObfuscationSecret]:
    """Build the transmit set and the secret needed to undo it.

    Draw order from the Philox stream of ``params.seed``: ``sigma_1..sigma_k``,
    then for each decoy its sign permutation (``signs`` mode) and magnitudes,
    then the slot order. ``permute=False`` / ``shuffle=False`` pin the
    corresponding permutations to the identity without changing the draws.
    """
    q = as_qubo(q)
    qstar, scale = normalize(q, params.epsilon)
    digits = digit_split(qstar, params.r, params.k)
    n, k, r = q.n, params.k, params.r
    rng = make_rng(params.seed)

    sigmas = [rng.permutation(n) for _ in range(k)]
    if not permute:
        sigmas = [np.arange(n) for _ in range(k)]
    items = [permute_matrix(d, s) for d, s in zip(digits, sigmas)]

    sign_q = np.sign(q.entries).astype(np.int64)
    for _ in range(params.decoys):
        if params.decoy_mode == "signs":
            items.append(make_decoy(n, r, rng, signs=permute_matrix(sign_q, rng.permutation(n))))
        else:
            items.append(make_decoy(n, r, rng))

    send_order = rng.permutation(k + params.decoys)
    if not shuffle:
        send_order = np.arange(k + params.decoys)
    transmit = TransmitSet([items[i] for i in send_order], r)
    secret = ObfuscationSecret(scale, sigmas, send_order, params, n)
    return transmit, secret


def digit_matrices(transmit: TransmitSet, secret: ObfuscationSecret) -> list[np.ndarray]:
    """Undo slot shuffle and permutations: the digit matrices ``M_1..M_k``."""
    _check_pair(transmit, secret)
    return [
        unpermute_matrix(transmit.matrices[slot], secret.sigmas[m])
        for m, slot in enumerate(secret.slot_of_digit)
    ]


def reconstruct_matrix(transmit: TransmitSet, secret: ObfuscationSecret) -> QuboMatrix:
    """``sum_m r^-m M_m`` with decoys dropped; within ``r^-k`` of ``Q*`` entrywise."""
    r = secret.params.r
    total = np.zeros((secret.n, secret.n))
    for m, mat in enumerate(digit_matrices(transmit, secret), start=1):
        total += mat * float(Fraction(1, r**m))
    return QuboMatrix(total)


def _check_pair(transmit: TransmitSet, secret: ObfuscationSecret):
    if len(transmit) != secret.k + secret.params.decoys or transmit.n != secret.n:
        raise ContractViolation("transmit set and secret come from different obfuscate calls")
    if transmit.radix != secret.params.r:
        raise ContractViolation("transmit set radix does not match the secret")


def save_secret(secret: ObfuscationSecret, path: str | PathLike) -> None:
    """Write the secret as JSON, readable by the owner only."""
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "w") as fh:
        json.dump(secret.to_json(), fh)
    os.chmod(path, 0o600)


def load_secret(path: str | PathLike) -> ObfuscationSecret:
    with open(path) as fh:
        return ObfuscationSecret.from_json(json.load(fh))
