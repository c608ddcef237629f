"""Accuracy sweeps and cost measurements.

Every trial is keyed by ``(base_seed, n, trial)``: the matrix, the
obfuscation permutations and the sampling stream depend only on that key,
so cells that differ in ``k``, ``r`` or ``t`` are paired on identical
matrices, and a larger ``t`` sees a superset of a smaller ``t``'s samples.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from itertools import product
from os import PathLike

import numpy as np

from ._rng import derive_seed
from .core import DEFAULT_EXACT_CAP, MatrixGenSpec, generate_matrix, objectives, solve_exact, solve_heuristic
from .errors import ContractViolation
from .obfuscation import ObfuscationParams, obfuscate
from .protocol import SolverConfig, encode_frame, make_request, submit
from .reconstruction import default_weights, recover, sample_candidates, unshuffle, weighted_average

CSV_COLUMNS = ["n", "k", "r", "t", "trial", "seed", "obtained", "true", "acc", "err", "flags", "ms"]
REFERENCE_BUDGET = 20000


@dataclass(frozen=True)
class Cell:
    n: int
    k: int
    r: int
    t: int


@dataclass
class ExperimentConfig:
    ns: list[int]
    ks: list[int]
    rs: list[int]
    ts: list[int]
    trials: int = 20
    mean: float = 0.0
    stddev: float = 4.0
    base_seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    endpoint: str | None = None
    exact_cap: int = DEFAULT_EXACT_CAP
    reference_budget: int = REFERENCE_BUDGET

    def __post_init__(self):
        if not (self.ns and self.ks and self.rs and self.ts):
            raise ContractViolation("every grid axis needs at least one value")
        if self.trials < 1:
            raise ContractViolation("trials must be at least 1")

    def cells(self) -> list[Cell]:
        return [Cell(*c) for c in product(self.ns, self.ks, self.rs, self.ts)]


@dataclass
class ExperimentRecord:
    n: int
    k: int
    r: int
    t: int
    trial: int
    seed: int
    obtained: float
    true: float
    acc: float
    err: float
    flags: str
    ms: float

    @property
    def degenerate(self) -> bool:
        return "degenerate" in self.flags.split("|")


def accuracy(obtained: float, true: float) -> tuple[float, float, list[str]]:
    """``(acc, err, flags)`` with acc = obtained/true, err = |obtained - true| / |true|."""
    if true == 0:
        return math.nan, math.nan, ["degenerate"]
    flags = []
    if obtained != 0 and math.copysign(1, obtained) != math.copysign(1, true):
        flags.append("sign_mismatch")
    if obtained < true:
        flags.append("beats_reference")
    return obtained / true, abs(obtained - true) / abs(true), flags


class _TruthCache:
    """True optimum per generated matrix, shared across the cells of one sweep."""

    def __init__(self, exact_cap: int, reference_budget: int):
        self.exact_cap = exact_cap
        self.reference_budget = reference_budget
        self._cache: dict[tuple, tuple[float, bool]] = {}

    def __call__(self, q, key) -> tuple[float, bool]:
        if key not in self._cache:
            if q.n <= self.exact_cap:
                self._cache[key] = (solve_exact(q, cap=self.exact_cap).value, False)
            else:
                ref = solve_heuristic(q, self.reference_budget, seed=derive_seed(key[0], "reference"))
                self._cache[key] = (ref.value, True)
        return self._cache[key]


def trial_seeds(base_seed: int, n: int, trial: int) -> dict[str, int]:
    return {
        "matrix": derive_seed(base_seed, "matrix", n, trial),
        "obfuscate": derive_seed(base_seed, "obfuscate", n, trial),
        "sample": derive_seed(base_seed, "sample", n, trial),
    }


def run_cell(
    cell: Cell,
    trials: int,
    base_seed: int = 0,
    *,
    mean: float = 0.0,
    stddev: float = 4.0,
    endpoint=None,
    solver: SolverConfig | None = None,
    truth=None,
) -> list[ExperimentRecord]:
    """Run ``trials`` full protocol rounds for one grid cell.

    The server is ``endpoint`` if given, otherwise an in-process solver with
    ``solver`` settings. Truth is exact up to the solver's exact cap and a
    high-budget annealing reference above it (flagged ``approx_truth``).
    """
    solver = solver or SolverConfig()
    if truth is None:
        truth = _TruthCache(solver.exact_cap, REFERENCE_BUDGET)
    server = endpoint if endpoint is not None else solver
    records = []
    for trial in range(trials):
        seeds = trial_seeds(base_seed, cell.n, trial)
        q = generate_matrix(MatrixGenSpec(cell.n, mean, stddev, seeds["matrix"]))
        true_value, approx = truth(q, (seeds["matrix"], cell.n, mean, stddev))
        start = time.perf_counter()
        params = ObfuscationParams(r=cell.r, k=cell.k, seed=seeds["obfuscate"])
        transmit, secret = obfuscate(q, params)
        vectors = submit(server, transmit)
        sol = recover(vectors, secret, q, t=cell.t, seed=seeds["sample"])
        ms = (time.perf_counter() - start) * 1000.0
        acc, err, flags = accuracy(sol.value, true_value)
        if approx:
            flags.append("approx_truth")
        records.append(
            ExperimentRecord(
                cell.n, cell.k, cell.r, cell.t, trial, seeds["matrix"],
                sol.value, true_value, acc, err, "|".join(flags), round(ms, 3),
            )
        )
    return records


def run_grid(config: ExperimentConfig, progress=None) -> list[ExperimentRecord]:
    truth = _TruthCache(config.exact_cap, config.reference_budget)
    solver = SolverConfig(config.exact_cap, config.solver.budget, config.solver.seed, config.solver.mode)
    records = []
    for cell in config.cells():
        records += run_cell(
            cell, config.trials, config.base_seed,
            mean=config.mean, stddev=config.stddev,
            endpoint=config.endpoint, solver=solver, truth=truth,
        )
        if progress:
            progress(cell)
    return records


def _stats(values: list[float]) -> dict[str, float]:
    if not values:
        return {"mean": math.nan, "median": math.nan, "std": math.nan}
    return {
        "mean": statistics.fmean(values),
        "median": statistics.median(values),
        "std": statistics.pstdev(values),
    }


def aggregate(records: list[ExperimentRecord]) -> list[dict]:
    """Per-cell mean / median / population stddev of acc and err.

    Degenerate records (true optimum 0) count towards ``trials`` and
    ``degenerate`` but not towards the ratio statistics.
    """
    if not records:
        raise ContractViolation("nothing to aggregate")
    groups = defaultdict(list)
    for rec in records:
        groups[(rec.n, rec.k, rec.r, rec.t)].append(rec)
    out = []
    for (n, k, r, t), recs in groups.items():
        good = [x for x in recs if not x.degenerate]
        acc, err, ms = _stats([x.acc for x in good]), _stats([x.err for x in good]), _stats([x.ms for x in recs])
        out.append({
            "n": n, "k": k, "r": r, "t": t,
            "trials": len(recs),
            "degenerate": len(recs) - len(good),
            "flagged": sum(bool(x.flags) for x in recs),
            **{f"acc_{key}": v for key, v in acc.items()},
            **{f"err_{key}": v for key, v in err.items()},
            **{f"ms_{key}": v for key, v in ms.items()},
        })
    return out


def write_csv(records: list[ExperimentRecord], path: str | PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for rec in records:
            writer.writerow(asdict(rec))


def read_csv(path: str | PathLike) -> list[ExperimentRecord]:
    casts = {c: int for c in ("n", "k", "r", "t", "trial", "seed")}
    casts.update({c: float for c in ("obtained", "true", "acc", "err", "ms")})
    with open(path, newline="") as fh:
        return [
            ExperimentRecord(**{c: casts.get(c, str)(row[c]) for c in CSV_COLUMNS})
            for row in csv.DictReader(fh)
        ]


def write_summary(records: list[ExperimentRecord], path: str | PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(aggregate(records), fh, indent=2)


def parse_axis(text: str) -> list[int]:
    """``"8:22:2"`` (inclusive range), ``"1:8"``, or ``"2,4,8"``."""
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) not in (2, 3):
            raise ContractViolation(f"bad range {text!r}")
        lo, hi, step = parts[0], parts[1], parts[2] if len(parts) == 3 else 1
        if step < 1 or hi < lo:
            raise ContractViolation(f"bad range {text!r}")
        return list(range(lo, hi + 1, step))
    return [int(p) for p in text.split(",") if p]


def parse_grid(specs: list[str]) -> dict[str, list[int]]:
    """``["n=8:22:2", "k=1:8", ...]`` to ``{"n": [...], ...}``."""
    grid = {}
    for spec in specs:
        name, sep, values = spec.partition("=")
        if not sep or name not in ("n", "k", "r", "t"):
            raise ContractViolation(f"grid axis must be one of n, k, r, t: {spec!r}")
        grid[name] = parse_axis(values)
    return grid


# -- cost scaling ------------------------------------------------------------


def payload_bytes(transmit) -> int:
    """Request bytes that carry matrices: the frame minus its constant envelope."""
    req = make_request(transmit)
    return len(encode_frame(req)) - len(encode_frame({**req, "matrices": []}))


def _fit_exponent(xs, ys) -> float:
    if len(set(xs)) < 2:
        return math.nan
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def _sampling_seconds(q, p, t: int, repeats: int) -> float:
    best = math.inf
    for i in range(repeats):
        start = time.perf_counter()
        cands = sample_candidates(p, t, seed=i)
        objectives(q, cands).argmin()
        best = min(best, time.perf_counter() - start)
    return best


def cost_scaling_check(
    ns=range(8, 33, 4),
    ks=range(1, 9),
    r: int = 4,
    fixed_k: int = 4,
    fixed_n: int = 16,
    seed: int = 0,
    t: int = 10000,
    timing_n: int = 64,
    repeats: int = 7,
) -> dict:
    """Measure how communication and client sampling work grow.

    Returns the payload byte tables, log-log exponents in ``n`` and ``k``,
    and the timing ratio of the sampling phase for ``2t`` versus ``t``.
    """
    ns, ks = list(ns), list(ks)
    by_n = []
    for n in ns:
        q = generate_matrix(MatrixGenSpec(n, seed=derive_seed(seed, "cost", n)))
        transmit, _ = obfuscate(q, ObfuscationParams(r=r, k=fixed_k, seed=seed))
        by_n.append(payload_bytes(transmit))
    q = generate_matrix(MatrixGenSpec(fixed_n, seed=derive_seed(seed, "cost", fixed_n)))
    by_k = []
    for k in ks:
        transmit, _ = obfuscate(q, ObfuscationParams(r=r, k=k, seed=seed))
        by_k.append(payload_bytes(transmit))

    qt = generate_matrix(MatrixGenSpec(timing_n, seed=derive_seed(seed, "cost", timing_n)))
    transmit, secret = obfuscate(qt, ObfuscationParams(r=r, k=fixed_k, seed=seed))
    vectors = submit(SolverConfig(mode="heuristic", budget=200), transmit)
    p = weighted_average(unshuffle(vectors, secret), default_weights(r, fixed_k))
    time_t = _sampling_seconds(qt, p, t, repeats)
    time_2t = _sampling_seconds(qt, p, 2 * t, repeats)
    return {
        "n_values": ns,
        "bytes_by_n": by_n,
        "k_values": ks,
        "bytes_by_k": by_k,
        "exponent_n": _fit_exponent(ns, by_n),
        "exponent_k": _fit_exponent(ks, by_k),
        "sampling_seconds": {"t": t, "at_t": time_t, "at_2t": time_2t},
        "sampling_ratio": time_2t / time_t,
    }
