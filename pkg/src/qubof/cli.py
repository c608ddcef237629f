"""Command-line entry point: ``qubof <subcommand>`` or ``python -m qubof``.

Every subcommand exits 0 on success. On failure it exits 1 and writes one
JSON object ``{"error": code, "message": text}`` to stderr.

Seeds: ``--seed`` wins, then the ``QUBOF_SEED`` environment variable, then
fresh OS entropy. The obfuscation and sampling streams are derived from the
one seed, so ``obfuscate`` followed by ``recover`` with the same seed gives
the same answer as ``solve``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ._rng import derive_seed, fresh_seed
from .core import DEFAULT_BUDGET, DEFAULT_EXACT_CAP, load_matrix, solve_exact
from .errors import QubofError
from .experiments import ExperimentConfig, parse_grid, payload_bytes, run_grid, write_csv, write_summary
from .obfuscation import DECOY_MODES, DEFAULT_EPSILON, ObfuscationParams, load_secret, obfuscate, save_secret
from .privacy import DEFAULT_AUTOMORPHISM_CAP, privacy_report
from .protocol import (
    SOLVER_MODES,
    SolverConfig,
    make_request,
    make_server,
    parse_response,
    read_json,
    respond_offline,
    submit,
    write_json,
)
from .reconstruction import DEFAULT_SAMPLES, recover

log = logging.getLogger("qubof")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("QUBOF_SEED")
    if env:
        return int(env)
    return fresh_seed()


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _params(args, seed: int) -> ObfuscationParams:
    return ObfuscationParams(
        r=args.radix, k=args.digits, decoys=args.decoys,
        epsilon=args.epsilon, seed=derive_seed(seed, "obfuscate"), decoy_mode=args.decoy_mode,
    )


def _solution_json(sol, q, reference: bool) -> dict:
    out = {"bits": list(sol.bits), "value": sol.value}
    if reference:
        best = solve_exact(q).value
        out["acc_vs"] = {"reference": best, "acc": sol.value / best if best else None}
    return out


def cmd_obfuscate(args) -> dict:
    q = load_matrix(args.matrix)
    seed = _seed(args)
    transmit, secret = obfuscate(q, _params(args, seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(transmit.to_json(), out / "transmit.json")
    save_secret(secret, out / "secret.json")
    return {"k": args.digits, "decoys": args.decoys, "matrices": len(transmit), "payload_bytes": payload_bytes(transmit)}


def _load_vectors(path):
    obj = read_json(path)
    return obj["vectors"] if isinstance(obj, dict) else obj


def cmd_recover(args) -> dict:
    q = load_matrix(args.matrix)
    secret = load_secret(args.secret)
    if secret.n != q.n:
        raise QubofError(f"secret is for order {secret.n}, matrix has order {q.n}")
    sol = recover(_load_vectors(args.vectors), secret, q, t=args.samples, seed=derive_seed(_seed(args), "sample"))
    result = _solution_json(sol, q, args.reference)
    _dump(result, Path(args.out))
    return result


def cmd_solve(args) -> dict:
    q = load_matrix(args.matrix)
    seed = _seed(args)
    transmit, secret = obfuscate(q, _params(args, seed))
    if args.offline:
        box = Path(args.offline)
        box.mkdir(parents=True, exist_ok=True)
        req = make_request(transmit)
        response = box / "response.json"
        if not response.exists():
            write_json(req, box / "request.json")
            return {"status": "request_written", "request": str(box / "request.json")}
        vectors = parse_response(read_json(response), req["batch_id"], len(transmit), q.n)
    else:
        endpoint = args.endpoint or SolverConfig(exact_cap=args.exact_cap)
        vectors = submit(endpoint, transmit)
    sol = recover(vectors, secret, q, t=args.samples, seed=derive_seed(seed, "sample"))
    result = _solution_json(sol, q, args.reference)
    if args.out:
        _dump(result, Path(args.out))
    return result


def cmd_serve(args) -> dict | None:
    config = SolverConfig(exact_cap=args.exact_cap, budget=args.budget, seed=args.seed or 0, mode=args.mode)
    if args.offline:
        box = Path(args.offline)
        request = box / "request.json"
        if not request.exists():
            request = box / "transmit.json"
        resp = respond_offline(request, box / "response.json", config)
        return {"status": resp["type"], "response": str(box / "response.json")}
    with make_server(args.listen, config) as server:
        print(json.dumps({"listening": server.endpoint}), flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
    return None


def cmd_privacy(args) -> dict:
    q = load_matrix(args.matrix)
    report = privacy_report(q, k=args.digits, r=args.radix, cap=args.cap).to_json()
    if args.out:
        _dump(report, Path(args.out))
    return report


def cmd_bench(args) -> dict:
    grid = parse_grid(args.grid)
    missing = {"n", "k", "r", "t"} - grid.keys()
    if missing:
        raise QubofError(f"--grid is missing axes: {sorted(missing)}")
    config = ExperimentConfig(
        ns=grid["n"], ks=grid["k"], rs=grid["r"], ts=grid["t"],
        trials=args.trials, base_seed=_seed(args), endpoint=args.endpoint,
        exact_cap=args.exact_cap,
    )
    records = run_grid(config, progress=lambda cell: log.info("done %s", cell))
    out = Path(args.out)
    write_csv(records, out)
    summary = out.with_suffix(".summary.json")
    write_summary(records, summary)
    return {"records": len(records), "csv": str(out), "summary": str(summary)}


def _add_obfuscation_flags(p):
    p.add_argument("--radix", "-r", type=int, default=4, help="digit base r (default 4)")
    p.add_argument("--digits", "-k", type=int, default=5, help="number of digit matrices k (default 5)")
    p.add_argument("--decoys", type=int, default=0, help="random decoy matrices to mix in")
    p.add_argument("--decoy-mode", choices=DECOY_MODES, default="signs")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="normalization slack")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qubof", description="Privacy-preserving outsourced QUBO solving.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("obfuscate", help="split and permute a matrix into transmit.json + secret.json")
    p.add_argument("--matrix", required=True, help='JSON file {"n": int, "entries": [[...]]}')
    _add_obfuscation_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_obfuscate)

    p = sub.add_parser("recover", help="rebuild a solution from the server's vectors")
    p.add_argument("--vectors", required=True, help="server response JSON (or a bare list of vectors)")
    p.add_argument("--secret", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--samples", "-t", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--seed", type=int)
    p.add_argument("--reference", action="store_true", help="also report acc against the exact optimum")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("solve", help="obfuscate, submit, recover in one go")
    p.add_argument("--matrix", required=True)
    _add_obfuscation_flags(p)
    p.add_argument("--samples", "-t", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--seed", type=int)
    p.add_argument("--endpoint", help="HOST:PORT of a solver server (default: solve in-process)")
    p.add_argument("--exact-cap", type=int, default=DEFAULT_EXACT_CAP, help="in-process solver exact cap")
    p.add_argument("--offline", help="exchange request.json/response.json through this directory")
    p.add_argument("--reference", action="store_true")
    p.add_argument("--out", help="solution JSON path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("serve", help="run the stand-in solver server")
    p.add_argument("--listen", default="127.0.0.1:7878")
    p.add_argument("--exact-cap", type=int, default=DEFAULT_EXACT_CAP)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="annealing sweeps above the exact cap")
    p.add_argument("--mode", choices=SOLVER_MODES, default="auto")
    p.add_argument("--seed", type=int)
    p.add_argument("--offline", help="answer DIR/request.json into DIR/response.json and exit")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("privacy", help="automorphism count, recovery probability, digit diagnostics")
    p.add_argument("--matrix", required=True)
    p.add_argument("--digits", "-k", type=int, default=5)
    p.add_argument("--radix", "-r", type=int, default=4)
    p.add_argument("--cap", type=int, default=DEFAULT_AUTOMORPHISM_CAP, help="largest n counted exactly")
    p.add_argument("--out")
    p.set_defaults(func=cmd_privacy)

    p = sub.add_parser("bench", help="accuracy sweep over an (n, k, r, t) grid")
    p.add_argument("--grid", nargs="+", required=True, metavar="AXIS=VALUES",
                   help="e.g. n=8:22:2 k=1:8 r=2,4,8,10 t=50,100,200,300")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int)
    p.add_argument("--endpoint")
    p.add_argument("--exact-cap", type=int, default=DEFAULT_EXACT_CAP)
    p.add_argument("--out", required=True, help="CSV path; a .summary.json goes next to it")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        result = args.func(args)
    except (QubofError, OSError, ValueError, KeyError) as exc:
        code = getattr(exc, "code", None) or type(exc).__name__
        sys.stderr.write(json.dumps({"error": code, "message": str(exc)}) + "\n")
        return 1
    if result is not None:
        print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
