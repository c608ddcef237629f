"""Client/server exchange of obfuscated batches.

Wire format: every message is a 4-byte big-endian length followed by that
many bytes of UTF-8 JSON.

Request::

    {"type": "solve", "batch_id": str, "radix": int | null,
     "matrices": [{"n": int, "entries": [[int, ...], ...]}, ...]}

Response::

    {"type": "result", "batch_id": str, "vectors": [[0, 1, ...], ...]}
    {"type": "error", "code": str, "message": str}

A result may also carry ``"errors": [{"slot", "code", "message"}]`` with
``null`` in the matching ``vectors`` slots when a single matrix could not be
solved (e.g. exact-only mode above the size cap). ``radix: null`` marks a
test-mode request whose entries may be arbitrary finite reals.
"""

from __future__ import annotations

import hashlib
import json
import logging
import socket
import socketserver
import struct
from dataclasses import dataclass
from os import PathLike

import numpy as np

from ._rng import derive_seed, fresh_seed
from .core import DEFAULT_BUDGET, DEFAULT_EXACT_CAP, SolutionVector, as_qubo, solve_exact, solve_heuristic
from .errors import ContractViolation, ProtocolError, SizeLimitError, TransportError
from .obfuscation import ObfuscationParams, TransmitSet, obfuscate
from .reconstruction import DEFAULT_SAMPLES, recover

log = logging.getLogger(__name__)

HEADER = struct.Struct(">I")
MAX_FRAME = 256 * 1024 * 1024
SOLVER_MODES = ("auto", "exact", "heuristic")


@dataclass(frozen=True)
class SolverConfig:
    """How the server solves each matrix.

    ``auto`` solves exactly up to ``exact_cap`` and anneals above it;
    ``exact`` reports a per-matrix error above the cap instead.
    """

    exact_cap: int = DEFAULT_EXACT_CAP
    budget: int = DEFAULT_BUDGET
    seed: int = 0
    mode: str = "auto"

    def __post_init__(self):
        if self.mode not in SOLVER_MODES:
            raise ContractViolation(f"mode must be one of {SOLVER_MODES}")
        if self.budget < 1 or self.exact_cap < 0:
            raise ContractViolation("budget must be positive and exact_cap non-negative")


# -- framing -----------------------------------------------------------------


def encode_frame(obj: dict) -> bytes:
    payload = json.dumps(obj, separators=(",", ":")).encode()
    return HEADER.pack(len(payload)) + payload


def decode_frame(data: bytes) -> dict:
    if len(data) < HEADER.size:
        raise ProtocolError("malformed", "frame shorter than its length prefix")
    (size,) = HEADER.unpack_from(data)
    if len(data) != HEADER.size + size:
        raise ProtocolError("malformed", f"length prefix says {size} bytes, got {len(data) - HEADER.size}")
    return _parse_payload(data[HEADER.size :])


def _parse_payload(payload: bytes) -> dict:
    try:
        obj = json.loads(payload.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError("malformed", f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("malformed", "frame must hold a JSON object")
    return obj


def _recv_exact(sock: socket.socket, size: int) -> bytes | None:
    chunks, got = [], 0
    while got < size:
        chunk = sock.recv(min(size - got, 1 << 20))
        if not chunk:
            return None
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> bytes | None:
    """One raw frame (prefix included) from ``sock``; ``None`` on clean EOF."""
    head = _recv_exact(sock, HEADER.size)
    if head is None:
        return None
    (size,) = HEADER.unpack(head)
    if size > MAX_FRAME:
        raise ProtocolError("malformed", f"frame of {size} bytes exceeds the {MAX_FRAME} limit")
    body = _recv_exact(sock, size)
    if body is None:
        raise TransportError("connection closed mid-frame")
    return head + body


# -- server logic ------------------------------------------------------------


def _error(code: str, message: str) -> dict:
    return {"type": "error", "code": code, "message": message}


def _parse_matrices(req: dict) -> list[np.ndarray]:
    radix = req.get("radix")
    if radix is not None and (not isinstance(radix, int) or isinstance(radix, bool) or radix < 2):
        raise ProtocolError("bad_request", "radix must be an integer >= 2 or null")
    mats = req.get("matrices")
    if not isinstance(mats, list) or not mats:
        raise ProtocolError("empty_batch", "request must carry at least one matrix")
    out = []
    for slot, m in enumerate(mats):
        try:
            n, entries = m["n"], m["entries"]
            arr = np.array(entries, dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError("bad_request", f"slot {slot}: unreadable matrix ({exc})") from exc
        if arr.shape != (n, n) or n < 1:
            raise ProtocolError("bad_request", f"slot {slot}: entries are not an {n}x{n} matrix")
        if not np.all(np.isfinite(arr)):
            raise ProtocolError("bad_request", f"slot {slot}: non-finite entry")
        if radix is not None:
            if not all(isinstance(e, int) and not isinstance(e, bool) for row in entries for e in row):
                raise ProtocolError("bad_request", f"slot {slot}: digit matrices need integer entries")
            if np.abs(arr).max() > radix - 1:
                raise ProtocolError("bad_request", f"slot {slot}: entry outside the radix bound")
        out.append(arr)
    if len({a.shape[0] for a in out}) != 1:
        raise ProtocolError("bad_request", "all matrices in a batch must share one order")
    return out


def _solve_one(a: np.ndarray, config: SolverConfig, batch_id: str, slot: int) -> SolutionVector:
    n = a.shape[0]
    if config.mode == "heuristic" or (config.mode == "auto" and n > config.exact_cap):
        return solve_heuristic(a, config.budget, derive_seed(config.seed, batch_id, slot))
    return solve_exact(a, cap=config.exact_cap)


def handle_request(req: dict, config: SolverConfig) -> dict:
    """Answer one decoded request; never raises, returns a result or error frame."""
    if req.get("type") != "solve":
        return _error("bad_request", f"unknown message type {req.get('type')!r}")
    batch_id = req.get("batch_id")
    if not isinstance(batch_id, str):
        return _error("bad_request", "batch_id must be a string")
    try:
        mats = _parse_matrices(req)
    except ProtocolError as exc:
        return _error(exc.code, exc.message)
    vectors, errors = [], []
    for slot, a in enumerate(mats):
        try:
            vectors.append(list(_solve_one(a, config, batch_id, slot).bits))
        except SizeLimitError as exc:
            vectors.append(None)
            errors.append({"slot": slot, "code": exc.code, "message": str(exc)})
    resp = {"type": "result", "batch_id": batch_id, "vectors": vectors}
    if errors:
        resp["errors"] = errors
    return resp


def handle_frame(frame: bytes, config: SolverConfig) -> bytes:
    try:
        req = decode_frame(frame)
    except ProtocolError as exc:
        return encode_frame(_error(exc.code, exc.message))
    return encode_frame(handle_request(req, config))


# -- transports --------------------------------------------------------------


class LocalTransport:
    """In-process server; every exchanged frame is kept for inspection."""

    def __init__(self, config: SolverConfig | None = None):
        self.config = config or SolverConfig()
        self.sent: list[bytes] = []
        self.received: list[bytes] = []

    @property
    def messages(self) -> int:
        return len(self.sent)

    def exchange(self, frame: bytes) -> bytes:
        self.sent.append(frame)
        reply = handle_frame(frame, self.config)
        self.received.append(reply)
        return reply


class SocketTransport:
    """One TCP connection per exchange to a ``host:port`` server."""

    def __init__(self, address: str, timeout: float | None = 60.0):
        self.address = parse_address(address)
        self.timeout = timeout

    def exchange(self, frame: bytes) -> bytes:
        try:
            with socket.create_connection(self.address, timeout=self.timeout) as sock:
                sock.sendall(frame)
                reply = read_frame(sock)
        except (OSError, socket.timeout) as exc:
            raise TransportError(f"exchange with {self.address} failed: {exc}") from exc
        if reply is None:
            raise TransportError("server closed the connection without answering")
        return reply


def parse_address(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise ContractViolation(f"address must look like HOST:PORT, got {address!r}")
    return host or "127.0.0.1", int(port)


def _transport(endpoint):
    if isinstance(endpoint, str):
        return SocketTransport(endpoint)
    if isinstance(endpoint, SolverConfig):
        return LocalTransport(endpoint)
    if hasattr(endpoint, "exchange"):
        return endpoint
    raise ContractViolation(f"cannot talk to endpoint {endpoint!r}")


# -- client ------------------------------------------------------------------


def make_request(transmit: TransmitSet, batch_id: str | None = None) -> dict:
    """Request object for ``transmit``.

    The default batch id is a content hash of the payload, so it carries no
    information beyond the matrices themselves.
    """
    body = transmit.to_json()
    if batch_id is None:
        digest = hashlib.sha256(json.dumps(body, separators=(",", ":")).encode())
        batch_id = digest.hexdigest()[:32]
    return {"type": "solve", "batch_id": batch_id, "radix": body["radix"], "matrices": body["matrices"]}


def parse_response(resp: dict, batch_id: str, count: int, n: int) -> np.ndarray:
    if resp.get("type") == "error":
        raise ProtocolError(str(resp.get("code", "error")), str(resp.get("message", "")))
    if resp.get("type") != "result" or resp.get("batch_id") != batch_id:
        raise ProtocolError("bad_response", "response does not answer this batch")
    if resp.get("errors"):
        first = resp["errors"][0]
        raise ProtocolError(first.get("code", "error"), f"slot {first.get('slot')}: {first.get('message')}")
    try:
        vectors = np.array(resp["vectors"], dtype=np.int8)
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError("bad_response", f"unreadable vectors ({exc})") from exc
    if vectors.shape != (count, n) or not np.all((vectors == 0) | (vectors == 1)):
        raise ProtocolError("bad_response", f"expected {count} binary vectors of length {n}")
    return vectors


def submit_request(endpoint, req: dict) -> np.ndarray:
    """Send one request, return the ``(slots, n)`` array of answers."""
    reply = _transport(endpoint).exchange(encode_frame(req))
    n = req["matrices"][0]["n"]
    return parse_response(decode_frame(reply), req["batch_id"], len(req["matrices"]), n)


def submit(endpoint, transmit: TransmitSet, batch_id: str | None = None) -> np.ndarray:
    """One round trip: send the transmit set, get one vector per slot, in slot order.

    ``endpoint`` is a ``host:port`` string, a :class:`SolverConfig` (solve
    in-process), or any object with an ``exchange(bytes) -> bytes`` method.
    """
    return submit_request(endpoint, make_request(transmit, batch_id))


def submit_matrices(endpoint, matrices, batch_id: str = "test") -> np.ndarray:
    """Test mode: send arbitrary real matrices with ``radix: null``."""
    mats = [np.asarray(m, dtype=np.float64) for m in matrices]
    req = {
        "type": "solve",
        "batch_id": batch_id,
        "radix": None,
        "matrices": [{"n": int(m.shape[0]), "entries": m.tolist()} for m in mats],
    }
    return submit_request(endpoint, req)


def run_protocol(
    q,
    params: ObfuscationParams,
    t: int = DEFAULT_SAMPLES,
    endpoint=None,
    seed: int | None = None,
    weights=None,
) -> SolutionVector:
    """Obfuscate, submit, recover. The reported value is measured on ``q``.

    ``params.seed`` drives the obfuscation; ``seed`` drives candidate
    sampling. Anyone who can guess ``params.seed`` can undo the
    obfuscation, so it must be secret and high-entropy in real use.
    """
    q = as_qubo(q)
    transmit, secret = obfuscate(q, params)
    vectors = submit(endpoint if endpoint is not None else SolverConfig(), transmit)
    if seed is None:
        seed = fresh_seed()
    return recover(vectors, secret, q, t=t, weights=weights, seed=derive_seed(seed, "sample"))


# -- socket server -----------------------------------------------------------


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        config = self.server.solver_config
        while True:
            try:
                frame = read_frame(self.request)
            except ProtocolError as exc:
                self.request.sendall(encode_frame(_error(exc.code, exc.message)))
                return
            except (TransportError, OSError):
                return
            if frame is None:
                return
            self.request.sendall(handle_frame(frame, config))


class SolverServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], config: SolverConfig):
        self.solver_config = config
        super().__init__(address, _Handler)

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"


def make_server(listen: str, config: SolverConfig | None = None) -> SolverServer:
    """Bound, not yet serving; ``port 0`` picks a free port (see ``.endpoint``)."""
    return SolverServer(parse_address(listen), config or SolverConfig())


def serve(listen: str, config: SolverConfig | None = None) -> None:
    """Run a solver server until interrupted."""
    with make_server(listen, config) as server:
        log.info("listening on %s", server.endpoint)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass


# -- offline exchange --------------------------------------------------------


def write_json(obj: dict, path: str | PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, separators=(",", ":"))


def read_json(path: str | PathLike) -> dict:
    with open(path) as fh:
        return json.load(fh)


def respond_offline(request_path: str | PathLike, response_path: str | PathLike, config: SolverConfig | None = None) -> dict:
    """Server side of the file-based exchange: answer one request (or transmit set) file."""
    try:
        req = read_json(request_path)
    except json.JSONDecodeError as exc:
        resp = _error("malformed", f"invalid JSON: {exc}")
    else:
        if not isinstance(req, dict):
            resp = _error("malformed", "not an object")
        else:
            if "type" not in req and "matrices" in req:
                # a bare transmit.json from `qubof obfuscate`
                req = {"type": "solve", "batch_id": "offline", **req}
            resp = handle_request(req, config or SolverConfig())
    write_json(resp, response_path)
    return resp


def wire_size(transmit: TransmitSet) -> int:
    """Bytes of the request frame for ``transmit``."""
    return len(encode_frame(make_request(transmit)))

