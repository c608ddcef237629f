"""
Talking to a solver over a socket
=================================

Starts a solver server on a loopback port, runs the full protocol against
it, and shows exactly what crossed the wire.
"""

import threading

import numpy as np

from qubof import ObfuscationParams, run_protocol
from qubof.core import MatrixGenSpec, generate_matrix, solve_exact
from qubof.protocol import LocalTransport, SolverConfig, decode_frame, make_server

server = make_server("127.0.0.1:0", SolverConfig())
threading.Thread(target=server.serve_forever, daemon=True).start()
print("solver listening on", server.endpoint)

q = generate_matrix(MatrixGenSpec(n=14, seed=5))
params = ObfuscationParams(r=4, k=5, decoys=1, seed=2)
solution = run_protocol(q, params, t=300, endpoint=server.endpoint, seed=9)
best = solve_exact(q).value
print(f"obtained {solution.value:.3f}, optimum {best:.3f}, acc {solution.value / best:.3f}")

# The same run through an in-memory transport lets us read the frames.
capture = LocalTransport()
run_protocol(q, params, t=300, endpoint=capture, seed=9)
request = decode_frame(capture.sent[0])
print("\nrequest keys:", sorted(request))
print("matrices:", len(request["matrices"]), "radix:", request["radix"])
print("distinct entry values:", np.unique(np.array([m["entries"] for m in request["matrices"]])).tolist())
print("request size:", len(capture.sent[0]), "bytes")

server.shutdown()
server.server_close()
