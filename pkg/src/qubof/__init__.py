"""Outsource a QUBO problem to an untrusted solver without revealing its model matrix.

The client splits the normalized matrix into signed base-r digit matrices,
permutes and shuffles them, lets the server solve each piece, and rebuilds a
near-optimal answer by sampling from the weighted average of the returned
vectors.
"""

from .core import (
    MatrixGenSpec,
    QuboMatrix,
    SolutionVector,
    generate_matrix,
    load_matrix,
    objective,
    save_matrix,
    solve_exact,
    solve_heuristic,
)
from .errors import (
    ContractViolation,
    DegenerateInputError,
    InfeasibleSizeError,
    ProtocolError,
    QubofError,
    SizeLimitError,
    TransportError,
)
from .obfuscation import (
    DigitMatrix,
    ObfuscationParams,
    ObfuscationSecret,
    TransmitSet,
    digit_split,
    make_decoy,
    normalize,
    obfuscate,
    permute_matrix,
    reconstruct_matrix,
)
from .privacy import (
    PrivacyReport,
    count_automorphisms,
    digit_uniformity,
    privacy_report,
    recovery_probability,
    sign_matrix,
)
from .protocol import SolverConfig, run_protocol, serve, submit
from .reconstruction import (
    default_weights,
    recover,
    sample_candidates,
    select_best,
    unshuffle,
    weighted_average,
)

__version__ = "0.1.0"

__all__ = [
    "ContractViolation",
    "count_automorphisms",
    "default_weights",
    "DegenerateInputError",
    "digit_split",
    "digit_uniformity",
    "DigitMatrix",
    "generate_matrix",
    "InfeasibleSizeError",
    "load_matrix",
    "make_decoy",
    "MatrixGenSpec",
    "normalize",
    "obfuscate",
    "ObfuscationParams",
    "ObfuscationSecret",
    "objective",
    "permute_matrix",
    "privacy_report",
    "PrivacyReport",
    "ProtocolError",
    "QubofError",
    "QuboMatrix",
    "reconstruct_matrix",
    "recover",
    "recovery_probability",
    "run_protocol",
    "sample_candidates",
    "save_matrix",
    "select_best",
    "serve",
    "sign_matrix",
    "SizeLimitError",
    "SolutionVector",
    "solve_exact",
    "solve_heuristic",
    "SolverConfig",
    "submit",
    "TransmitSet",
    "TransportError",
    "unshuffle",
    "weighted_average",
]
