"""Exception types shared across the package."""


class QubofError(Exception):
    """Base class for all errors raised by qubof."""

    code = "error"


class ContractViolation(QubofError, ValueError):
    """An argument broke a documented precondition (shape, range, bijectivity...)."""

    code = "contract_violation"


class DegenerateInputError(QubofError, ValueError):
    """The input has nothing to solve, e.g. an all-zero model matrix."""

    code = "degenerate_input"


class SizeLimitError(QubofError):
    """Exhaustive search refused because the matrix order exceeds the cap."""

    code = "size_limit"


class InfeasibleSizeError(QubofError):
    """Exact automorphism counting refused because the order exceeds the cap."""

    code = "infeasible_size"


class ProtocolError(QubofError):
    """A malformed frame, or an error frame returned by the server."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


class TransportError(QubofError):
    """Connection failure, timeout, or a connection closed mid-exchange."""

    code = "transport"
