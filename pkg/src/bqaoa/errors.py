"""Exception hierarchy shared across the package.

Grouped by how the CLI maps them to exit codes: configuration problems
(exit 2), infeasible requests (exit 3), everything else unexpected (exit 4).
"""


class BqaoaError(Exception):
    """Base class for all package errors."""


# --- configuration / input errors (CLI exit code 2) ---


class ParseError(BqaoaError):
    """A file could not be parsed at all (malformed JSON, wrong shape)."""


class ValidationError(BqaoaError):
    """A parsed value violates an invariant; the message names the field."""


class DimensionError(BqaoaError):
    """Mismatched array or matrix dimensions."""


class LengthError(BqaoaError):
    """A bitstring or vector has the wrong length."""


class ConfigError(BqaoaError):
    """Invalid run configuration (empty ranges, bad flag combinations)."""


class TooLargeError(BqaoaError):
    """Problem size exceeds what dense simulation supports."""


class MeasureInUnitaryError(BqaoaError):
    """A circuit containing measurements was passed to a unitary builder."""


# --- infeasible requests (CLI exit code 3) ---


class EmptyDeviceError(BqaoaError):
    """Operation requires a device with at least one qubit/edge."""


class UnmappedEdgeError(BqaoaError):
    """A two-qubit gate acts on a qubit pair with no device edge."""


class NonAdjacentGateError(BqaoaError):
    """A two-qubit gate acts on non-neighbouring wires of a linear chain."""


class MissingEdgeError(BqaoaError):
    """Consecutive chain qubits do not share a device edge."""


class NoChainError(BqaoaError):
    """No chain satisfies the selection constraints (names the constraint)."""


class NoFeasibleOutcomeError(BqaoaError):
    """Budget post-selection removed every outcome from a distribution."""


class ZeroOptimumError(BqaoaError):
    """The optimal cost is zero, so an approximation ratio is undefined."""


class SingularConfusionError(BqaoaError):
    """A readout confusion matrix is not invertible."""


INFEASIBLE_ERRORS = (
    EmptyDeviceError,
    UnmappedEdgeError,
    NonAdjacentGateError,
    MissingEdgeError,
    NoChainError,
    NoFeasibleOutcomeError,
)

CONFIG_ERRORS = (
    ParseError,
    ValidationError,
    DimensionError,
    LengthError,
    ConfigError,
    TooLargeError,
    MeasureInUnitaryError,
)
