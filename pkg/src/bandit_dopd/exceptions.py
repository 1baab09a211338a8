"""Exception types raised by the simulator."""


class ParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


class ContractViolation(ValueError):
    """An input breaks a structural precondition (e.g. an asymmetric graph)."""


class ConnectivityError(RuntimeError):
    """A window of communication graphs is not jointly strongly connected."""


class InvariantViolation(RuntimeError):
    """A runtime invariant check failed while debug invariants were enabled."""


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""
