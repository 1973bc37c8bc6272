from typing import Any, Dict, Optional

from ..models.schemas import ErrorCode


class VolOccError(Exception):
    """Base error carrying an error code and structured details."""

    code: ErrorCode = ErrorCode.ESTIMATION_ERROR

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ConfigurationError(VolOccError, ValueError):
    """Invalid configuration or violated operation precondition."""

    code = ErrorCode.CONFIG_ERROR


class InputDataError(VolOccError, ValueError):
    """Malformed input data (price CSV, posted series)."""

    code = ErrorCode.INPUT_ERROR


class SimulationError(VolOccError):
    code = ErrorCode.SIMULATION_ERROR


class EstimationError(VolOccError):
    code = ErrorCode.ESTIMATION_ERROR


class ReplicaError(VolOccError):
    """A Monte Carlo replica failed; carries the replica index."""

    code = ErrorCode.REPLICA_FAILED

    def __init__(self, replica: int, cause: BaseException):
        super().__init__(
            f"Replica {replica} failed: {cause}",
            details={"replica": replica, "cause": type(cause).__name__},
        )
        self.replica = replica
        self.cause = cause

    def __reduce__(self):
        return (ReplicaError, (self.replica, self.cause))
