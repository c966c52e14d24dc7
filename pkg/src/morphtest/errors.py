"""Exception hierarchy shared by every morphtest module."""


class MorphError(Exception):
    """Base class for all morphtest errors."""


# -- configuration / validation (CLI exit code 1) ---------------------------

class InvalidConfig(MorphError):
    pass


class MalformedConfig(InvalidConfig):
    pass


class MissingArgument(InvalidConfig):
    def __init__(self, name: str):
        super().__init__(f"missing required argument: {name}")
        self.name = name


class UnknownTask(InvalidConfig):
    pass


class UnknownRelation(InvalidConfig):
    pass


# -- task catalog ------------------------------------------------------------

class MalformedTaskFile(MorphError):
    def __init__(self, message: str, task_id: str | None = None):
        if task_id is not None:
            message = f"task {task_id!r}: {message}"
        super().__init__(message)
        self.task_id = task_id


class ArityMismatch(MorphError, ValueError):
    pass


# -- relation engine ---------------------------------------------------------

class DuplicateRelationId(MorphError):
    pass


class UnknownFunctionId(MorphError):
    pass


class UnknownVerification(MorphError):
    pass


class MalformedRelation(MorphError):
    pass


class NotApplicable(MorphError):
    pass


class TransformationFailed(MorphError):
    pass


class OutputKindMismatch(MorphError):
    pass


class UnparsedOutput(MorphError):
    """An output relation was asked about an output that failed to parse."""


# -- comparators -------------------------------------------------------------

class NonFiniteInput(MorphError, ValueError):
    pass


class EmbeddingUnavailable(MorphError):
    pass


# -- gateway -----------------------------------------------------------------

class GatewayError(MorphError):
    pass


class TransientError(GatewayError):
    """Transport failure or server-side error; safe to retry."""


class RateLimited(TransientError):
    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class AuthFailure(GatewayError):
    pass


class RequestRejected(GatewayError):
    """Non-retryable client error (4xx other than auth/rate-limit) or malformed body."""


class EmptyResponse(GatewayError):
    pass


class LlmUnreachable(GatewayError):
    def __init__(self, message: str, last_error: BaseException | None = None):
        super().__init__(message)
        self.last_error = last_error


# -- orchestrator ------------------------------------------------------------

class IoFailure(MorphError, OSError):
    pass


class ConfigMismatch(MorphError):
    pass


class CorruptCheckpoint(MorphError):
    pass
