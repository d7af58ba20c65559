"""Exception hierarchy. The CLI maps these onto exit codes."""


class LeakforgeError(Exception):
    pass


class ConfigurationError(LeakforgeError):
    """Bad input paths, parameters or configuration (fatal)."""


class DataError(LeakforgeError):
    """Input data violates a contract, e.g. duplicate ids."""


class DegenerateSampleError(LeakforgeError):
    """A statistical test is undefined for the given sample."""


class GenerationError(LeakforgeError):
    def __init__(self, message: str, retryable: bool = True, status: int | None = None):
        super().__init__(message)
        self.retryable = retryable
        self.status = status


class PartialRunError(LeakforgeError):
    """Some experiment arms failed; the partial report is attached."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report
