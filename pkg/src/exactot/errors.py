"""Exception hierarchy shared by the solvers, generators and CLI."""


class ExactOTError(Exception):
    """Base class for all package errors."""


class InvalidInstance(ExactOTError):
    pass


class InvalidConfig(ExactOTError):
    pass


class InvalidInput(ExactOTError):
    pass


class OracleUnsupported(ExactOTError):
    pass


class InvalidBasis(ExactOTError):
    pass


class InvalidPivot(ExactOTError):
    pass


class SuccessionViolation(ExactOTError):
    """A warm-start basis is not contained in the working set."""


class ExactnessViolation(ExactOTError):
    """Exact methods disagree on the optimal scaled objective."""


class NeedFullScan(ExactOTError):
    """Screening exhausted the candidate groups without finding a negative arc.

    Not a failure: the caller is expected to run a full pricing pass.
    """
