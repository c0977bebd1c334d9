"""
Exceptions raised by the solver.

Every error carries the exit code the command-line runner uses for it and can be
rendered as a machine-readable record for the error stream.
"""


class CertMenuError(Exception):
    exit_code = 1

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self):
        record = {"error": type(self).__name__, "code": self.exit_code, "message": self.message}
        for key, value in self.details.items():
            record[key] = _plain(value)
        return record


class DomainError(CertMenuError, ValueError):
    pass


class ValidationError(CertMenuError, ValueError):
    def __init__(self, message, report=None, **details):
        super().__init__(message, **details)
        self.report = report

    def to_dict(self):
        record = super().to_dict()
        if self.report is not None:
            record["report"] = self.report.to_dict()
        return record


class EvaluationError(CertMenuError, ValueError):
    pass


class ReductionError(ValidationError):
    pass


class PreconditionError(CertMenuError, ValueError):
    pass


class ResourceError(CertMenuError, RuntimeError):
    exit_code = 2


class NumericError(CertMenuError, RuntimeError):
    exit_code = 3

    def __init__(self, message, estimate=None, **details):
        super().__init__(message, estimate=estimate, **details)
        self.estimate = estimate


class ConsistencyError(CertMenuError, RuntimeError):
    exit_code = 3


class EquilibriumError(ConsistencyError):
    pass


def _plain(value):
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return repr(value)
