"""Exception hierarchy shared by the CLI and the HTTP routes."""

from typing import Any, Dict


class ToolkitError(Exception):
    """Base error carrying a machine-readable code and exit/HTTP status."""

    code = 'toolkit_error'
    exit_code = 2
    http_status = 400

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        payload = {'code': self.code, 'message': self.message}
        payload.update(self.details)
        return payload


class UsageError(ToolkitError):
    code = 'usage_error'
    exit_code = 1


class ConfigError(ToolkitError):
    code = 'config_error'
    exit_code = 1


class InvalidBoxError(ToolkitError):
    code = 'invalid_box'


class SchemaError(ToolkitError):
    code = 'schema_error'

    def __init__(self, message: str, path: str = '$', **details: Any):
        super().__init__(f'{path}: {message}', path=path, **details)


class DanglingReferenceError(ToolkitError):
    code = 'dangling_reference'


class ScoreRangeError(SchemaError):
    code = 'score_out_of_range'


class IdMismatchError(ToolkitError):
    code = 'id_mismatch'


class CovarianceError(ToolkitError):
    code = 'invalid_covariance'


class EmptyInputError(ToolkitError):
    code = 'empty_input'


class InstanceError(ToolkitError):
    """Wraps a failure raised while processing one annotation."""

    code = 'instance_error'

    def __init__(self, instance_id: int, cause: ToolkitError):
        super().__init__(f'instance {instance_id}: {cause.message}',
                         instance_id=instance_id, cause=cause.code)
        self.cause = cause


def error_payload(error: Exception) -> Dict[str, Any]:
    """Render any exception as a ``{'code', 'message'}`` dict."""
    if isinstance(error, ToolkitError):
        return error.to_dict()
    return {'code': 'internal_error', 'message': str(error)}
