"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: ``ConvergenceFailure`` exits 3, any
other ``CloneSearchError`` exits 2.
"""


class CloneSearchError(Exception):
    """Base class for data and runtime errors raised by this package."""


class MalformedJson(CloneSearchError):
    pass


class SchemaViolation(CloneSearchError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class DanglingReference(CloneSearchError):
    def __init__(self, node_id: int, where: str = ""):
        self.node_id = node_id
        suffix = f" ({where})" if where else ""
        super().__init__(f"node id {node_id} is not in the call graph{suffix}")


class InvalidParameter(CloneSearchError, ValueError):
    pass


class ConvergenceFailure(CloneSearchError):
    pass


class DuplicateId(CloneSearchError):
    pass


class ModeMismatch(CloneSearchError):
    pass


class UnknownMetric(CloneSearchError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown metric"


class EmptyRepository(CloneSearchError):
    pass


class MissingProgram(CloneSearchError):
    pass


class DegenerateGroups(CloneSearchError, ValueError):
    pass
