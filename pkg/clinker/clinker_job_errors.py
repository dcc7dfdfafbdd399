"""Exception hierarchy shared by the library and the command line jobs.

Every error carries the process exit code the ``clinker`` command reports
for it.
"""


class ClinkerError(Exception):
    """Base class of every error raised on purpose by the package."""

    exit_code = 1


class ConfigError(ClinkerError):
    """Invalid run configuration: unknown key, unparsable or out-of-range value."""

    exit_code = 2


class ParameterError(ClinkerError, ValueError):
    """An operation was called with arguments outside its preconditions."""

    exit_code = 2


class DataError(ClinkerError):
    """Input data that cannot be used: unreadable, malformed or inconsistent."""

    exit_code = 3


class ImageLoadError(DataError):
    pass


class AnnotationError(DataError):
    pass


class WindowSamplingError(DataError):
    pass


class CrossingConstraintsError(DataError):
    pass


class NumericError(ClinkerError):
    """A numeric procedure hit its iteration cap."""

    exit_code = 4


class MeshRefinementError(NumericError):
    pass
