"""Exception hierarchy.

Everything raised deliberately by the library derives from ``SplatError`` so
callers (the CLI in particular) can separate input problems from bugs.
"""


class SplatError(Exception):
    """Base class for all library errors."""


class NonFiniteError(SplatError, ValueError):
    pass


class DegenerateError(SplatError, ValueError):
    """A covariance has a non-positive eigenvalue where one is required."""


class SingularCovarianceError(DegenerateError):
    pass


class DegenerateDepthError(SplatError, ValueError):
    pass


class EmptyCloudError(SplatError, ValueError):
    pass


class MissingTrainingCamerasError(SplatError, ValueError):
    pass


class UnsortedInputError(SplatError, ValueError):
    pass


class DimensionMismatchError(SplatError, ValueError):
    pass


class TooSmallError(SplatError, ValueError):
    pass


class IoFailure(SplatError, OSError):
    pass


class PlyError(SplatError, ValueError):
    """Base for checkpoint parsing failures."""


class MalformedHeader(PlyError):
    pass


class MissingProperty(PlyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"missing vertex property {self.name!r}"


class TruncatedPayload(PlyError):
    pass


class ManifestError(SplatError, ValueError):
    pass
