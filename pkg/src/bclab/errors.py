"""Exception hierarchy shared by all bclab modules."""


class BclabError(Exception):
    """Base class for every error raised by bclab."""


class InvalidParameter(BclabError, ValueError):
    pass


class InvalidCurve(BclabError, ValueError):
    pass


class PointInSet(BclabError, ValueError):
    """A query point that must lie off a region lies inside it."""


class EmptyRegion(BclabError, ValueError):
    pass


class UnsupportedOperation(BclabError, NotImplementedError):
    pass


class InvalidPath(BclabError, ValueError):
    pass


class DegenerateTube(BclabError, ValueError):
    pass


class FixedPointOnPath(BclabError, ValueError):
    pass


class ResolutionTooCoarse(BclabError, ValueError):
    pass


class IndeterminateLoop(BclabError, ValueError):
    """g(x) - x comes too close to zero on the loop to certify a winding number."""


class IncompleteCertification(BclabError, RuntimeError):
    """The subdivision budget ran out; ``result`` holds the partial answer."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class CannotPuncture(BclabError, ValueError):
    pass


class NoDisjointLift(BclabError, ValueError):
    pass


class PreconditionFailed(BclabError, ValueError):
    pass


class ConfigError(BclabError, ValueError):
    pass
