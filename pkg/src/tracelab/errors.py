"""Exception types shared across the library."""


class TraceLabError(Exception):
    """Base class for all tracelab errors."""


class DuplicateLabel(TraceLabError):
    pass


class NonpositiveWeight(TraceLabError):
    pass


class BothEndpointsCemetery(TraceLabError):
    pass


class CemeteryInStandardGraph(TraceLabError):
    pass


class EmptyDisclosure(TraceLabError):
    pass


class SizeLimitExceeded(TraceLabError):
    pass


class IsolatedVertex(TraceLabError):
    pass


class EmptyTarget(TraceLabError):
    pass


class FullTarget(TraceLabError):
    pass


class TargetMismatch(TraceLabError):
    pass


class BadTimeOrder(TraceLabError):
    pass


class HorizonTooShort(TraceLabError):
    pass


class OddDegreeSum(TraceLabError):
    pass


class ZeroMean(TraceLabError):
    pass


class NonConvergence(TraceLabError):
    pass


class TruncationZero(TraceLabError):
    pass


class BoundaryEmpty(TraceLabError):
    pass


class StackExhausted(TraceLabError):
    pass


class TruncationTooShallow(TraceLabError):
    pass


class ClassExplosion(TraceLabError):
    pass


class AcceptanceTooLow(TraceLabError):
    pass


class ConfigInvalid(TraceLabError):
    pass


class BadExponent(TraceLabError):
    pass
