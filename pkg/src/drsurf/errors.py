"""Exception hierarchy for drsurf."""


class DRSError(Exception):
    """Base class for every error raised by the library."""


# complex construction / cell algebra
class NonBipartite(DRSError):
    pass


class BadDual(DRSError):
    pass


class NonManifold(DRSError):
    pass


class GradeZero(DRSError):
    pass


class GradeTwo(DRSError):
    pass


class GradeOverflow(DRSError):
    pass


class CarrierDiamond(DRSError):
    """Raised when an operation that only exists on the double is asked for on the quad-graph."""


class HolonomyMismatch(DRSError):
    pass


# homology
class Disconnected(DRSError):
    pass


class DegeneratePairing(DRSError):
    pass


# periods
class SolverFail(DRSError):
    pass


class SingularC(DRSError):
    pass


class NotClosed(DRSError):
    pass


# critical maps
class BadTheta(DRSError):
    pass


class NotCritical(DRSError):
    pass


class OnSingularCircle(DRSError):
    pass


class NotSimplyConnected(DRSError):
    pass


class PassesThroughOrigin(DRSError):
    pass


# electrical moves
class NotALoopQuad(DRSError):
    pass


class BadConfiguration(DRSError):
    pass


class NotHolomorphic(DRSError):
    pass
