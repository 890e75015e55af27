"""Exception hierarchy shared by all modules."""


class CosetError(Exception):
    """Base class for every error raised by the package."""


class NotPositiveDefinite(CosetError):
    pass


class AmbientMismatch(CosetError):
    pass


class NonCommuting(CosetError):
    pass


class NotInGroup(CosetError):
    pass


class NotInvariant(CosetError):
    pass


class InternalInconsistency(CosetError):
    """Two independent computations of the same object disagree."""


class MaxItersExceeded(CosetError):
    def __init__(self, msg, trace=None, point=None):
        super().__init__(msg)
        self.trace = trace
        self.point = point


class IllConditioned(CosetError):
    pass


class ExtensionStalled(CosetError):
    pass


class AlreadyClosed(CosetError):
    pass


class NotReduced(CosetError):
    def __init__(self, msg, best=None, restarts=0):
        super().__init__(msg)
        self.best = best
        self.restarts = restarts


class NotInZeroFiber(CosetError):
    pass


class LatticeTooCoarse(CosetError):
    pass


class BudgetExhausted(CosetError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class Inconclusive(CosetError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class ScenarioError(CosetError):
    """Scenario data could not be parsed or failed validation."""
