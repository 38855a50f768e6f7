"""Exception hierarchy shared by all modules."""


class ProjGreedyError(Exception):
    """Base class for library errors."""


class DimensionMismatch(ProjGreedyError, ValueError):
    pass


class NumericalFailure(ProjGreedyError, RuntimeError):
    """The cone solver did not reach a KKT point within its iteration cap."""


class UnsupportedSet(ProjGreedyError, TypeError):
    pass


class InvalidSet(ProjGreedyError, ValueError):
    """A set description violates its construction invariants."""


class InvalidDictionary(ProjGreedyError, ValueError):
    pass


class UnsupportedDictionary(ProjGreedyError, TypeError):
    pass


class IntersectionNotTrivial(ProjGreedyError, ValueError):
    pass


class InvalidCustom(ProjGreedyError, ValueError):
    """A custom index list repeats an index or misses one."""


class InstanceInvalid(ProjGreedyError, ValueError):
    pass


class PreconditionViolated(ProjGreedyError, ValueError):
    pass


class InsufficientIterates(ProjGreedyError, ValueError):
    pass


class NotInterleaved(ProjGreedyError, ValueError):
    pass


class SegmentIndexOutside(ProjGreedyError, ValueError):
    pass


class NotApplicable(ProjGreedyError, ValueError):
    pass


class RetryExhausted(ProjGreedyError, RuntimeError):
    pass


class BudgetExceeded(ProjGreedyError, ValueError):
    pass
