class SpreadPercError(Exception):
    pass


class InvalidConfigError(SpreadPercError, ValueError):
    pass


class InvalidArgumentError(SpreadPercError, ValueError):
    pass


class NotNormalizedError(SpreadPercError, ValueError):
    pass


class UndefinedStatisticError(SpreadPercError, ValueError):
    pass


class ConvergenceError(SpreadPercError, RuntimeError):
    """Iteration budget exhausted; ``last`` carries the final iterate."""

    def __init__(self, message, last=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class BracketError(SpreadPercError, RuntimeError):
    """The monotone statistic does not cross its target inside the bracket."""

    def __init__(self, message, lo=None, hi=None, stat_lo=None, stat_hi=None):
        super().__init__(message)
        self.lo, self.hi = lo, hi
        self.stat_lo, self.stat_hi = stat_lo, stat_hi
