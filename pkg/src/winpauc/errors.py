"""Exception types raised across the package. All derive from ValueError."""


class EmptyWindowError(ValueError):
    pass


class TieViolationError(ValueError):
    pass


class MultiplePositivesError(ValueError):
    pass


class NoPositiveError(ValueError):
    pass


class InvalidKError(ValueError):
    pass


class InfeasibleMassError(ValueError):
    pass


class NoValidThresholdError(ValueError):
    pass


class ShapeMismatchError(ValueError):
    pass


class DegenerateGroupError(ValueError):
    pass


class InvalidPrefixError(ValueError):
    pass


class ZeroMassError(ValueError):
    pass


class NoCompletionError(ValueError):
    pass


class UnknownItemError(KeyError, ValueError):
    pass
