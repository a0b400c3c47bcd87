"""Exception and warning types raised across the package."""


class DichotomyError(Exception):
    """Base class for all solver errors."""


class ZeroPivot(DichotomyError, ZeroDivisionError):
    """Forward elimination met a pivot below the configured floor."""

    def __init__(self, index, pivot=0.0):
        self.index = index
        self.pivot = pivot
        super().__init__(f"pivot {pivot!r} below floor at row {index}")


class Singular(DichotomyError, ArithmeticError):
    """Matrix (or a sub-block of it) is numerically singular."""

    def __init__(self, index=None, detail=""):
        self.index = index
        msg = "singular system"
        if index is not None:
            msg += f" at {index}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class Overflow(DichotomyError, OverflowError):
    pass


class DomainError(DichotomyError, ValueError):
    pass


class TooManyRanks(DichotomyError, ValueError):
    pass


class NoSolution(DichotomyError, ArithmeticError):
    pass


class DegenerateRoots(DichotomyError, ArithmeticError):
    pass


class NearEigenvalue(DichotomyError, ArithmeticError):
    def __init__(self, k, distance):
        self.k = k
        self.distance = distance
        super().__init__(f"argument within {distance:.3e} of eigenvalue index k={k}")


class NonFiniteRatio(DichotomyError, ArithmeticError):
    pass


class FabricError(DichotomyError):
    pass


class MismatchedWidth(FabricError, ValueError):
    pass


class Deadlock(FabricError, RuntimeError):
    pass


class UnknownRank(FabricError, ValueError):
    pass


class GammaGuardWarning(RuntimeWarning):
    """A-priori error bound exceeded the configured accuracy budget."""
