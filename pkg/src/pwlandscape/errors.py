"""Exception hierarchy.

Everything raised on purpose by the library derives from ``LandscapeError``.
``ConfigError`` maps to CLI exit code 2, every other subclass to exit code 1.
"""


class LandscapeError(Exception):
    exit_code = 1


class ConfigError(LandscapeError):
    exit_code = 2


class SingularBasis(LandscapeError):
    pass


class DimensionMismatch(LandscapeError):
    pass


class EmptyPotential(LandscapeError):
    pass


class ComplexResidue(LandscapeError):
    pass


class AmbiguousMatch(LandscapeError):
    pass


class ConjugateSymmetryError(LandscapeError):
    pass


class BasisTooLarge(LandscapeError):
    pass


class LatticeMismatch(LandscapeError):
    pass


class SizeMismatch(LandscapeError):
    pass


class NotConverged(LandscapeError):
    """Iterative solve stopped before reaching tolerance.

    The best iterate is attached as ``result`` so callers may still use it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class IndefiniteMatrix(LandscapeError):
    pass


class ConvergenceFailure(LandscapeError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class IncompleteSpectrum(LandscapeError):
    pass


class DegenerateFit(LandscapeError):
    pass
