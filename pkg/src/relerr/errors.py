"""Exception hierarchy shared across the package."""


class RelerrError(Exception):
    """Base class for package-specific failures."""


class NumericOverflowError(RelerrError):
    """A linear predictor left the representable range of exp()."""


class SingularDesignError(RelerrError):
    """The design matrix has rank < p, so the fit is not identified."""


class ConvergenceError(RelerrError):
    """An iterative solver hit its iteration cap before converging.

    The best iterate found so far is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ResamplingError(RelerrError):
    """Too many resample fits failed for the covariance to be trusted."""
