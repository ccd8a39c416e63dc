"""Criterion functions for multiplicative regression.

Implements the product relative-error criterion (smooth, strictly
convex) with exact gradient and Hessian, the additive relative-error
criterion, a pluggable general relative-error family g(a, b), and the
log-scale least-squares / least-absolute-deviation criteria used as
competitors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import Dataset, check_beta
from .errors import NumericOverflowError

# exp() overflows near 709.8; clamp a bit below and treat anything past
# the clamp as a hard overflow in reported values.
EXP_BOUND = 700.0


def linear_predictor(beta: np.ndarray, data: Dataset) -> np.ndarray:
    """x @ beta with an explicit overflow check on the exponent."""
    beta = check_beta(beta, data)
    eta = data.x @ beta
    if np.any(np.abs(eta) > EXP_BOUND):
        raise NumericOverflowError(
            "linear predictor exceeds exp() range (|x'beta| > 700)"
        )
    return eta


def _relative_errors(beta, data):
    """The two relative-error magnitudes (|y-yhat|/y, |y-yhat|/yhat)."""
    eta = linear_predictor(beta, data)
    yhat = np.exp(eta)
    resid = data.y - yhat
    return np.abs(resid) / data.y, np.abs(resid) / yhat


def lpre_loss(beta: np.ndarray, data: Dataset) -> float:
    """Product relative-error criterion.

    Equals sum_i { y_i e^{-x_i'b} + y_i^{-1} e^{x_i'b} - 2 }, which is
    identical to the product of the two relative errors summed over i.
    Zero iff the fit is exact.
    """
    eta = linear_predictor(beta, data)
    return float(np.sum(data.y * np.exp(-eta) + np.exp(eta) / data.y - 2.0))


def lpre_gradient(beta: np.ndarray, data: Dataset) -> np.ndarray:
    """Exact gradient of ``lpre_loss`` with respect to beta."""
    eta = linear_predictor(beta, data)
    w = -data.y * np.exp(-eta) + np.exp(eta) / data.y
    return data.x.T @ w


def lpre_hessian(beta: np.ndarray, data: Dataset) -> np.ndarray:
    """Exact Hessian of ``lpre_loss``; positive definite for full-rank designs."""
    eta = linear_predictor(beta, data)
    w = data.y * np.exp(-eta) + np.exp(eta) / data.y
    return (data.x * w[:, None]).T @ data.x


def lare_loss(beta: np.ndarray, data: Dataset) -> float:
    """Additive relative-error criterion (sum of the two relative errors)."""
    a, b = _relative_errors(beta, data)
    return float(np.sum(a + b))


@dataclass(frozen=True)
class GreCriterion:
    """A bivariate loss g(a, b) applied to the two relative errors.

    ``loss`` must be vectorized, nonnegative with g(0, 0) = 0, and
    nondecreasing in each argument.  ``smooth`` marks criteria that are
    twice differentiable in beta (true for the product loss only).
    """

    name: str
    loss: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    smooth: bool = False


PRODUCT = GreCriterion("product", lambda a, b: a * b, smooth=True)
SUM = GreCriterion("sum", lambda a, b: a + b)
MAX = GreCriterion("max", np.maximum)
# shifted so the loss vanishes on an exact fit
ASYMMETRIC = GreCriterion("asymmetric", lambda a, b: a + np.exp(b) - 1.0)

CRITERIA = {c.name: c for c in (PRODUCT, SUM, MAX, ASYMMETRIC)}


def gre_loss(criterion: GreCriterion, beta: np.ndarray, data: Dataset) -> float:
    """General relative-error criterion sum_i g(a_i, b_i)."""
    a, b = _relative_errors(beta, data)
    # exp(b) may overflow to inf for wildly wrong fits; inf is the right answer
    with np.errstate(over="ignore"):
        return float(np.sum(criterion.loss(a, b)))


def ls_log_loss(beta: np.ndarray, data: Dataset) -> float:
    """Sum of squared residuals of log y on x'beta."""
    beta = check_beta(beta, data)
    r = np.log(data.y) - data.x @ beta
    return float(r @ r)


def lad_log_loss(beta: np.ndarray, data: Dataset) -> float:
    """Sum of absolute residuals of log y on x'beta."""
    beta = check_beta(beta, data)
    r = np.log(data.y) - data.x @ beta
    return float(np.sum(np.abs(r)))


def loss_terms(criterion: GreCriterion, beta: np.ndarray, data: Dataset) -> np.ndarray:
    """Per-observation loss values g(a_i, b_i); used by weighted resampling."""
    a, b = _relative_errors(beta, data)
    with np.errstate(over="ignore"):
        return np.asarray(criterion.loss(a, b), dtype=float)
