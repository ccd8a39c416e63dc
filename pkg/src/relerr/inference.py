"""Inference for relative-error fits.

Plug-in sandwich covariance for the smooth product criterion, Wald-style
p-values, the criterion-difference test with its chi-squared scale, and
random-weighting resampling for estimators whose asymptotic variance
would otherwise require density estimation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.stats import chi2, norm

from . import criteria, solver
from .criteria import GreCriterion
from .data import Dataset
from .errors import ConvergenceError, RelerrError, ResamplingError, SingularDesignError
from .solver import FitResult, LinearHypothesis, SolverOptions


@dataclass(frozen=True)
class CovarianceEstimate:
    """Estimated covariance of beta-hat (already divided by n)."""

    cov: np.ndarray
    method: str  # "plugin_sandwich" or "random_weighting"
    d_hat: Optional[np.ndarray] = None
    v_hat: Optional[np.ndarray] = None
    n_skipped: int = 0

    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: int
    scale: float
    p_value: float


def sandwich_covariance(fit: FitResult, data: Dataset) -> CovarianceEstimate:
    """Plug-in sandwich covariance D^{-1} V D^{-1} / n at the fitted point.

    D is the average Hessian weight matrix and V the average squared-score
    matrix; both use the sample analogue evaluated at beta-hat.
    """
    eta = data.x @ fit.beta
    t = data.y * np.exp(-eta)      # eps-hat
    u = np.exp(eta) / data.y       # 1 / eps-hat
    n = data.n
    d_hat = (data.x * (t + u)[:, None]).T @ data.x / n
    v_hat = (data.x * ((t - u) ** 2)[:, None]).T @ data.x / n
    try:
        d_inv = scipy.linalg.inv(d_hat)
    except scipy.linalg.LinAlgError as exc:
        raise SingularDesignError("plug-in D matrix is singular") from exc
    cov = d_inv @ v_hat @ d_inv / n
    cov = (cov + cov.T) / 2.0
    return CovarianceEstimate(cov=cov, method="plugin_sandwich",
                              d_hat=d_hat, v_hat=v_hat)


def ols_log_covariance(fit: FitResult, data: Dataset) -> CovarianceEstimate:
    """Classical OLS covariance of the log-scale LS fit: s^2 (X'X)^{-1}."""
    r = np.log(data.y) - data.x @ fit.beta
    dof = max(data.n - data.p, 1)
    s2 = float(r @ r) / dof
    xtx_inv = scipy.linalg.inv(data.x.T @ data.x)
    return CovarianceEstimate(cov=s2 * xtx_inv, method="plugin_sandwich")


def wald_p_values(
    fit: FitResult,
    cov: CovarianceEstimate,
    two_sided: bool = False,
) -> np.ndarray:
    """Per-coefficient p-values 1 - Phi(|b_j / s_j|).

    The default one-Phi form is deliberate; pass two_sided=True for the
    conventional 2 * (1 - Phi(|z|)).  A zero standard error yields 0 for
    a nonzero coefficient and 0.5 (i.e. |z| = 0) otherwise.
    """
    se = cov.standard_errors()
    beta = np.asarray(fit.beta, dtype=float)
    z = np.empty_like(beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.abs(beta) / se
    z[(se == 0) & (beta != 0)] = np.inf
    z[(se == 0) & (beta == 0)] = 0.0
    p = norm.sf(z)
    return 2.0 * p if two_sided else p


def _khat(fit_beta: np.ndarray, data: Dataset) -> float:
    """Plug-in chi-squared scale sum((eps-hat - 1/eps-hat)^2) / (4 sum(eps-hat)).

    This is the scale K with M_n -> K * chi2(q) under the null.  At the
    product-efficient error density the criterion is the exact negative
    log-likelihood, so K must equal 1/2 there; this form does, and its
    reciprocal does not.
    """
    eta = data.x @ fit_beta
    t = data.y * np.exp(-eta)
    u = np.exp(eta) / data.y
    num = float(np.sum((t - u) ** 2))
    if num <= 0:
        raise RelerrError("chi-squared scale undefined: all residual ratios are 1")
    return num / (4.0 * float(np.sum(t)))


def lpre_anova_test(
    data: Dataset,
    hypothesis: LinearHypothesis,
    opts: Optional[SolverOptions] = None,
) -> TestResult:
    """Criterion-difference test of H0: H'beta = 0 under the product loss.

    The statistic is the constrained minus unconstrained minimum of the
    criterion; under H0 it is asymptotically K * chi2(q) with K estimated
    by its plug-in formula at the unconstrained fit.
    """
    opts = opts or SolverOptions()
    free = solver.fit_lpre(data, opts)
    constrained = solver.fit_constrained_lpre(data, hypothesis, opts)
    stat = max(constrained.criterion_value - free.criterion_value, 0.0)
    k_hat = _khat(free.beta, data)
    p_value = float(chi2.sf(stat / k_hat, hypothesis.q))
    return TestResult(statistic=stat, df=hypothesis.q, scale=k_hat, p_value=p_value)


_WEIGHTED_FITTERS = {
    "lpre": lambda data, opts, w: solver.fit_lpre(data, opts, weights=w),
    "lare": lambda data, opts, w: solver.fit_lare(data, opts, weights=w),
    "ls_log": lambda data, opts, w: solver.fit_ls_log(data, weights=w),
    "lad_log": lambda data, opts, w: solver.fit_lad_log(data, opts, weights=w),
}


def _resolve_fitter(estimator):
    if isinstance(estimator, GreCriterion):
        crit = estimator
        return lambda data, opts, w: solver.fit_gre(crit, data, opts, weights=w)
    try:
        return _WEIGHTED_FITTERS[estimator]
    except KeyError:
        raise ValueError(
            f"unknown estimator kind {estimator!r}; expected one of "
            f"{sorted(_WEIGHTED_FITTERS)} or a GreCriterion"
        ) from None


def random_weight_covariance(
    estimator,
    data: Dataset,
    n_resample: int = 500,
    rng: Optional[np.random.Generator] = None,
    opts: Optional[SolverOptions] = None,
) -> CovarianceEstimate:
    """Random-weighting covariance of an estimator.

    Re-minimizes the criterion n_resample times with i.i.d. standard
    exponential (unit mean, unit variance) per-observation weights and
    returns the empirical covariance of the re-estimates.  A failed
    resample fit is retried once with fresh weights, then skipped; more
    than 10% skips aborts.
    """
    if n_resample < 2:
        raise ValueError("need at least two resamples")
    rng = rng if rng is not None else np.random.default_rng()
    fitter = _resolve_fitter(estimator)
    opts = opts or SolverOptions()

    estimates = []
    skipped = 0
    for _ in range(n_resample):
        beta = None
        for _attempt in range(2):
            w = rng.standard_exponential(data.n)
            try:
                beta = fitter(data, opts, w).beta
                break
            except (ConvergenceError, SingularDesignError):
                continue
        if beta is None:
            skipped += 1
        else:
            estimates.append(beta)
    if skipped > 0.1 * n_resample:
        raise ResamplingError(
            f"{skipped}/{n_resample} resample fits failed; covariance unreliable"
        )
    stacked = np.array(estimates)
    cov = np.cov(stacked, rowvar=False)
    cov = np.atleast_2d(cov)
    return CovarianceEstimate(cov=cov, method="random_weighting", n_skipped=skipped)


def gre_anova_test(
    criterion: GreCriterion,
    data: Dataset,
    hypothesis: LinearHypothesis,
    n_resample: int = 500,
    rng: Optional[np.random.Generator] = None,
    opts: Optional[SolverOptions] = None,
) -> TestResult:
    """Criterion-difference test for a general relative-error loss.

    The null scale of the statistic is unknown in general, so the null
    distribution is calibrated by random weighting: each resample's
    constrained-vs-unconstrained difference, centered at the observed
    statistic and floored at 0, serves as a draw from the approximate
    null.  The p-value is the empirical upper-tail probability; the
    reported scale is the mean calibrated statistic divided by q.
    """
    rng = rng if rng is not None else np.random.default_rng()
    opts = opts or SolverOptions()

    def criterion_difference(weights):
        if criterion.name == "product":
            free = solver.fit_lpre(data, opts, weights=weights)
            constrained = solver.fit_constrained_lpre(
                data, hypothesis, opts, weights=weights)
        else:
            free = solver.fit_gre(criterion, data, opts, weights=weights)
            constrained = _fit_gre_constrained(
                criterion, data, hypothesis, opts, weights)
        return max(constrained.criterion_value - free.criterion_value, 0.0)

    observed = criterion_difference(None)
    null_draws = []
    skipped = 0
    for _ in range(n_resample):
        stat = None
        for _attempt in range(2):
            w = rng.standard_exponential(data.n)
            try:
                stat = criterion_difference(w)
                break
            except (ConvergenceError, SingularDesignError):
                continue
        if stat is None:
            skipped += 1
        else:
            null_draws.append(max(stat - observed, 0.0))
    if skipped > 0.1 * n_resample:
        raise ResamplingError(
            f"{skipped}/{n_resample} resample fits failed; calibration unreliable"
        )
    null_draws = np.asarray(null_draws)
    p_value = float((1 + np.sum(null_draws >= observed)) / (1 + null_draws.size))
    scale = float(np.mean(null_draws)) / hypothesis.q
    return TestResult(statistic=observed, df=hypothesis.q,
                      scale=scale, p_value=p_value)


def _fit_gre_constrained(criterion, data, hypothesis, opts, weights):
    """Nelder-Mead on the null-space parametrization of a GRE criterion."""
    import math

    import scipy.optimize

    if hypothesis.q == data.p:
        beta = np.zeros(data.p)
        val = criteria.gre_loss(criterion, beta, data) if weights is None else float(
            np.sum(weights * criteria.loss_terms(criterion, beta, data)))
        return FitResult(beta, val, float("nan"), 0, True, criterion.name)
    basis = hypothesis.null_basis()
    xb = data.x @ basis

    def objective(gamma):
        eta = xb @ gamma
        if np.any(np.abs(eta) > criteria.EXP_BOUND):
            return math.inf
        yhat = np.exp(eta)
        resid = data.y - yhat
        terms = criterion.loss(np.abs(resid) / data.y, np.abs(resid) / yhat)
        if weights is not None:
            terms = terms * weights
        return float(np.sum(terms))

    # start from the projection of the log-scale LS fit onto the null space
    start = basis.T @ solver.fit_ls_log(data, weights).beta
    best = None
    for gamma0 in (start, np.zeros(basis.shape[1])):
        res = scipy.optimize.minimize(
            objective, gamma0, method="Nelder-Mead",
            options={"maxiter": opts.max_iterations_nonsmooth,
                     "xatol": 1e-9, "fatol": 1e-12},
        )
        if best is None or res.fun < best.fun:
            best = res
    return FitResult(basis @ best.x, float(best.fun), float("nan"),
                     int(best.nit), bool(best.success), criterion.name)
