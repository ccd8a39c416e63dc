"""Solvers for the relative-error criteria.

Damped Newton with backtracking for the smooth product criterion,
closed-form normal equations for log-scale least squares, smoothed IRLS
for log-scale LAD, and restarted Nelder-Mead for the nonsmooth general
criteria.  Constrained fits reparametrize onto an orthonormal basis of
the hypothesis null space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from . import criteria
from .data import Dataset, check_beta
from .errors import ConvergenceError, NumericOverflowError, SingularDesignError

ARMIJO_C = 1e-4
IRLS_SMOOTHING = 1e-8


@dataclass(frozen=True)
class SolverOptions:
    tol_gradient: float = 1e-10
    max_iterations: int = 100
    max_iterations_nonsmooth: int = 5000
    initial_beta: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.tol_gradient <= 0:
            raise ValueError("tol_gradient must be positive")
        if self.max_iterations < 1 or self.max_iterations_nonsmooth < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray
    criterion_value: float
    gradient_norm: float
    iterations: int
    converged: bool
    criterion: str


@dataclass(frozen=True)
class LinearHypothesis:
    """Constraint set {b : H'b = 0} with H of shape p-by-q, full column rank."""

    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.ndim == 1:
            h = h[:, None]
        if h.ndim != 2:
            raise ValueError("H must be a matrix")
        object.__setattr__(self, "h", h)
        p, q = h.shape
        if q > p:
            raise ValueError("more constraints than parameters")
        if np.linalg.matrix_rank(h) < q:
            raise ValueError("constraint vectors must be linearly independent")

    @property
    def q(self) -> int:
        return self.h.shape[1]

    @property
    def p(self) -> int:
        return self.h.shape[0]

    def null_basis(self) -> np.ndarray:
        """Orthonormal basis B (p-by-(p-q)) of {b : H'b = 0}."""
        return scipy.linalg.null_space(self.h.T)

    @classmethod
    def zero_coefs(cls, indices, p: int) -> "LinearHypothesis":
        """Hypothesis that the listed coefficients are jointly zero."""
        idx = sorted(set(int(i) for i in indices))
        if any(i < 0 or i >= p for i in idx):
            raise ValueError(f"coefficient indices must lie in [0, {p})")
        h = np.zeros((p, len(idx)))
        for j, i in enumerate(idx):
            h[i, j] = 1.0
        return cls(h)


@dataclass(frozen=True)
class DesignReport:
    rank: int
    p: int
    smallest_singular_value: float
    singular: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "singular", self.rank < self.p)


def check_design(data: Dataset) -> DesignReport:
    """Rank report for the design matrix (via SVD)."""
    sv = np.linalg.svd(data.x, compute_uv=False)
    tol = sv[0] * max(data.n, data.p) * np.finfo(float).eps
    rank = int(np.sum(sv > tol))
    return DesignReport(rank=rank, p=data.p, smallest_singular_value=float(sv[-1]))


def _require_full_rank(data: Dataset):
    report = check_design(data)
    if report.singular:
        raise SingularDesignError(
            f"design matrix has rank {report.rank} < p = {report.p}"
        )


def fit_ls_log(data: Dataset, weights: Optional[np.ndarray] = None) -> FitResult:
    """Least squares of log y on x, solved exactly by the normal equations."""
    _require_full_rank(data)
    logy = np.log(data.y)
    if weights is None:
        beta, *_ = np.linalg.lstsq(data.x, logy, rcond=None)
    else:
        sw = np.sqrt(weights)
        beta, *_ = np.linalg.lstsq(data.x * sw[:, None], logy * sw, rcond=None)
    r = logy - data.x @ beta
    w = weights if weights is not None else 1.0
    return FitResult(
        beta=beta,
        criterion_value=float(np.sum(w * r * r)),
        gradient_norm=0.0,
        iterations=1,
        converged=True,
        criterion="ls_log",
    )


def _lpre_parts(beta, x, y, weights):
    eta = x @ beta
    if np.any(np.abs(eta) > criteria.EXP_BOUND):
        return None
    t = y * np.exp(-eta)
    u = np.exp(eta) / y
    w = weights if weights is not None else 1.0
    loss = float(np.sum(w * (t + u - 2.0)))
    grad = x.T @ (w * (u - t))
    hess_w = w * (t + u)
    return loss, grad, hess_w


def _lpre_loss_or_inf(beta, x, y, weights):
    eta = x @ beta
    if np.any(np.abs(eta) > criteria.EXP_BOUND):
        return math.inf
    w = weights if weights is not None else 1.0
    return float(np.sum(w * (y * np.exp(-eta) + np.exp(eta) / y - 2.0)))


def _newton_lpre(x, y, start, weights, opts):
    """Damped Newton on the product criterion over an arbitrary design.

    Returns (beta, loss, gradient_norm, iterations, converged); the line
    search treats exp() overflow as an infinite objective, so divergent
    steps are simply halved away.
    """
    beta = np.asarray(start, dtype=float).copy()
    parts = _lpre_parts(beta, x, y, weights)
    if parts is None:
        raise NumericOverflowError("starting point overflows exp()")
    loss, grad, hess_w = parts
    for it in range(1, opts.max_iterations + 1):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= opts.tol_gradient:
            return beta, loss, gnorm, it - 1, True
        hess = (x * hess_w[:, None]).T @ x
        try:
            step = scipy.linalg.solve(hess, -grad, assume_a="pos")
        except scipy.linalg.LinAlgError as exc:
            raise SingularDesignError("Hessian factorization failed") from exc
        slope = float(grad @ step)
        accepted = False
        if abs(slope) <= 1e-10 * (1.0 + abs(loss)):
            # predicted decrease is below loss rounding noise; the Armijo
            # test is meaningless here, so take the pure Newton step
            cand = beta + step
            if math.isfinite(_lpre_loss_or_inf(cand, x, y, weights)):
                accepted = True
        else:
            t = 1.0
            for _ in range(80):
                cand = beta + t * step
                cand_loss = _lpre_loss_or_inf(cand, x, y, weights)
                if cand_loss <= loss + ARMIJO_C * t * slope:
                    accepted = True
                    break
                t *= 0.5
        if not accepted:
            return beta, loss, gnorm, it, False
        beta = cand
        loss, grad, hess_w = _lpre_parts(beta, x, y, weights)
    return beta, loss, float(np.linalg.norm(grad)), opts.max_iterations, False


def fit_lpre(
    data: Dataset,
    opts: Optional[SolverOptions] = None,
    weights: Optional[np.ndarray] = None,
) -> FitResult:
    """Minimize the product relative-error criterion by damped Newton.

    The criterion is smooth and strictly convex for full-rank designs, so
    the returned point is the unique global minimizer regardless of the
    starting point.  Raises ConvergenceError (with the best iterate
    attached) if the iteration cap is hit.
    """
    opts = opts or SolverOptions()
    _require_full_rank(data)
    if opts.initial_beta is not None:
        start = check_beta(opts.initial_beta, data)
    else:
        start = fit_ls_log(data, weights).beta
    if not np.isfinite(_lpre_loss_or_inf(start, data.x, data.y, weights)):
        start = np.zeros(data.p)

    beta, loss, gnorm, it, ok = _newton_lpre(data.x, data.y, start, weights, opts)
    result = FitResult(beta, loss, gnorm, it, ok, "lpre")
    if not ok:
        raise ConvergenceError(
            f"Newton did not converge in {opts.max_iterations} iterations", result
        )
    return result


def fit_constrained_lpre(
    data: Dataset,
    hypothesis: LinearHypothesis,
    opts: Optional[SolverOptions] = None,
    weights: Optional[np.ndarray] = None,
) -> FitResult:
    """Minimize the product criterion over {b : H'b = 0}.

    Reparametrizes beta = B @ gamma with B an orthonormal null-space
    basis and runs Newton in gamma.  With q = p the null space is {0}
    and beta = 0 is returned directly.
    """
    opts = opts or SolverOptions()
    if hypothesis.p != data.p:
        raise ValueError("hypothesis dimension does not match the design")
    _require_full_rank(data)
    if hypothesis.q == data.p:
        beta = np.zeros(data.p)
        loss = _lpre_loss_or_inf(beta, data.x, data.y, weights)
        return FitResult(beta, loss, float("nan"), 0, True, "lpre")

    basis = hypothesis.null_basis()
    xb = data.x @ basis
    gamma0 = np.zeros(basis.shape[1])
    gamma, loss, gnorm, it, ok = _newton_lpre(xb, data.y, gamma0, weights, opts)
    result = FitResult(basis @ gamma, loss, gnorm, it, ok, "lpre")
    if not ok:
        raise ConvergenceError(
            f"constrained Newton did not converge in {opts.max_iterations} iterations",
            result,
        )
    return result


def fit_lad_log(
    data: Dataset,
    opts: Optional[SolverOptions] = None,
    weights: Optional[np.ndarray] = None,
) -> FitResult:
    """Least absolute deviations of log y on x via smoothed IRLS.

    Minimizes sum_i sqrt(r_i^2 + eps^2) with eps = 1e-8, which matches
    the LAD objective to within n*eps; iterated to stationarity.
    """
    opts = opts or SolverOptions()
    _require_full_rank(data)
    logy = np.log(data.y)
    beta = fit_ls_log(data, weights).beta.copy()
    base_w = weights if weights is not None else np.ones(data.n)
    converged = False
    it = 0
    for it in range(1, opts.max_iterations_nonsmooth + 1):
        r = logy - data.x @ beta
        w = base_w / np.sqrt(r * r + IRLS_SMOOTHING**2)
        sw = np.sqrt(w)
        new_beta, *_ = np.linalg.lstsq(data.x * sw[:, None], logy * sw, rcond=None)
        delta = float(np.max(np.abs(new_beta - beta)))
        beta = new_beta
        if delta < 1e-12:
            converged = True
            break
    r = logy - data.x @ beta
    return FitResult(
        beta=beta,
        criterion_value=float(np.sum(base_w * np.abs(r))),
        gradient_norm=float("nan"),
        iterations=it,
        converged=converged,
        criterion="lad_log",
    )


def fit_gre(
    criterion: criteria.GreCriterion,
    data: Dataset,
    opts: Optional[SolverOptions] = None,
    weights: Optional[np.ndarray] = None,
) -> FitResult:
    """Minimize a general relative-error criterion.

    The product loss is dispatched to the Newton solver.  Other losses
    may be nonsmooth or nonconvex, so we run Nelder-Mead restarted from
    the log-scale LS fit and from the product-criterion fit and keep the
    better endpoint.
    """
    opts = opts or SolverOptions()
    if criterion.name == "product":
        return fit_lpre(data, opts, weights)
    _require_full_rank(data)

    # center log responses so the fit is exactly equivariant under
    # response rescaling (only the recovered intercept depends on scale)
    shift = float(np.mean(np.log(data.y)))
    y_centered = data.y * math.exp(-shift)
    x = data.x

    def objective(beta):
        eta = x @ beta
        if np.any(np.abs(eta) > criteria.EXP_BOUND):
            return math.inf
        yhat = np.exp(eta)
        resid = y_centered - yhat
        terms = criterion.loss(np.abs(resid) / y_centered, np.abs(resid) / yhat)
        if weights is not None:
            terms = terms * weights
        return float(np.sum(terms))

    centered = Dataset(x, y_centered)
    starts = [fit_ls_log(centered, weights).beta]
    if opts.initial_beta is not None:
        start = check_beta(opts.initial_beta, data).copy()
        start[0] -= shift
        starts.insert(0, start)
    try:
        starts.append(fit_lpre(centered, weights=weights).beta)
    except ConvergenceError as exc:  # keep the best iterate as a start
        if exc.result is not None:
            starts.append(exc.result.beta)

    best = None
    for start in starts:
        res = scipy.optimize.minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={
                "maxiter": opts.max_iterations_nonsmooth,
                "xatol": 1e-11,
                "fatol": 1e-14,
            },
        )
        if best is None or res.fun < best.fun:
            best = res
    beta = np.asarray(best.x, dtype=float).copy()
    beta[0] += shift
    return FitResult(
        beta=beta,
        criterion_value=float(best.fun),
        gradient_norm=float("nan"),
        iterations=int(best.nit),
        converged=bool(best.success),
        criterion=criterion.name,
    )


def fit_lare(
    data: Dataset,
    opts: Optional[SolverOptions] = None,
    weights: Optional[np.ndarray] = None,
) -> FitResult:
    """Minimize the additive relative-error criterion."""
    result = fit_gre(criteria.SUM, data, opts, weights)
    return FitResult(
        beta=result.beta,
        criterion_value=result.criterion_value,
        gradient_norm=result.gradient_norm,
        iterations=result.iterations,
        converged=result.converged,
        criterion="lare",
    )
