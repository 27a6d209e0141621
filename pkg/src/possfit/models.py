"""Parametric model layer: datasets, model specifications, likelihood ops.

A :class:`ModelSpec` bundles the callables the contour machinery needs:
log-likelihood, sampler, maximum-likelihood estimator and observed
information.  Models may additionally carry two fast paths used by the
Monte Carlo contour engine:

``log_rel_lik(data, theta)``
    exact log relative likelihood of the observed data (shares the code
    path of the simulated values, so ties at the MLE are exact), and
``sim_log_rel_lik(theta, n, m, rng)``
    the log relative likelihoods of ``m`` datasets of size ``n`` simulated
    under ``theta``, computed in one vectorized sweep.  Without it the
    engine falls back to a per-dataset loop through ``sample``/``mle``.

Conventions: a parameter outside the domain makes ``log_lik`` return
``-inf`` (so the relative likelihood is 0 there); ``mle`` returns the
likelihood-supremum point even when it sits on the domain boundary, and
:func:`mle_and_information` is the operation that rejects boundary cases.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize, special

__all__ = [
    "Dataset",
    "ModelSpec",
    "DegenerateMLEError",
    "MLEConvergenceError",
    "SingularInformationError",
    "relative_likelihood",
    "log_relative_likelihood",
    "mle_and_information",
    "finite_difference_information",
    "soft_threshold",
    "binomial",
    "bvn_correlation",
    "logistic_regression",
    "multinomial",
    "poisson_loglinear",
    "gamma_shape_scale",
    "gamma_mean_shape",
    "normal_means",
    "normal_means_lasso",
    "lognormal",
    "lognormal_censored",
    "log_reparam",
    "read_dataset_csv",
]


class DegenerateMLEError(RuntimeError):
    """Maximum likelihood estimate on the boundary of the parameter domain."""


class MLEConvergenceError(RuntimeError):
    """Likelihood optimizer failed to converge."""


class SingularInformationError(RuntimeError):
    """Observed information numerically singular (condition number > 1e12)."""


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


@dataclass
class Dataset:
    """Observed data: responses, optional covariates, optional censor flags.

    ``responses`` is an (n,) vector, or an (n, 2) array for paired-response
    models.  ``censor`` entries are 1 for an exactly observed response and 0
    for a censored one.
    """

    responses: np.ndarray
    covariates: Optional[np.ndarray] = None
    censor: Optional[np.ndarray] = None

    def __post_init__(self):
        self.responses = np.asarray(self.responses)
        if self.responses.ndim not in (1, 2):
            raise ValueError("responses must be a vector or an (n, k) array")
        n = self.responses.shape[0]
        if self.covariates is not None:
            self.covariates = np.asarray(self.covariates, dtype=float)
            if self.covariates.ndim != 2 or self.covariates.shape[0] != n:
                raise ValueError("covariates must be an (n, p) matrix")
        if self.censor is not None:
            self.censor = np.asarray(self.censor)
            if self.censor.shape != (n,):
                raise ValueError("censor flags must have length n")
            if not np.isin(self.censor, (0, 1)).all():
                raise ValueError("censor flags must be 0 or 1")
            self.censor = self.censor.astype(int)

    @property
    def n(self) -> int:
        return self.responses.shape[0]


def read_dataset_csv(path, response, covariates=(), censor=None) -> Dataset:
    """Load a Dataset from a headered CSV file.

    ``response`` is a column name, or a sequence of names for paired
    responses; ``covariates`` an optional sequence of column names; ``censor``
    an optional 0/1 column name.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")

    def column(name):
        try:
            return np.array([float(r[name]) for r in rows])
        except KeyError:
            raise ValueError(f"{path}: missing column {name!r}") from None

    if isinstance(response, str):
        resp = column(response)
    else:
        resp = np.column_stack([column(c) for c in response])
    cov = np.column_stack([column(c) for c in covariates]) if covariates else None
    cen = column(censor).astype(int) if censor else None
    return Dataset(responses=resp, covariates=cov, censor=cen)


# ---------------------------------------------------------------------------
# model specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """A parametric model as the contour machinery sees it."""

    name: str
    dim: Optional[int]  # None: parameter dimension equals the sample size
    log_lik: Callable[[Dataset, np.ndarray], float]
    sample: Callable[[np.ndarray, int, np.random.Generator], Dataset]
    mle: Callable[[Dataset], np.ndarray]
    information: Callable[[Dataset], np.ndarray]
    boundary_mle: Optional[Callable[[Dataset], bool]] = None
    log_rel_lik: Optional[Callable[[Dataset, np.ndarray], float]] = None
    sim_log_rel_lik: Optional[
        Callable[[np.ndarray, int, int, np.random.Generator], np.ndarray]
    ] = None
    meta: dict = field(default_factory=dict)


def log_relative_likelihood(model: ModelSpec, data: Dataset, theta) -> float:
    """log of L(theta)/L(thetahat); -inf when theta is off the domain."""
    theta = np.asarray(theta, dtype=float).ravel()
    if model.log_rel_lik is not None:
        val = model.log_rel_lik(data, theta)
    else:
        ll = model.log_lik(data, theta)
        if not np.isfinite(ll):
            return -np.inf
        val = ll - model.log_lik(data, np.asarray(model.mle(data), dtype=float))
    if np.isnan(val):
        return -np.inf
    return min(float(val), 0.0)


def relative_likelihood(model: ModelSpec, data: Dataset, theta) -> float:
    return float(np.exp(log_relative_likelihood(model, data, theta)))


def mle_and_information(model: ModelSpec, data: Dataset):
    """(thetahat, observed information), rejecting degenerate cases."""
    if model.boundary_mle is not None and model.boundary_mle(data):
        raise DegenerateMLEError(
            f"{model.name}: maximum likelihood estimate on the domain boundary"
        )
    theta = np.asarray(model.mle(data), dtype=float)
    info = np.atleast_2d(np.asarray(model.information(data), dtype=float))
    info = 0.5 * (info + info.T)
    cond = np.linalg.cond(info)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularInformationError(
            f"{model.name}: observed information condition number {cond:.3g}"
        )
    return theta, info


def finite_difference_information(model: ModelSpec, data: Dataset, theta=None):
    """Observed information by central differences, h_i = 1e-5 (1+|theta_i|)."""
    if theta is None:
        theta = model.mle(data)
    theta = np.asarray(theta, dtype=float).ravel()
    return -_fd_hessian(lambda t: model.log_lik(data, t), theta)


def _fd_hessian(f, x):
    x = np.asarray(x, dtype=float)
    d = x.size
    h = 1e-5 * (1.0 + np.abs(x))
    H = np.empty((d, d))
    f0 = f(x)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h[j]
            val = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4.0 * h[i] * h[j])
            H[i, j] = H[j, i] = val
    return 0.5 * (H + H.T)


# ---------------------------------------------------------------------------
# generic optimizers
# ---------------------------------------------------------------------------


def _damped_newton(loglik, grad, hess, x0, max_iter=80, tol=1e-9, max_norm=1e4):
    """Maximize loglik by Newton steps with backtracking; None on failure."""
    x = np.asarray(x0, dtype=float).copy()
    f = loglik(x)
    if not np.isfinite(f):
        return None
    for _ in range(max_iter):
        g = grad(x)
        if np.max(np.abs(g)) < tol * (1.0 + abs(f)):
            return x
        H = hess(x)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            return None
        a = 1.0
        for _ in range(40):
            cand = x + a * step
            fc = loglik(cand)
            if np.isfinite(fc) and fc >= f - 1e-12:
                break
            a *= 0.5
        else:
            return None
        if np.linalg.norm(cand) > max_norm:
            return None
        x, f = cand, fc
    g = grad(x)
    if np.max(np.abs(g)) < 1e-5 * (1.0 + abs(f)):
        return x
    return None


def _simplex_fallback(loglik, x0):
    res = optimize.minimize(lambda t: -loglik(t), x0, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12,
                                     "maxiter": 4000})
    if not res.success:
        raise MLEConvergenceError(f"simplex search failed: {res.message}")
    return res.x


# ---------------------------------------------------------------------------
# binomial (success probability of n Bernoulli trials)
# ---------------------------------------------------------------------------


def _binom_log_rel(s, n, theta):
    """log R for count(s) at theta; vectorized over s and/or theta."""
    s = np.asarray(s, dtype=float)
    return (
        special.xlogy(s, theta)
        + special.xlogy(n - s, 1.0 - theta)
        - special.xlogy(s, s / n)
        - special.xlogy(n - s, 1.0 - s / n)
    )


def binomial() -> ModelSpec:
    def log_lik(data, theta):
        t = float(theta[0])
        if not 0.0 <= t <= 1.0:
            return -np.inf
        s = float(np.sum(data.responses))
        return float(special.xlogy(s, t) + special.xlogy(data.n - s, 1.0 - t))

    def sample(theta, n, rng):
        return Dataset(responses=rng.binomial(1, float(theta[0]), size=n))

    def mle(data):
        return np.array([float(np.mean(data.responses))])

    def information(data):
        p = float(np.mean(data.responses))
        return np.array([[data.n / (p * (1.0 - p))]])

    def boundary(data):
        s = int(np.sum(data.responses))
        return s == 0 or s == data.n

    def log_rel(data, theta):
        t = float(theta[0])
        if not 0.0 <= t <= 1.0:
            return -np.inf
        return float(_binom_log_rel(float(np.sum(data.responses)), data.n, t))

    def sim_log_rel(theta, n, m, rng):
        t = float(theta[0])
        if not 0.0 <= t <= 1.0:
            raise ValueError("binomial: theta outside [0, 1]")
        s = rng.binomial(n, t, size=m)
        return _binom_log_rel(s, n, t)

    return ModelSpec(
        name="binomial",
        dim=1,
        log_lik=log_lik,
        sample=sample,
        mle=mle,
        information=information,
        boundary_mle=boundary,
        log_rel_lik=log_rel,
        sim_log_rel_lik=sim_log_rel,
    )


# ---------------------------------------------------------------------------
# bivariate normal correlation
# ---------------------------------------------------------------------------


def _bvn_stats(responses):
    x1, x2 = responses[..., 0], responses[..., 1]
    return np.sum(x1 * x1 + x2 * x2, axis=-1), np.sum(x1 * x2, axis=-1)


def _bvn_loglik_stats(a, b, n, rho):
    # a = sum(x1^2 + x2^2), b = sum(x1 x2)
    one = 1.0 - rho * rho
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = (
            -n * np.log(2 * np.pi)
            - 0.5 * n * np.log(one)
            - (a - 2 * rho * b) / (2 * one)
        )
    # |rho| >= 1 is the singular limit: zero density off the diagonal line
    return np.where(one > 0.0, ll, -np.inf)


def _bvn_mle_from_stats(a, b, n):
    """Vectorized MLE of the correlation: argmax over real cubic roots.

    The score equation is n r^3 - b r^2 + (a - n) r - b = 0; the root in
    (-1, 1) maximizing the likelihood is the MLE (the likelihood decreases
    into both endpoints, so an interior maximizer always exists).
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    m = a.size
    comp = np.zeros((m, 3, 3))
    comp[:, 1, 0] = 1.0
    comp[:, 2, 1] = 1.0
    comp[:, 0, 2] = b / n          # -c0 with c0 = -b/n
    comp[:, 1, 2] = -(a - n) / n   # -c1
    comp[:, 2, 2] = b / n          # -c2 with c2 = -b/n
    roots = np.linalg.eigvals(comp)  # (m, 3)
    real = np.abs(roots.imag) <= 1e-7 * (1.0 + np.abs(roots.real))
    cand = np.clip(roots.real, -1.0 + 1e-10, 1.0 - 1e-10)
    ll = _bvn_loglik_stats(a[:, None], b[:, None], n, cand)
    ll = np.where(real, ll, -np.inf)
    return cand[np.arange(m), np.argmax(ll, axis=1)]


def bvn_correlation() -> ModelSpec:
    def log_lik(data, theta):
        r = float(theta[0])
        if not -1.0 < r < 1.0:
            return -np.inf
        a, b = _bvn_stats(np.asarray(data.responses, dtype=float))
        return float(_bvn_loglik_stats(a, b, data.n, r))

    def sample(theta, n, rng):
        r = float(theta[0])
        z = rng.standard_normal((n, 2))
        x2 = r * z[:, 0] + np.sqrt(1.0 - r * r) * z[:, 1]
        return Dataset(responses=np.column_stack([z[:, 0], x2]))

    def mle(data):
        a, b = _bvn_stats(np.asarray(data.responses, dtype=float))
        return np.array([float(_bvn_mle_from_stats(a, b, data.n)[0])])

    def information(data):
        rho = mle(data)
        return finite_difference_information(spec, data, rho)

    def sim_log_rel(theta, n, m, rng):
        r = float(theta[0])
        if not -1.0 < r < 1.0:
            # Degenerate boundary: replicates drawn there sit exactly on a
            # line, where the relative likelihood at theta is 1 (log 0); the
            # observed value is -inf, so the contour is exactly 0.
            return np.zeros(m)
        z = rng.standard_normal((m, n, 2))
        x1 = z[:, :, 0]
        x2 = r * x1 + np.sqrt(1.0 - r * r) * z[:, :, 1]
        a = np.sum(x1 * x1 + x2 * x2, axis=1)
        b = np.sum(x1 * x2, axis=1)
        rhat = _bvn_mle_from_stats(a, b, n)
        return _bvn_loglik_stats(a, b, n, r) - _bvn_loglik_stats(a, b, n, rhat)

    def log_rel(data, theta):
        r = float(theta[0])
        if not -1.0 < r < 1.0:
            return -np.inf
        a, b = _bvn_stats(np.asarray(data.responses, dtype=float))
        rhat = float(_bvn_mle_from_stats(a, b, data.n)[0])
        return float(
            _bvn_loglik_stats(a, b, data.n, r) - _bvn_loglik_stats(a, b, data.n, rhat)
        )

    spec = ModelSpec(
        name="bvn-correlation",
        dim=1,
        log_lik=log_lik,
        sample=sample,
        mle=mle,
        information=information,
        log_rel_lik=log_rel,
        sim_log_rel_lik=sim_log_rel,
    )
    return spec


# ---------------------------------------------------------------------------
# log-linear GLMs with a fixed design (logistic, Poisson)
# ---------------------------------------------------------------------------


def _glm_loglik_batch(design, Y, Th, kind):
    eta = Th @ design.T
    if kind == "poisson":
        return np.sum(Y * eta - np.exp(eta), axis=-1) - np.sum(
            special.gammaln(Y + 1.0), axis=-1
        )
    return np.sum(Y * eta - np.logaddexp(0.0, eta), axis=-1)


def _glm_mle_batch(design, Y, kind, max_iter=60, tol=1e-8):
    """Damped Newton over a batch of response vectors; NaN rows on failure."""
    m, n = Y.shape
    d = design.shape[1]
    Th = np.zeros((m, d))
    if kind == "poisson":
        Th[:, 0] = np.log(np.maximum(Y.mean(axis=1), 0.5 / n))
    ll = _glm_loglik_batch(design, Y, Th, kind)
    for _ in range(max_iter):
        eta = Th @ design.T
        if kind == "poisson":
            mu = np.exp(np.clip(eta, -700, 700))
            w = mu
        else:
            mu = special.expit(eta)
            w = mu * (1.0 - mu)
        G = (Y - mu) @ design
        if np.max(np.abs(G)) < tol:
            break
        H = np.einsum("mn,ni,nj->mij", w, design, design)
        H[:, np.arange(d), np.arange(d)] += 1e-10
        try:
            step = np.linalg.solve(H, G[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(H[i], G[i], rcond=None)[0] for i in range(m)])
        a = np.ones(m)
        for _ in range(25):
            cand = Th + a[:, None] * step
            llc = _glm_loglik_batch(design, Y, cand, kind)
            bad = ~(np.isfinite(llc) & (llc >= ll - 1e-10))
            if not bad.any():
                break
            a[bad] *= 0.5
        Th = Th + a[:, None] * step
        ll = _glm_loglik_batch(design, Y, Th, kind)
    eta = Th @ design.T
    mu = np.exp(np.clip(eta, -700, 700)) if kind == "poisson" else special.expit(eta)
    G = (Y - mu) @ design
    ok = (np.max(np.abs(G), axis=1) < 1e-5 * (1.0 + np.abs(ll))) & (
        np.max(np.abs(Th), axis=1) < 1e3
    )
    Th = np.where(ok[:, None], Th, np.nan)
    return Th


def _make_glm(design, kind):
    design = np.asarray(design, dtype=float)
    if design.ndim != 2:
        raise ValueError("design must be an (n, d) matrix")
    n_design, d = design.shape

    def log_lik(data, theta):
        theta = np.asarray(theta, dtype=float)
        return float(_glm_loglik_batch(design, data.responses[None, :].astype(float),
                                       theta[None, :], kind)[0])

    def sample(theta, n, rng):
        if n != n_design:
            raise ValueError("sample size must match the fixed design")
        eta = design @ np.asarray(theta, dtype=float)
        if kind == "poisson":
            y = rng.poisson(np.exp(eta))
        else:
            y = (rng.random(n) < special.expit(eta)).astype(int)
        return Dataset(responses=y, covariates=design)

    def mle(data):
        th = _glm_mle_batch(design, data.responses[None, :].astype(float), kind)[0]
        if np.isnan(th).any():
            # one more attempt with a derivative-free search before giving up
            th = _simplex_fallback(lambda t: log_lik(data, t), np.zeros(d))
            if np.max(np.abs(th)) > 1e3:
                raise MLEConvergenceError(f"{kind}: estimate diverged (separation?)")
        return th

    def information(data):
        th = mle(data)
        eta = design @ th
        if kind == "poisson":
            w = np.exp(eta)
        else:
            p = special.expit(eta)
            w = p * (1.0 - p)
        return (design.T * w) @ design

    def sim_log_rel(theta, n, m, rng):
        theta = np.asarray(theta, dtype=float)
        eta = design @ theta
        if kind == "poisson":
            Y = rng.poisson(np.exp(eta), size=(m, n)).astype(float)
        else:
            Y = (rng.random((m, n)) < special.expit(eta)).astype(float)
        Th = _glm_mle_batch(design, Y, kind)
        out = _glm_loglik_batch(design, Y, theta[None, :], kind) - _glm_loglik_batch(
            design, Y, Th, kind
        )
        return out  # NaN rows (non-converged MLEs) are tie-counted downstream

    return ModelSpec(
        name=f"{kind}-loglinear" if kind == "poisson" else "logistic",
        dim=d,
        log_lik=log_lik,
        sample=sample,
        mle=mle,
        information=information,
        sim_log_rel_lik=sim_log_rel,
    )


def logistic_regression(design) -> ModelSpec:
    """Bernoulli responses with success probability expit(design @ theta)."""
    return _make_glm(design, "logistic")


def poisson_loglinear(design) -> ModelSpec:
    """Poisson responses with rate exp(design @ theta)."""
    return _make_glm(design, "poisson")


# ---------------------------------------------------------------------------
# multinomial frequencies
# ---------------------------------------------------------------------------


def multinomial(k: int) -> ModelSpec:
    def counts(data):
        return np.bincount(np.asarray(data.responses, dtype=int), minlength=k).astype(float)

    def _valid(theta):
        return theta.min() >= 0.0 and abs(theta.sum() - 1.0) <= 1e-8

    def log_lik(data, theta):
        theta = np.asarray(theta, dtype=float)
        if not _valid(theta):
            return -np.inf
        return float(np.sum(special.xlogy(counts(data), theta)))

    def sample(theta, n, rng):
        return Dataset(responses=rng.choice(k, size=n, p=np.asarray(theta, dtype=float)))

    def mle(data):
        return counts(data) / data.n

    def information(data):
        p = mle(data)
        return data.n * np.diag(1.0 / p)

    def boundary(data):
        return bool((counts(data) == 0).any())

    def _log_rel_counts(x, n, theta):
        return np.sum(special.xlogy(x, theta) - special.xlogy(x, x / n), axis=-1)

    def log_rel(data, theta):
        theta = np.asarray(theta, dtype=float)
        if not _valid(theta):
            return -np.inf
        return float(_log_rel_counts(counts(data), data.n, theta))

    def sim_log_rel(theta, n, m, rng):
        theta = np.asarray(theta, dtype=float)
        x = rng.multinomial(n, theta, size=m).astype(float)
        return _log_rel_counts(x, n, theta)

    return ModelSpec(
        name="multinomial",
        dim=k,
        log_lik=log_lik,
        sample=sample,
        mle=mle,
        information=information,
        boundary_mle=boundary,
        log_rel_lik=log_rel,
        sim_log_rel_lik=sim_log_rel,
    )


# ---------------------------------------------------------------------------
# gamma: (shape, scale) and (shape, mean) parametrizations
# ---------------------------------------------------------------------------


def _gamma_shape_root(c):
    """Solve log(a) - digamma(a) = c (c > 0), vectorized Newton in log a."""
    c = np.asarray(c, dtype=float)
    c = np.maximum(c, 1e-12)
    # standard closed-form starting value
    a = (3.0 - c + np.sqrt((c - 3.0) ** 2 + 24.0 * c)) / (12.0 * c)
    a = np.maximum(a, 1e-8)
    u = np.log(a)
    for _ in range(50):
        a = np.exp(u)
        fv = np.log(a) - special.digamma(a) - c
        fp = 1.0 - special.polygamma(1, a) * a  # d/du of f(exp(u)); < 0
        du = fv / fp
        u = u - du
        if np.max(np.abs(du)) < 1e-13:
            break
    return np.exp(u)


def _gamma_ss_loglik_stats(t1, s, n, a, b):
    return (a - 1.0) * t1 - s / b - n * a * np.log(b) - n * special.gammaln(a)


def gamma_shape_scale() -> ModelSpec:
    def log_lik(data, theta):
        a, b = float(theta[0]), float(theta[1])
        if a <= 0.0 or b <= 0.0:
            return -np.inf
        x = np.asarray(data.responses, dtype=float)
        return float(_gamma_ss_loglik_stats(np.sum(np.log(x)), np.sum(x), data.n, a, b))

    def sample(theta, n, rng):
        return Dataset(responses=rng.gamma(float(theta[0]), float(theta[1]), size=n))

    def _c(data):
        x = np.asarray(data.responses, dtype=float)
        return float(np.log(np.mean(x)) - np.mean(np.log(x)))

    def mle(data):
        x = np.asarray(data.responses, dtype=float)
        a = float(_gamma_shape_root(_c(data)))
        return np.array([a, float(np.mean(x)) / a])

    def information(data):
        a, b = mle(data)
        s = float(np.sum(data.responses))
        n = data.n
        return np.array(
            [
                [n * special.polygamma(1, a), n / b],
                [n / b, 2.0 * s / b**3 - n * a / b**2],
            ]
        )

    def boundary(data):
        return _c(data) < 1e-12  # all observations (numerically) equal

    def sim_log_rel(theta, n, m, rng):
        a0, b0 = float(theta[0]), float(theta[1])
        x = rng.gamma(a0, b0, size=(m, n))
        t1 = np.sum(np.log(x), axis=1)
        s = np.sum(x, axis=1)
        c = np.log(s / n) - t1 / n
        ahat = _gamma_shape_root(c)
        bhat = s / n / ahat
        return _gamma_ss_loglik_stats(t1, s, n, a0, b0) - _gamma_ss_loglik_stats(
            t1, s, n, ahat, bhat
        )

    return ModelSpec(
        name="gamma",
        dim=2,
        log_lik=log_lik,
        sample=sample,
        mle=mle,
        information=information,
        boundary_mle=boundary,
        sim_log_rel_lik=sim_log_rel,
    )


def _gamma_ms_loglik_stats(t1, s, n, a, phi):
    return (
        (a - 1.0) * t1
        - a * s / phi
        - n * special.gammaln(a)
        - n * a * np.log(phi)
        + n * a * np.log(a)
    )


def gamma_mean_shape() -> ModelSpec:
    """Gamma with parameters (shape, mean); mean = shape * scale."""

    def log_lik(data, theta):
        a, phi = float(theta[0]), float(theta[1])
        if a <= 0.0 or phi <= 0.0:
            return -np.inf
        x = np.asarray(data.responses, dtype=float)
        return float(_gamma_ms_loglik_stats(np.sum(np.log(x)), np.sum(x), data.n, a, phi))

    def sample(theta, n, rng):
        a, phi = float(theta[0]), float(theta[1])
        return Dataset(responses=rng.gamma(a, phi / a, size=n))

    def mle(data):
        x = np.asarray(data.responses, dtype=float)
        c = float(np.log(np.mean(x)) - np.mean(np.log(x)))
        return np.array([float(_gamma_shape_root(c)), float(np.mean(x))])

    def information(data):
        a, phi = mle(data)
        s = float(np.sum(data.responses))
        n = data.n
        return np.array(
            [
                [n * (special.polygamma(1, a) - 1.0 / a), n / phi - s / phi**2],
                [n / phi - s / phi**2, 2.0 * a * s / phi**3 - n * a / phi**2],
            ]
        )

    def boundary(data):
        x = np.asarray(data.responses, dtype=float)
        return float(np.log(np.mean(x)) - np.mean(np.log(x))) < 1e-12

    def sim_log_rel(theta, n, m, rng):
        a0, phi0 = float(theta[0]), float(theta[1])
        x = rng.gamma(a0, phi0 / a0, size=(m, n))
        t1 = np.sum(np.log(x), axis=1)
        s = np.sum(x, axis=1)
        c = np.log(s / n) - t1 / n
        ahat = _gamma_shape_root(c)
        return _gamma_ms_loglik_stats(t1, s, n, a0, phi0) - _gamma_ms_loglik_stats(
            t1, s, n, ahat, s / n
        )

    return ModelSpec(
        name="gamma-mean-shape",
        dim=2,
        log_lik=log_lik,
        sample=sample,
        mle=mle,
        information=information,
        boundary_mle=boundary,
        sim_log_rel_lik=sim_log_rel,
    )


# ---------------------------------------------------------------------------
# many normal means (known sigma), optionally lasso-penalized
# ---------------------------------------------------------------------------


def soft_threshold(x, lam):
    """sign(x) * max(|x| - lam, 0), elementwise."""
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)
    return float(out) if out.ndim == 0 else out


def normal_means(sigma: float) -> ModelSpec:
    sigma = float(sigma)

    def log_lik(data, theta):
        x = np.asarray(data.responses, dtype=float)
        theta = np.asarray(theta, dtype=float)
        return float(
            -0.5 * data.n * np.log(2 * np.pi * sigma**2)
            - np.sum((x - theta) ** 2) / (2 * sigma**2)
        )

    def sample(theta, n, rng):
        theta = np.asarray(theta, dtype=float)
        return Dataset(responses=rng.normal(theta, sigma, size=n))

    def mle(data):
        return np.asarray(data.responses, dtype=float).copy()

    def information(data):
        return np.eye(data.n) / sigma**2

    def sim_log_rel(theta, n, m, rng):
        theta = np.asarray(theta, dtype=float)
        x = rng.normal(theta[None, :], sigma, size=(m, n))
        return -np.sum((x - theta[None, :]) ** 2, axis=1) / (2 * sigma**2)

    return ModelSpec(
        name="normal-means",
        dim=None,
        log_lik=log_lik,
        sample=sample,
        mle=mle,
        information=information,
        sim_log_rel_lik=sim_log_rel,
    )


def normal_means_lasso(sigma: float, lam: float) -> ModelSpec:
    """Normal means with an L1-penalized likelihood driving the contour.

    The penalized log-likelihood is -||x - theta||^2 / (2 sigma^2) -
    lam * ||theta||_1, whose exact maximizer is the soft-threshold estimate
    with shrinkage lam * sigma^2.  Sampling stays the plain normal model.
    """
    sigma = float(sigma)
    lam = float(lam)

    def _pen(x, theta, n):
        return (
            -0.5 * n * np.log(2 * np.pi * sigma**2)
            - np.sum((x - theta) ** 2, axis=-1) / (2 * sigma**2)
            - lam * np.sum(np.abs(theta), axis=-1)
        )

    def log_lik(data, theta):
        return float(_pen(np.asarray(data.responses, dtype=float),
                          np.asarray(theta, dtype=float), data.n))

    def sample(theta, n, rng):
        theta = np.asarray(theta, dtype=float)
        return Dataset(responses=rng.normal(theta, sigma, size=n))

    def mle(data):
        return soft_threshold(np.asarray(data.responses, dtype=float), lam * sigma**2)

    def information(data):
        return np.eye(data.n) / sigma**2

    def log_rel(data, theta):
        x = np.asarray(data.responses, dtype=float)
        theta = np.asarray(theta, dtype=float)
        return float(_pen(x, theta, data.n) - _pen(x, mle(Dataset(responses=x)), data.n))

    def sim_log_rel(theta, n, m, rng):
        theta = np.asarray(theta, dtype=float)
        x = rng.normal(theta[None, :], sigma, size=(m, n))
        th_hat = soft_threshold(x, lam * sigma**2)
        return _pen(x, theta[None, :], n) - _pen(x, th_hat, n)

    return ModelSpec(
        name="normal-means-lasso",
        dim=None,
        log_lik=log_lik,
        sample=sample,
        mle=mle,
        information=information,
        log_rel_lik=log_rel,
        sim_log_rel_lik=sim_log_rel,
        meta={"sigma": sigma, "lam": lam},
    )


# ---------------------------------------------------------------------------
# log-normal, uncensored and left-censored
# ---------------------------------------------------------------------------


def lognormal() -> ModelSpec:
    """Log-normal with theta = (mean, variance) of log Y."""

    def log_lik(data, theta):
        mu, v = float(theta[0]), float(theta[1])
        if v <= 0.0:
            return -np.inf
        y = np.asarray(data.responses, dtype=float)
        w = np.log(y)
        return float(
            -np.sum(w)  # Jacobian of y -> log y
            - 0.5 * data.n * np.log(2 * np.pi * v)
            - np.sum((w - mu) ** 2) / (2 * v)
        )

    def sample(theta, n, rng):
        mu, v = float(theta[0]), float(theta[1])
        return Dataset(responses=np.exp(rng.normal(mu, np.sqrt(v), size=n)))

    def mle(data):
        w = np.log(np.asarray(data.responses, dtype=float))
        mu = float(np.mean(w))
        return np.array([mu, float(np.mean((w - mu) ** 2))])

    def information(data):
        w = np.log(np.asarray(data.responses, dtype=float))
        mu, v = mle(data)
        n = data.n
        return np.array(
            [
                [n / v, float(np.sum(w - mu)) / v**2],
                [float(np.sum(w - mu)) / v**2,
                 float(np.sum((w - mu) ** 2)) / v**3 - 0.5 * n / v**2],
            ]
        )

    def sim_log_rel(theta, n, m, rng):
        mu0, v0 = float(theta[0]), float(theta[1])
        w = rng.normal(mu0, np.sqrt(v0), size=(m, n))
        muh = w.mean(axis=1)
        vh = np.mean((w - muh[:, None]) ** 2, axis=1)
        ll0 = -0.5 * n * np.log(v0) - (n * vh + n * (muh - mu0) ** 2) / (2 * v0)
        llh = -0.5 * n * np.log(vh) - 0.5 * n
        return ll0 - llh

    return ModelSpec(
        name="lognormal",
        dim=2,
        log_lik=log_lik,
        sample=sample,
        mle=mle,
        information=information,
        sim_log_rel_lik=sim_log_rel,
    )


def _cens_normal_loglik(W, T, mu, v):
    """Left-censored normal log-likelihood on the log scale (no Jacobian).

    W: observations (log scale), T: 1 = exact, 0 = censored at W.
    Broadcasts over leading axes of W/T against mu/v of matching shape.
    """
    sd = np.sqrt(v)
    z = (W - mu) / sd
    dens = -0.5 * np.log(2 * np.pi * v) - 0.5 * z * z
    cens = special.log_ndtr(z)
    return np.sum(np.where(T == 1, dens, cens), axis=-1)


def _cens_normal_score(W, T, mu, v):
    """Analytic score of the censored normal loglik wrt (mu, v)."""
    sd = np.sqrt(v)
    z = (W - mu) / sd
    # inverse Mills ratio phi/Phi, computed stably
    r = np.exp(-0.5 * z * z - 0.5 * np.log(2 * np.pi) - special.log_ndtr(z))
    obs = T == 1
    dmu = np.sum(np.where(obs, z / sd, -r / sd), axis=-1)
    dv = np.sum(np.where(obs, (z * z - 1.0) / (2 * v), -z * r / (2 * v)), axis=-1)
    return dmu, dv


def _cens_normal_mle_batch(W, T, max_iter=600):
    """Batched EM for the censored normal MLE.

    The E-step fills each censored slot with the first two moments of the
    normal truncated above at its bound; the M-step is the complete-data
    sample mean and variance.  EM is monotone in the likelihood, so it is
    robust to heavy censoring where a Newton iteration stalls.  Rows whose
    analytic score is not near zero at the end come back NaN.
    """
    W = np.atleast_2d(W)
    T = np.broadcast_to(np.atleast_2d(T), W.shape)
    m, n = W.shape
    obs = T == 1
    n_obs = obs.sum(axis=1)
    with np.errstate(invalid="ignore"):
        obs_mean = np.where(obs, W, np.nan)
        mu = np.where(n_obs > 0, np.nanmean(np.where(obs, W, np.nan), axis=1), np.nan)
        v = np.where(n_obs > 0, np.nanvar(obs_mean, axis=1), np.nan)
    bad_start = ~np.isfinite(mu) | ~np.isfinite(v)
    mu = np.where(bad_start, np.mean(W, axis=1), mu)
    v = np.where(bad_start | (v <= 1e-12), np.maximum(np.var(W, axis=1), 1e-4), v)

    for _ in range(max_iter):
        sd = np.sqrt(v)[:, None]
        alpha = (W - mu[:, None]) / sd
        # inverse Mills ratio phi/Phi, stable in the deep tail
        r = np.exp(-0.5 * alpha * alpha - 0.5 * np.log(2 * np.pi) - special.log_ndtr(alpha))
        ew = np.where(obs, W, mu[:, None] - sd * r)
        var_trunc = v[:, None] * (1.0 - alpha * r - r * r)
        ew2 = np.where(obs, W * W, np.maximum(var_trunc, 0.0) + ew * ew)
        mu_new = np.mean(ew, axis=1)
        v_new = np.maximum(np.mean(ew2, axis=1) - mu_new**2, 1e-12)
        done = (np.abs(mu_new - mu) < 1e-11 * (1.0 + np.abs(mu))) & (
            np.abs(v_new - v) < 1e-11 * (1.0 + v)
        )
        mu, v = mu_new, v_new
        if np.all(done):
            break
    g1, g2 = _cens_normal_score(W, T, mu[:, None], v[:, None])
    ok = (np.abs(g1) < 1e-4 * n) & (np.abs(g2) < 1e-4 * n) & np.isfinite(mu) & (v > 1e-12)
    mu = np.where(ok, mu, np.nan)
    return np.column_stack([mu, np.where(ok, v, np.nan)])


def lognormal_censored() -> ModelSpec:
    """Left-censored log-normal: censor flag 1 = exact, 0 = response is a bound.

    The model's own sampler draws uncensored responses (flag identically 1);
    censoring is injected by the caller, which owns the censoring
    distribution.
    """

    def _parts(data):
        if data.censor is None:
            t = np.ones(data.n, dtype=int)
        else:
            t = data.censor
        return np.log(np.asarray(data.responses, dtype=float)), t

    def log_lik(data, theta):
        mu, v = float(theta[0]), float(theta[1])
        if v <= 0.0:
            return -np.inf
        w, t = _parts(data)
        jac = -float(np.sum(w[t == 1]))  # d log y for exact observations only
        return float(_cens_normal_loglik(w, t, mu, v)) + jac

    def sample(theta, n, rng):
        mu, v = float(theta[0]), float(theta[1])
        y = np.exp(rng.normal(mu, np.sqrt(v), size=n))
        return Dataset(responses=y, censor=np.ones(n, dtype=int))

    def mle(data):
        w, t = _parts(data)
        th = _cens_normal_mle_batch(w[None, :], t[None, :])[0]
        if np.isnan(th).any():
            th = _simplex_fallback(
                lambda p: float(_cens_normal_loglik(w, t, p[0], np.exp(p[1]))),
                np.array([np.mean(w), np.log(np.var(w) + 1e-4)]),
            )
            th = np.array([th[0], np.exp(th[1])])
        return th

    def information(data):
        return finite_difference_information(spec, data, mle(data))

    def boundary(data):
        _, t = _parts(data)
        return int(np.sum(t)) == 0  # nothing exactly observed

    spec = ModelSpec(
        name="lognormal-censored",
        dim=2,
        log_lik=log_lik,
        sample=sample,
        mle=mle,
        information=information,
        boundary_mle=boundary,
    )
    return spec


# ---------------------------------------------------------------------------
# log reparametrization wrapper
# ---------------------------------------------------------------------------


def log_reparam(base: ModelSpec, indices=None) -> ModelSpec:
    """Work with eta_i = log(theta_i) on the given coordinates (all by
    default) of a model whose corresponding parameters are positive.

    The likelihood is invariant under the reparametrization, so relative
    likelihoods and simulated contour values carry over; the observed
    information transforms as D J D with D diagonal, D_ii = theta_i on
    logged coordinates and 1 elsewhere.
    """
    if base.dim is None:
        raise ValueError("log_reparam requires a model of fixed dimension")
    logged = np.zeros(base.dim, dtype=bool)
    logged[list(range(base.dim)) if indices is None else list(indices)] = True

    def _to_theta(eta):
        eta = np.asarray(eta, dtype=float)
        if np.max(np.abs(eta[logged]), initial=0.0) > 690.0:
            return None
        theta = eta.copy()
        theta[logged] = np.exp(eta[logged])
        return theta

    def _to_eta(theta):
        theta = np.asarray(theta, dtype=float).copy()
        if np.any(theta[logged] <= 0.0):
            raise DegenerateMLEError(
                "log reparametrization needs positive MLE coordinates"
            )
        theta[logged] = np.log(theta[logged])
        return theta

    def log_lik(data, eta):
        theta = _to_theta(eta)
        if theta is None:
            return -np.inf
        return base.log_lik(data, theta)

    def sample(eta, n, rng):
        theta = _to_theta(np.asarray(eta, dtype=float))
        return base.sample(theta, n, rng)

    def mle(data):
        return _to_eta(base.mle(data))

    def information(data):
        theta = np.asarray(base.mle(data), dtype=float)
        d = np.where(logged, theta, 1.0)
        D = np.diag(d)
        return D @ np.atleast_2d(np.asarray(base.information(data), dtype=float)) @ D

    log_rel = None
    if base.log_rel_lik is not None:
        def log_rel(data, eta):  # noqa: F811
            theta = _to_theta(eta)
            if theta is None:
                return -np.inf
            return base.log_rel_lik(data, theta)

    sim = None
    if base.sim_log_rel_lik is not None:
        def sim(eta, n, m, rng):  # noqa: F811
            theta = _to_theta(np.asarray(eta, dtype=float))
            if theta is None:
                return np.full(m, -np.inf)
            return base.sim_log_rel_lik(theta, n, m, rng)

    return dataclasses.replace(
        base,
        name=base.name + "-log",
        log_lik=log_lik,
        sample=sample,
        mle=mle,
        information=information,
        log_rel_lik=log_rel,
        sim_log_rel_lik=sim,
        meta=dict(base.meta, reparam_base=base.name,
                  reparam_log_indices=[int(i) for i in np.where(logged)[0]]),
    )
