"""Model-layer tests: relative likelihood, MLEs, observed information.

Oracle conventions used below:
  * closed-form relative-likelihood values are frozen from the direct formula
    (noted next to each literal);
  * optimizer-based MLEs are checked against coarse grid searches plus a
    score-at-optimum condition, never against the optimizer itself;
  * analytic information matrices are checked against central finite
    differences of the log-likelihood.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from possfit.models import (
    Dataset,
    DegenerateMLEError,
    binomial,
    bvn_correlation,
    finite_difference_information,
    gamma_mean_shape,
    gamma_shape_scale,
    log_reparam,
    logistic_regression,
    lognormal,
    mle_and_information,
    multinomial,
    normal_means,
    normal_means_lasso,
    poisson_loglinear,
    relative_likelihood,
    soft_threshold,
)


def _binom_data(s, n):
    y = np.zeros(n, dtype=int)
    y[:s] = 1
    return Dataset(responses=y)


# ---------------------------------------------------------------------------
# relative likelihood
# ---------------------------------------------------------------------------


def test_binomial_relative_likelihood_frozen_value():
    # (n*theta/s)^s * ((n - n*theta)/(n - s))^(n - s) at n=15, s=6, theta=0.5:
    # (7.5/6)^6 * (7.5/9)^9 = 0.7393138865196799
    data = _binom_data(6, 15)
    r = relative_likelihood(binomial(), data, [0.5])
    assert r == pytest.approx(0.7393138865196799, abs=1e-12)


def test_relative_likelihood_is_one_at_mle():
    data = _binom_data(6, 15)
    assert relative_likelihood(binomial(), data, [0.4]) == pytest.approx(1.0, abs=1e-12)


def test_relative_likelihood_off_support_is_zero():
    data = _binom_data(6, 15)
    assert relative_likelihood(binomial(), data, [0.0]) == 0.0
    assert relative_likelihood(binomial(), data, [1.0]) == 0.0
    assert relative_likelihood(binomial(), data, [-0.2]) == 0.0


def test_relative_likelihood_defined_at_boundary_mle():
    # all-failure sample: sup of the likelihood sits at theta=0 where
    # L(0) = 1, so R(theta) = (1-theta)^n stays perfectly well defined
    data = _binom_data(0, 15)
    r = relative_likelihood(binomial(), data, [0.3])
    assert r == pytest.approx(0.7**15, rel=1e-12)


@settings(deadline=None, max_examples=50)
@given(
    s=st.integers(min_value=0, max_value=15),
    theta=st.floats(min_value=1e-3, max_value=1 - 1e-3),
)
def test_relative_likelihood_bounded(s, theta):
    data = _binom_data(s, 15)
    r = relative_likelihood(binomial(), data, [theta])
    assert 0.0 <= r <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# MLE + observed information
# ---------------------------------------------------------------------------


def test_binomial_mle_and_information():
    # J = n / (thetahat (1 - thetahat)) = 15 / (0.4 * 0.6) = 62.5
    theta, info = mle_and_information(binomial(), _binom_data(6, 15))
    assert theta[0] == pytest.approx(0.4, abs=1e-14)
    assert info.shape == (1, 1)
    assert info[0, 0] == pytest.approx(62.5, rel=1e-12)


def test_binomial_boundary_mle_raises():
    with pytest.raises(DegenerateMLEError):
        mle_and_information(binomial(), _binom_data(0, 15))
    with pytest.raises(DegenerateMLEError):
        mle_and_information(binomial(), _binom_data(15, 15))


def test_normal_means_mle_is_data_and_info_is_scaled_identity():
    rng = np.random.default_rng(7)
    x = rng.normal(size=12)
    model = normal_means(sigma=2.0)
    theta, info = mle_and_information(model, Dataset(responses=x))
    assert np.allclose(theta, x)
    assert np.allclose(info, np.eye(12) / 4.0)


def test_gamma_mle_beats_grid_oracle():
    rng = np.random.default_rng(11)
    x = rng.gamma(shape=3.0, scale=2.0, size=40)
    data = Dataset(responses=x)
    model = gamma_shape_scale()
    theta, _ = mle_and_information(model, data)
    ll_hat = model.log_lik(data, theta)
    shapes = np.linspace(0.5, 8.0, 120)
    scales = np.linspace(0.3, 6.0, 120)
    grid_best = max(
        model.log_lik(data, np.array([a, b])) for a in shapes for b in scales
    )
    assert ll_hat >= grid_best - 1e-9
    # score condition via central differences
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h * (1 + abs(theta[i]))
        score = (model.log_lik(data, theta + e) - model.log_lik(data, theta - e)) / (
            2 * e[i]
        )
        assert abs(score) < 1e-4


def test_gamma_information_matches_finite_differences():
    rng = np.random.default_rng(5)
    x = rng.gamma(shape=7.0, scale=3.0 / 7.0, size=25)
    data = Dataset(responses=x)
    theta, info = mle_and_information(gamma_shape_scale(), data)
    fd = finite_difference_information(gamma_shape_scale(), data, theta)
    assert np.linalg.norm(fd - info) <= 1e-4 * np.linalg.norm(info)


def test_gamma_mean_shape_matches_shape_scale_fit():
    rng = np.random.default_rng(21)
    x = rng.gamma(shape=7.0, scale=3.0 / 7.0, size=25)
    data = Dataset(responses=x)
    t_ss, _ = mle_and_information(gamma_shape_scale(), data)
    t_ms, info = mle_and_information(gamma_mean_shape(), data)
    assert t_ms[0] == pytest.approx(t_ss[0], rel=1e-8)          # same shape
    assert t_ms[1] == pytest.approx(t_ss[0] * t_ss[1], rel=1e-8)  # mean = a*b
    assert t_ms[1] == pytest.approx(np.mean(x), rel=1e-10)
    # near-orthogonal parametrization: cross information ~ 0 at the MLE
    assert abs(info[0, 1]) <= 1e-6 * np.sqrt(info[0, 0] * info[1, 1])


def test_lognormal_mle_closed_form():
    rng = np.random.default_rng(3)
    y = rng.lognormal(mean=1.2, sigma=0.5, size=30)
    data = Dataset(responses=y)
    theta, info = mle_and_information(lognormal(), data)
    w = np.log(y)
    assert theta[0] == pytest.approx(w.mean(), rel=1e-12)
    assert theta[1] == pytest.approx(((w - w.mean()) ** 2).mean(), rel=1e-12)
    fd = finite_difference_information(lognormal(), data, theta)
    assert np.linalg.norm(fd - info) <= 1e-4 * np.linalg.norm(info)


def test_bvn_correlation_mle_beats_grid():
    rng = np.random.default_rng(17)
    n = 60
    z = rng.standard_normal((n, 2))
    rho = 0.5
    pairs = np.column_stack([z[:, 0], rho * z[:, 0] + np.sqrt(1 - rho**2) * z[:, 1]])
    data = Dataset(responses=pairs)
    model = bvn_correlation()
    theta, info = mle_and_information(model, data)
    assert -1 < theta[0] < 1
    grid = np.linspace(-0.95, 0.95, 381)
    grid_best = max(model.log_lik(data, np.array([g])) for g in grid)
    assert model.log_lik(data, theta) >= grid_best - 1e-9
    assert info[0, 0] > 0


def test_poisson_loglinear_mle_and_information():
    rng = np.random.default_rng(29)
    n = 40
    design = np.column_stack([np.ones(n), rng.standard_normal(n), rng.standard_normal(n)])
    model = poisson_loglinear(design)
    theta0 = np.array([1.0, 0.25, 0.1])
    data = model.sample(theta0, n, np.random.default_rng(1))
    theta, info = mle_and_information(model, data)
    # score = Z'(x - lambda) must vanish at the MLE
    lam = np.exp(design @ theta)
    score = design.T @ (data.responses - lam)
    assert np.max(np.abs(score)) < 1e-6
    fd = finite_difference_information(model, data, theta)
    assert np.linalg.norm(fd - info) <= 1e-4 * np.linalg.norm(info)


def test_logistic_regression_mle_and_information():
    rng = np.random.default_rng(43)
    n = 80
    design = np.column_stack([np.ones(n), rng.standard_normal(n)])
    model = logistic_regression(design)
    data = model.sample(np.array([0.3, 1.0]), n, np.random.default_rng(2))
    theta, info = mle_and_information(model, data)
    p = 1 / (1 + np.exp(-design @ theta))
    score = design.T @ (data.responses - p)
    assert np.max(np.abs(score)) < 1e-6
    fd = finite_difference_information(model, data, theta)
    assert np.linalg.norm(fd - info) <= 1e-4 * np.linalg.norm(info)


def test_multinomial_mle_is_empirical_frequencies():
    y = np.array([0, 0, 1, 2, 2, 2, 1, 0, 2, 1, 1, 0])
    theta, _ = mle_and_information(multinomial(3), Dataset(responses=y))
    assert np.allclose(theta, np.bincount(y, minlength=3) / 12)


def test_log_reparam_wraps_gamma():
    rng = np.random.default_rng(33)
    x = rng.gamma(shape=3.0, scale=2.0, size=25)
    data = Dataset(responses=x)
    base = gamma_shape_scale()
    wrapped = log_reparam(base)
    t_b, J_b = mle_and_information(base, data)
    t_w, J_w = mle_and_information(wrapped, data)
    assert np.allclose(t_w, np.log(t_b), rtol=1e-10)
    # information transforms as D J D with D = diag(theta) at the optimum
    D = np.diag(t_b)
    assert np.allclose(J_w, D @ J_b @ D, rtol=1e-8)
    # relative likelihood is parametrization invariant
    eta = np.log([2.5, 1.5])
    r_w = relative_likelihood(wrapped, data, eta)
    r_b = relative_likelihood(base, data, np.exp(eta))
    assert r_w == pytest.approx(r_b, rel=1e-12)


# ---------------------------------------------------------------------------
# soft threshold / lasso model
# ---------------------------------------------------------------------------


def _grid_soft_minimizer(x, lam):
    """Independent oracle: minimize (x-t)^2/2 + lam*|t| by piecewise search."""
    from scipy.optimize import minimize_scalar

    obj = lambda t: 0.5 * (x - t) ** 2 + lam * abs(t)
    b = abs(x) + 1.0
    cands = [0.0]
    for lo, hi in [(-b, 0.0), (0.0, b)]:
        res = minimize_scalar(obj, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        cands.append(res.x)
    return min(cands, key=obj)


def test_soft_threshold_matches_grid_minimizer():
    rng = np.random.default_rng(101)
    for _ in range(100):
        x = rng.uniform(-6, 6)
        lam = rng.uniform(0.01, 3.0)
        assert soft_threshold(x, lam) == pytest.approx(
            _grid_soft_minimizer(x, lam), abs=1e-6
        )


def test_lasso_model_mle_and_unit_relative_likelihood():
    rng = np.random.default_rng(55)
    x = rng.normal(size=20)
    x[:3] += 5.0
    lam = np.sqrt(np.log(20.0))
    model = normal_means_lasso(sigma=1.0, lam=lam)
    data = Dataset(responses=x)
    theta_hat = model.mle(data)
    assert np.allclose(theta_hat, soft_threshold(x, lam))
    assert relative_likelihood(model, data, theta_hat) == pytest.approx(1.0, abs=1e-12)
    # penalized ratio is <= 1 everywhere else
    assert relative_likelihood(model, data, x) <= 1.0 + 1e-12
    _, info = mle_and_information(model, data)
    assert np.allclose(info, np.eye(20))


# ---------------------------------------------------------------------------
# samplers / dataset plumbing
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("factory,theta,n", [
    (binomial, np.array([0.4]), 15),
    (gamma_shape_scale, np.array([3.0, 2.0]), 25),
    (bvn_correlation, np.array([0.5]), 50),
    (lognormal, np.array([1.0, 0.25]), 30),
])
def test_sampler_determinism(factory, theta, n):
    model = factory()
    a = model.sample(theta, n, np.random.default_rng(123))
    b = model.sample(theta, n, np.random.default_rng(123))
    assert np.array_equal(a.responses, b.responses)
    assert a.n == n


def test_dataset_validates_column_lengths():
    with pytest.raises(ValueError):
        Dataset(responses=np.arange(5.0), covariates=np.zeros((4, 2)))
    with pytest.raises(ValueError):
        Dataset(responses=np.arange(5.0), censor=np.ones(3))


def test_dataset_censor_must_be_binary():
    with pytest.raises(ValueError):
        Dataset(responses=np.arange(4.0), censor=np.array([0, 1, 2, 1]))
