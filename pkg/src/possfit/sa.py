"""Stochastic-approximation fitting of variational possibility families.

The driver solves f(xi) = 0 by the Robbins-Monro recursion

    xi_{t} = clamp( xi_{t-1} + sign * w_t * f_hat(xi_{t-1}) ),   w_t = 2/(1+t),

where f_hat is a noisy evaluation of the criterion.  Two criteria are
implemented:

* the credal-mass criterion (scalar spread): draw K parameters from the
  candidate family and compare the fraction landing inside the target
  contour's alpha-cut against 1 - alpha;
* the boundary-matching criterion (per-axis spread): push the 2d points where
  the candidate's credal ellipsoid touches its principal axes through the
  target contour and compare against alpha.

`sign` encodes the direction in which the criterion moves with xi so the same
driver serves families whose spread grows with xi (Gaussian) and families
whose spread shrinks with it (Dirichlet precision, quantile companions).
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ._rng import SA_TAG, derive_rng
from .contours import PossibilityContour, make_mc_contour
from .families import (
    DirichletFamily,
    GaussianScalarFamily,
    GaussianVectorFamily,
    boundary_points,
    sample,
)
from .models import Dataset, ModelSpec, mle_and_information

__all__ = [
    "SAConfig",
    "FitTrace",
    "default_step",
    "robbins_monro",
    "f_hat",
    "fit_scalar",
    "fit_scalar_anchored",
    "fit_vector",
    "fit_vector_anchored",
    "fit_dirichlet",
]

_XI_FLOOR = 1e-6


def default_step(t: int) -> float:
    """Step size w_t = 2/(1+t); the first update carries full weight."""
    return 2.0 / (1.0 + t)


@dataclass(frozen=True)
class SAConfig:
    """Tuning knobs for the stochastic-approximation fits.

    ``seed`` is mandatory: every random draw inside a fit is derived from it,
    so two runs with the same config produce bit-identical traces.
    """

    seed: int
    alpha: float = 0.1
    k_outer: int = 200
    m_inner: int = 500
    epsilon: float = 0.005
    min_iter: int = 5
    max_iter: int = 500
    step: Callable[[int], float] = default_step
    verbose: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.k_outer < 1 or self.m_inner < 1:
            raise ValueError("sample sizes must be at least 1")
        if self.min_iter < 1:
            raise ValueError("min_iter must be at least 1")
        if self.max_iter < self.min_iter:
            raise ValueError("max_iter must be at least min_iter")


@dataclass
class FitTrace:
    """Per-iteration record of a Robbins-Monro run.

    Row t stores the iterate *after* update t together with the objective
    estimate that produced the update (evaluated at the previous iterate).
    """

    ts: List[int]
    xis: List[np.ndarray]
    objectives: List[np.ndarray]
    xi_final: np.ndarray
    reason: str  # "converged" | "max-iterations"
    failures: int = 0

    def to_csv(self, path) -> None:
        d = self.xi_final.size
        k = self.objectives[0].size if self.objectives else d
        header = (
            "t,"
            + ",".join(f"xi_{j + 1}" for j in range(d))
            + ","
            + ",".join(f"obj_{j + 1}" for j in range(k))
        )
        lines = [header]
        for t, xi, obj in zip(self.ts, self.xis, self.objectives):
            cells = [str(t)]
            cells += [repr(float(v)) for v in np.atleast_1d(xi)]
            cells += [repr(float(v)) for v in np.atleast_1d(obj)]
            lines.append(",".join(cells))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def robbins_monro(
    objective: Callable[[np.ndarray, int], np.ndarray],
    x0: Sequence[float],
    config: SAConfig,
    sign: int = +1,
) -> FitTrace:
    """Run the clamped Robbins-Monro recursion until the update stalls.

    ``objective(xi, t)`` returns the (possibly noisy) criterion value at the
    current iterate; components update independently.  Iterates are clamped
    below at 1e-6 to keep the family parameters valid.  Stopping requires
    both t >= min_iter and max-component |update| < epsilon; running out of
    iterations is reported via ``reason`` rather than raised, because a
    max-iterations iterate is still usable.
    """
    xi = np.asarray(x0, dtype=float).copy()
    ts: List[int] = []
    xis: List[np.ndarray] = []
    objs: List[np.ndarray] = []
    reason = "max-iterations"
    for t in range(1, config.max_iter + 1):
        w = config.step(t)
        f = np.atleast_1d(np.asarray(objective(xi, t), dtype=float))
        new = np.maximum(xi + sign * w * f, _XI_FLOOR)
        delta = float(np.max(np.abs(new - xi)))
        xi = new
        ts.append(t)
        xis.append(xi.copy())
        objs.append(f.copy())
        if config.verbose:
            print(
                f"t={t} xi={np.array2string(xi, precision=6)} "
                f"obj={np.array2string(f, precision=6)} delta={delta:.3e}",
                file=sys.stderr,
            )
        if t >= config.min_iter and delta < config.epsilon:
            reason = "converged"
            break
    return FitTrace(ts=ts, xis=xis, objectives=objs, xi_final=xi.copy(), reason=reason)


def f_hat(
    family,
    contour: PossibilityContour,
    alpha: float,
    k: int,
    rng: np.random.Generator,
    eval_rng: Optional[Callable[[int], np.random.Generator]] = None,
    failure_count: Optional[list] = None,
) -> float:
    """Monte-Carlo credal-mass criterion at the current family.

    Draws k parameters from the family and returns
    mean(contour > alpha) - (1 - alpha).  A draw whose contour evaluation
    fails counts as *outside* the cut, which can only push the fitted spread
    up (conservative); failures are tallied into ``failure_count[0]`` when a
    one-element list is supplied.
    """
    draws = np.atleast_2d(sample(family, k, rng))
    if contour.evaluate_batch is not None and contour.seed is None:
        vals = np.asarray(contour.evaluate_batch(draws, None), dtype=float)
    else:
        vals = np.empty(k)
        for j in range(k):
            r = eval_rng(j) if eval_rng is not None else rng
            try:
                vals[j] = contour.evaluate(draws[j], r)
            except Exception:
                vals[j] = -np.inf
                if failure_count is not None:
                    failure_count[0] += 1
    inside = np.where(np.isnan(vals), False, vals > alpha)
    return float(np.mean(inside) - (1.0 - alpha))


def _default_contour(
    model: ModelSpec, data: Dataset, config: SAConfig
) -> PossibilityContour:
    return make_mc_contour(model, data, m=config.m_inner, seed=config.seed)


def _fit_credal(base, contour: PossibilityContour, config: SAConfig, sign: int):
    failures = [0]

    def objective(xi: np.ndarray, t: int) -> float:
        fam = base.with_xi(float(xi[0]))
        draw_rng = derive_rng(config.seed, SA_TAG, t)
        return f_hat(
            fam,
            contour,
            config.alpha,
            config.k_outer,
            draw_rng,
            eval_rng=lambda j: derive_rng(config.seed, SA_TAG, t, j + 1),
            failure_count=failures,
        )

    trace = robbins_monro(objective, [1.0], config, sign=sign)
    trace.failures = failures[0]
    return base.with_xi(float(trace.xi_final[0])), trace


def fit_scalar(
    model: ModelSpec,
    data: Dataset,
    config: SAConfig,
    contour: Optional[PossibilityContour] = None,
) -> Tuple[GaussianScalarFamily, FitTrace]:
    """Fit the single-spread Gaussian family to a model's contour.

    When ``contour`` is omitted the target is the model's Monte-Carlo contour
    with m = config.m_inner simulations per evaluation, seeded from the
    config so the whole fit is reproducible.
    """
    theta_hat, info = mle_and_information(model, data)
    if contour is None:
        contour = _default_contour(model, data, config)
    base = GaussianScalarFamily(theta_hat=theta_hat, info=info, xi=1.0)
    return _fit_credal(base, contour, config, sign=+1)


def fit_scalar_anchored(
    theta_hat: np.ndarray,
    info: np.ndarray,
    contour: PossibilityContour,
    config: SAConfig,
) -> Tuple[GaussianScalarFamily, FitTrace]:
    """fit_scalar against an explicit anchor and target (no model needed)."""
    base = GaussianScalarFamily(
        theta_hat=np.atleast_1d(np.asarray(theta_hat, dtype=float)),
        info=np.atleast_2d(np.asarray(info, dtype=float)),
        xi=1.0,
    )
    return _fit_credal(base, contour, config, sign=+1)


def _fit_boundary(base, contour: PossibilityContour, config: SAConfig):
    d = base.theta_hat.size
    failures = [0]

    def objective(xi: np.ndarray, t: int) -> np.ndarray:
        fam = base.with_xi(xi)
        pts = boundary_points(fam, config.alpha).reshape(2 * d, d)
        if contour.evaluate_batch is not None and contour.seed is None:
            vals = np.asarray(contour.evaluate_batch(pts, None), dtype=float)
        else:
            vals = np.empty(2 * d)
            for j in range(2 * d):
                r = derive_rng(config.seed, SA_TAG, t, j + 1)
                try:
                    vals[j] = contour.evaluate(pts[j], r)
                except Exception:
                    vals[j] = 0.0
                    failures[0] += 1
        vals = np.where(np.isnan(vals), 0.0, vals)
        pair = vals.reshape(d, 2)
        return np.max(pair, axis=1) - config.alpha

    trace = robbins_monro(objective, np.ones(d), config, sign=+1)
    trace.failures = failures[0]
    return base.with_xi(trace.xi_final), trace


def fit_vector(
    model: ModelSpec,
    data: Dataset,
    config: SAConfig,
    contour: Optional[PossibilityContour] = None,
) -> Tuple[GaussianVectorFamily, FitTrace]:
    """Fit the per-axis Gaussian family by matching contour values at the 2d
    points where the credal ellipsoid touches its principal axes.

    Each iteration costs exactly 2d contour evaluations, which is what makes
    this variant usable when every evaluation is itself a Monte-Carlo run.
    """
    theta_hat, info = mle_and_information(model, data)
    if contour is None:
        contour = _default_contour(model, data, config)
    base = GaussianVectorFamily(
        theta_hat=theta_hat, info=info, xi=np.ones(theta_hat.size)
    )
    return _fit_boundary(base, contour, config)


def fit_vector_anchored(
    theta_hat: np.ndarray,
    info: np.ndarray,
    contour: PossibilityContour,
    config: SAConfig,
) -> Tuple[GaussianVectorFamily, FitTrace]:
    """fit_vector against an explicit anchor and target (no model needed)."""
    th = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    base = GaussianVectorFamily(
        theta_hat=th,
        info=np.atleast_2d(np.asarray(info, dtype=float)),
        xi=np.ones(th.size),
    )
    return _fit_boundary(base, contour, config)


def fit_dirichlet(
    model: ModelSpec,
    data: Dataset,
    config: SAConfig,
    contour: Optional[PossibilityContour] = None,
) -> Tuple[DirichletFamily, FitTrace]:
    """Fit the Dirichlet family (mean fixed at the observed proportions) to a
    multinomial contour.  Spread *shrinks* as xi grows — the concentration is
    n * xi * mean — so the update direction is flipped.
    """
    theta_hat, _ = mle_and_information(model, data)
    n = model.meta.get("sample_size", None)
    if n is None:
        n = data.n
    if contour is None:
        contour = _default_contour(model, data, config)
    base = DirichletFamily(mean=theta_hat, n=float(n), xi=1.0)
    return _fit_credal(base, contour, config, sign=-1)
