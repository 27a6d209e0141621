"""Replicated simulation studies over possibility contours.

Three study types share one scenario description: empirical validity checks
(the distribution of the contour evaluated at the true parameter), calibration
curves for the possibility assigned to fixed true hypotheses, and a
timing/accuracy comparison of the naive Monte Carlo contour against a fitted
variational family on a common grid.

Randomness contract
-------------------
Every stream is derived from the scenario's master seed, so reports are
reproducible bit-for-bit regardless of thread count or completion order.  For
replication ``r``:

    data stream          derive_rng(seed, CAL_TAG, r, 1)
    child seed           derive_rng(seed, CAL_TAG, r, 2).integers(2**63)
    timing child seed    derive_rng(seed, CAL_TAG, r, 3, METHODS.index(method))
                         .integers(2**63)
    hypothesis search    derive_rng(seed, CAL_TAG, r, 4, k).integers(2**63)

The child seed seeds the replication's contour object or stochastic fit.  The
timing study keys its child stream by the contour *method* rather than by
pair position, so comparing a method against itself reproduces identical
contours (and an exactly zero L1 distance).

Wall-clock figures cover contour construction and evaluation only — dataset
generation and process startup are excluded — and the timing study runs both
methods sequentially in the same process so the ratio is meaningful.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from time import perf_counter
from typing import Optional, Sequence

import numpy as np

from ._rng import CAL_TAG, derive_rng
from .contours import (
    AxisSpec,
    grid_eval,
    make_exact_binomial,
    make_mc_contour,
)
from .families import (
    GaussianScalarFamily,
    GaussianVectorFamily,
    gaussian_contour_object,
)
from .inference import Hypothesis, upper_probability
from .models import (
    Dataset,
    ModelSpec,
    log_reparam,
    mle_and_information,
)
from . import models as _models
from .nuisance import (
    kaplan_meier_swapped,
    make_censored_contour,
    make_empirical_risk_contour,
    quantile_risk_spec,
)
from .sa import SAConfig, fit_scalar, fit_vector

__all__ = [
    "METHODS",
    "DEFAULT_ALPHA_GRID",
    "POISSON_DESIGN_SEED",
    "Scenario",
    "ScenarioError",
    "StudyError",
    "CalibrationReport",
    "HypothesisCalibrationResult",
    "TimingAccuracyResult",
    "build_model",
    "model_from_id",
    "empirical_cdf",
    "poisson_study_design",
    "validity_study",
    "hypothesis_calibration",
    "timing_accuracy_study",
]

#: contour-construction methods a scenario may name
METHODS = (
    "naive",
    "variational-scalar",
    "variational-vector",
    "bootstrap",
    "censored",
)

#: default levels for reported empirical CDFs: 0.01, 0.02, ..., 0.99
DEFAULT_ALPHA_GRID = np.round(np.arange(1, 100) / 100.0, 2)

#: seed for the fixed covariate matrix of the Poisson regression study
POISSON_DESIGN_SEED = 0x706F6973


class ScenarioError(ValueError):
    """A study configuration that cannot be run as described."""


class StudyError(RuntimeError):
    """Too many replications failed for the report to be trustworthy."""

    def __init__(self, message: str, failures: Sequence = ()):
        super().__init__(message)
        self.failures = tuple(failures)


# ---------------------------------------------------------------------------
# the fixed Poisson study design
# ---------------------------------------------------------------------------


def poisson_study_design(
    n: int, seed: int = POISSON_DESIGN_SEED, correlation: float = 0.6
) -> np.ndarray:
    """Intercept plus two correlated covariates, generated once per (n, seed).

    Each covariate column is scaled to sum zero and mean square one, then held
    fixed across every replication of a study; regenerating with the same
    arguments reproduces the matrix exactly.
    """
    n = int(n)
    if n < 3:
        raise ValueError("the study design needs at least 3 observations")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), n)))
    cov = np.array([[1.0, correlation], [correlation, 1.0]])
    z = rng.multivariate_normal(np.zeros(2), cov, size=n)
    z = z - z.mean(axis=0)
    z = z / np.sqrt(np.mean(z * z, axis=0))
    return np.column_stack([np.ones(n), z])


# ---------------------------------------------------------------------------
# model registry: id -> (builder, domain check)
# ---------------------------------------------------------------------------


def _poisson_design_for(scenario) -> np.ndarray:
    kw = scenario.model_kwargs
    if "design" in kw:
        design = np.asarray(kw["design"], dtype=float)
        if design.ndim != 2 or (
            scenario.n is not None and design.shape[0] != scenario.n
        ):
            raise ScenarioError("design must be an (n, p) matrix")
        return design
    if scenario.n is None:
        raise ScenarioError(
            "poisson-loglinear needs n or an explicit design matrix"
        )
    return poisson_study_design(
        scenario.n, seed=int(kw.get("design_seed", POISSON_DESIGN_SEED))
    )


def _dom_probability(th, scn):
    if th.size != 1 or not 0.0 < th[0] < 1.0:
        return "a single success probability strictly inside (0, 1)"
    return None


def _dom_correlation(th, scn):
    if th.size != 1 or not -1.0 < th[0] < 1.0:
        return "a single correlation strictly inside (-1, 1)"
    return None


def _dom_two_positive(th, scn):
    if th.size != 2 or not np.all(th > 0.0):
        return "two strictly positive parameters"
    return None


def _dom_location_scale(th, scn):
    if th.size != 2 or not th[1] > 0.0:
        return "a location and a strictly positive variance"
    return None


def _dom_length_n(th, scn):
    if th.size != scn.n:
        return f"a mean vector of length n = {scn.n}"
    return None


def _dom_glm(th, scn):
    p = _poisson_design_for(scn).shape[1]
    if th.size != p:
        return f"a coefficient vector of length {p}"
    return None


def _dom_logistic(th, scn):
    if "design" not in scn.model_kwargs:
        return "a design matrix under model_kwargs['design']"
    p = np.asarray(scn.model_kwargs["design"]).shape[1]
    if th.size != p:
        return f"a coefficient vector of length {p}"
    return None


def _lasso_lam(scn):
    sigma = float(scn.model_kwargs.get("sigma", 1.0))
    if "lam" in scn.model_kwargs:
        return sigma, float(scn.model_kwargs["lam"])
    if scn.n is None:
        raise ScenarioError(
            "normal-means-lasso needs n or an explicit model_kwargs['lam']"
        )
    return sigma, math.sqrt(sigma * sigma * math.log(scn.n))


_REGISTRY = {
    "binomial": (lambda scn: _models.binomial(), _dom_probability),
    "bvn-correlation": (lambda scn: _models.bvn_correlation(),
                        _dom_correlation),
    "gamma": (lambda scn: _models.gamma_shape_scale(), _dom_two_positive),
    "gamma-mean-shape": (lambda scn: _models.gamma_mean_shape(),
                         _dom_two_positive),
    "lognormal": (lambda scn: _models.lognormal(), _dom_location_scale),
    "lognormal-censored": (lambda scn: _models.lognormal_censored(),
                           _dom_location_scale),
    "normal-means": (
        lambda scn: _models.normal_means(
            float(scn.model_kwargs.get("sigma", 1.0))
        ),
        _dom_length_n,
    ),
    "normal-means-lasso": (
        lambda scn: _models.normal_means_lasso(*_lasso_lam(scn)),
        _dom_length_n,
    ),
    "poisson-loglinear": (
        lambda scn: _models.poisson_loglinear(_poisson_design_for(scn)),
        _dom_glm,
    ),
    "logistic": (
        lambda scn: _models.logistic_regression(
            np.asarray(scn.model_kwargs["design"], dtype=float)
        ),
        _dom_logistic,
    ),
}


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """One replicated study: a model, a truth, and a contour method.

    ``truth`` is the parameter the data are generated from and the contour is
    evaluated at; for the ``bootstrap`` method it is instead the functional
    value under scrutiny (e.g. the target quantile) and ``data_params`` names
    the generating parameter.  ``m`` is the Monte Carlo size of naive and
    censored contour evaluations (and of the inner evaluations in the timing
    study); the variational methods read their own ``sa.m_inner``.  With
    ``log_params`` the model is refit on log-parameters and the contour is
    evaluated at ``log(truth)``.
    """

    model_id: str
    truth: tuple
    n: int
    reps: int
    method: str
    seed: int
    sa: Optional[SAConfig] = None
    grid: Optional[tuple] = None
    m: int = 500
    log_params: bool = False
    data_params: Optional[tuple] = None
    model_kwargs: dict = field(default_factory=dict)

    def __post_init__(self):
        coerce = lambda v: tuple(
            float(t) for t in np.atleast_1d(np.asarray(v, dtype=float))
        )
        object.__setattr__(self, "truth", coerce(self.truth))
        if self.data_params is not None:
            object.__setattr__(self, "data_params", coerce(self.data_params))
        object.__setattr__(self, "model_kwargs", dict(self.model_kwargs))
        for name in ("n", "reps", "seed", "m"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.grid is not None:
            axes = tuple(self.grid)
            if not axes or not all(isinstance(a, AxisSpec) for a in axes):
                raise ScenarioError("grid must be a sequence of AxisSpec")
            object.__setattr__(self, "grid", axes)

        if self.model_id not in _REGISTRY:
            raise ScenarioError(
                f"unknown model id {self.model_id!r}; "
                f"expected one of {sorted(_REGISTRY)}"
            )
        if self.method not in METHODS:
            raise ScenarioError(
                f"unknown contour method {self.method!r}; "
                f"expected one of {METHODS}"
            )
        if self.reps < 1:
            raise ScenarioError("reps must be at least 1")
        if self.n < 1 or self.m < 1:
            raise ScenarioError("n and m must be at least 1")
        if self.method.startswith("variational"):
            if not isinstance(self.sa, SAConfig):
                raise ScenarioError(
                    f"method {self.method!r} requires an SAConfig"
                )
        if self.method == "bootstrap":
            tau = self.model_kwargs.get("tau")
            if tau is None or not 0.0 < float(tau) < 1.0:
                raise ScenarioError(
                    "bootstrap method needs model_kwargs['tau'] in (0, 1)"
                )
            if self.data_params is None:
                raise ScenarioError(
                    "bootstrap method needs data_params (the generating "
                    "parameter; truth is the functional value)"
                )
            if len(self.truth) != 1 or not np.isfinite(self.truth[0]):
                raise ScenarioError(
                    "bootstrap truth must be a single finite functional value"
                )
        if self.method == "censored":
            if self.model_id != "lognormal-censored":
                raise ScenarioError(
                    "censored method requires the lognormal-censored model"
                )
            limits = np.asarray(
                self.model_kwargs.get("limits", ()), dtype=float
            ).ravel()
            if limits.size == 0 or not np.all(
                np.isfinite(limits) & (limits > 0.0)
            ):
                raise ScenarioError(
                    "censored method needs positive detection limits under "
                    "model_kwargs['limits']"
                )
        if self.log_params:
            if self.method in ("bootstrap", "censored"):
                raise ScenarioError(
                    f"log_params is not meaningful for the {self.method} "
                    "method"
                )
            if not all(t > 0.0 for t in self.truth):
                raise ScenarioError(
                    "log_params needs strictly positive truth coordinates"
                )

        target = self.data_params if self.method == "bootstrap" else self.truth
        arr = np.asarray(target, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ScenarioError("truth outside the model domain: not finite")
        msg = _REGISTRY[self.model_id][1](arr, self)
        if msg is not None:
            raise ScenarioError(
                f"truth outside the model domain: {self.model_id} needs {msg}"
            )

    @property
    def truth_eval(self) -> np.ndarray:
        """The point the contour is evaluated at (log scale if requested)."""
        arr = np.asarray(self.truth, dtype=float)
        return np.log(arr) if self.log_params else arr

    # -- run-config (JSON) round trip ---------------------------------------

    def to_config(self) -> dict:
        sa = None
        if self.sa is not None:
            sa = {
                "seed": self.sa.seed,
                "alpha": self.sa.alpha,
                "k_outer": self.sa.k_outer,
                "m_inner": self.sa.m_inner,
                "epsilon": self.sa.epsilon,
                "min_iter": self.sa.min_iter,
                "max_iter": self.sa.max_iter,
            }
        grid = None
        if self.grid is not None:
            grid = [
                {"lo": a.lo, "hi": a.hi, "count": a.count, "name": a.name}
                for a in self.grid
            ]
        return {
            "model": self.model_id,
            "truth": list(self.truth),
            "n": self.n,
            "reps": self.reps,
            "method": self.method,
            "seed": self.seed,
            "m": self.m,
            "log_params": self.log_params,
            "data_params": None
            if self.data_params is None
            else list(self.data_params),
            "model_kwargs": dict(self.model_kwargs),
            "sa": sa,
            "grid": grid,
        }

    @classmethod
    def from_config(cls, config: dict) -> "Scenario":
        for key in ("model", "truth", "n", "reps", "method", "seed"):
            if key not in config:
                raise ScenarioError(f"run config missing required key {key!r}")
        sa_doc = config.get("sa")
        sa = None
        if sa_doc is not None:
            sa = SAConfig(
                seed=int(sa_doc.get("seed", 0)),
                alpha=float(sa_doc.get("alpha", 0.1)),
                k_outer=int(sa_doc.get("k_outer", 200)),
                m_inner=int(sa_doc.get("m_inner", 500)),
                epsilon=float(sa_doc.get("epsilon", 0.005)),
                min_iter=int(sa_doc.get("min_iter", 5)),
                max_iter=int(sa_doc.get("max_iter", 500)),
            )
        grid_doc = config.get("grid")
        grid = None
        if grid_doc is not None:
            grid = tuple(
                AxisSpec(
                    lo=float(g["lo"]),
                    hi=float(g["hi"]),
                    count=int(g["count"]),
                    name=g.get("name"),
                )
                for g in grid_doc
            )
        return cls(
            model_id=config["model"],
            truth=tuple(config["truth"]),
            n=int(config["n"]),
            reps=int(config["reps"]),
            method=config["method"],
            seed=int(config["seed"]),
            sa=sa,
            grid=grid,
            m=int(config.get("m", 500)),
            log_params=bool(config.get("log_params", False)),
            data_params=config.get("data_params"),
            model_kwargs=dict(config.get("model_kwargs", {})),
        )


class _ModelEnv:
    """The slice of a scenario the registry builders read (n, model_kwargs)."""

    def __init__(self, n, model_kwargs):
        self.n = n
        self.model_kwargs = model_kwargs


def model_from_id(
    model_id: str,
    n: Optional[int] = None,
    model_kwargs: Optional[dict] = None,
    log_params: bool = False,
) -> ModelSpec:
    """Instantiate a registered model outside of any scenario."""
    if model_id not in _REGISTRY:
        raise ScenarioError(
            f"unknown model id {model_id!r}; "
            f"expected one of {sorted(_REGISTRY)}"
        )
    env = _ModelEnv(
        None if n is None else int(n), dict(model_kwargs or {})
    )
    base = _REGISTRY[model_id][0](env)
    return log_reparam(base) if log_params else base


def build_model(scenario: Scenario) -> ModelSpec:
    """The scenario's model, wrapped to log-parameters when requested."""
    return model_from_id(
        scenario.model_id,
        scenario.n,
        scenario.model_kwargs,
        scenario.log_params,
    )


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def empirical_cdf(values, alphas) -> np.ndarray:
    """P{value <= alpha} under the empirical distribution of ``values``."""
    vals = np.sort(np.asarray(values, dtype=float).ravel())
    if vals.size == 0:
        raise ValueError("empirical CDF needs at least one value")
    return np.searchsorted(
        vals, np.asarray(alphas, dtype=float), side="right"
    ) / vals.size


def _json_floats(arr) -> list:
    return [None if not np.isfinite(v) else float(v) for v in arr]


@dataclass
class CalibrationReport:
    """Result of a validity study.

    ``values`` holds the sorted contour-at-truth draws from the successful
    replications; ``timings`` has one wall-clock entry per replication (NaN
    where the replication failed).
    """

    scenario: dict
    values: np.ndarray
    alphas: np.ndarray
    cdf: np.ndarray
    timings: np.ndarray
    failures: tuple = ()
    l1: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        self.alphas = np.asarray(self.alphas, dtype=float).ravel()
        self.cdf = np.asarray(self.cdf, dtype=float).ravel()
        self.timings = np.asarray(self.timings, dtype=float).ravel()
        self.failures = tuple(
            (int(i), str(msg)) for i, msg in self.failures
        )
        if self.l1 is not None:
            self.l1 = np.asarray(self.l1, dtype=float).ravel()
        if np.any(np.diff(self.values) < 0):
            raise ValueError("contour-at-truth values must be sorted")
        if self.alphas.shape != self.cdf.shape:
            raise ValueError("alphas and cdf must have matching lengths")
        if np.any((self.cdf < 0.0) | (self.cdf > 1.0)):
            raise ValueError("empirical CDF values must lie in [0, 1]")
        if np.any(np.diff(self.cdf) < 0):
            raise ValueError("empirical CDF must be nondecreasing in alpha")

    def cdf_at(self, alpha: float) -> float:
        """Exact empirical CDF at one level (not interpolated from the grid)."""
        return float(
            np.searchsorted(self.values, float(alpha), side="right")
        ) / self.values.size

    def to_json_dict(self, include_timings: bool = True) -> dict:
        doc = {
            "report": "validity",
            "scenario": self.scenario,
            "alphas": [float(a) for a in self.alphas],
            "cdf": [float(c) for c in self.cdf],
            "values": [float(v) for v in self.values],
            "failures": [[i, msg] for i, msg in self.failures],
        }
        if include_timings:
            doc["timings"] = _json_floats(self.timings)
        if self.l1 is not None:
            doc["l1"] = _json_floats(self.l1)
        return doc

    def write_json(self, path, include_timings: bool = True) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(include_timings), fh, indent=2)
            fh.write("\n")

    def write_csv(self, path) -> None:
        lines = ["alpha,cdf"]
        for a, c in zip(self.alphas, self.cdf):
            lines.append(f"{float(a)!r},{float(c)!r}")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass
class HypothesisCalibrationResult:
    """Per-hypothesis CDF curves of the assigned possibility at the truth."""

    scenario: dict
    hypotheses: tuple
    alphas: np.ndarray
    values: tuple
    curves: np.ndarray
    timings: np.ndarray
    failures: tuple = ()

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float).ravel()
        self.curves = np.atleast_2d(np.asarray(self.curves, dtype=float))
        self.values = tuple(
            np.asarray(v, dtype=float).ravel() for v in self.values
        )
        self.timings = np.asarray(self.timings, dtype=float).ravel()
        self.failures = tuple(
            (int(i), str(msg)) for i, msg in self.failures
        )
        if self.curves.shape != (len(self.hypotheses), self.alphas.size):
            raise ValueError("curves must be (hypotheses, alphas)-shaped")
        if np.any((self.curves < 0.0) | (self.curves > 1.0)):
            raise ValueError("empirical CDF values must lie in [0, 1]")
        if np.any(np.diff(self.curves, axis=1) < 0):
            raise ValueError("empirical CDF must be nondecreasing in alpha")

    def to_json_dict(self, include_timings: bool = True) -> dict:
        doc = {
            "report": "hypothesis-calibration",
            "scenario": self.scenario,
            "hypotheses": list(self.hypotheses),
            "alphas": [float(a) for a in self.alphas],
            "curves": [[float(c) for c in row] for row in self.curves],
            "values": [[float(v) for v in vals] for vals in self.values],
            "failures": [[i, msg] for i, msg in self.failures],
        }
        if include_timings:
            doc["timings"] = _json_floats(self.timings)
        return doc

    def write_json(self, path, include_timings: bool = True) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(include_timings), fh, indent=2)
            fh.write("\n")

    def write_csv(self, path) -> None:
        k = len(self.hypotheses)
        lines = ["alpha," + ",".join(f"cdf_{j + 1}" for j in range(k))]
        for i, a in enumerate(self.alphas):
            cells = [repr(float(a))]
            cells += [repr(float(self.curves[j, i])) for j in range(k)]
            lines.append(",".join(cells))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass
class TimingAccuracyResult:
    """Naive-vs-variational comparison on shared datasets and grids."""

    naive_scenario: dict
    approx_scenario: dict
    relative_time: float
    mean_l1: float
    ratios: np.ndarray
    l1: np.ndarray
    naive_seconds: np.ndarray
    approx_seconds: np.ndarray

    def __post_init__(self):
        for name in ("ratios", "l1", "naive_seconds", "approx_seconds"):
            setattr(
                self, name, np.asarray(getattr(self, name), dtype=float)
            )

    def to_json_dict(self) -> dict:
        return {
            "report": "timing-accuracy",
            "naive_scenario": self.naive_scenario,
            "approx_scenario": self.approx_scenario,
            "relative_time": float(self.relative_time),
            "mean_l1": float(self.mean_l1),
            "ratios": _json_floats(self.ratios),
            "l1": _json_floats(self.l1),
            "naive_seconds": _json_floats(self.naive_seconds),
            "approx_seconds": _json_floats(self.approx_seconds),
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


# ---------------------------------------------------------------------------
# replication machinery
# ---------------------------------------------------------------------------


def _child_seed(master: int, *key: int) -> int:
    return int(derive_rng(master, CAL_TAG, *key).integers(2 ** 63))


def _simulate(scenario: Scenario, model: ModelSpec,
              rng: np.random.Generator) -> Dataset:
    if scenario.method == "censored":
        mu, v = scenario.truth
        y = np.exp(rng.normal(mu, math.sqrt(v), size=scenario.n))
        limits = np.resize(
            np.asarray(scenario.model_kwargs["limits"], dtype=float),
            scenario.n,
        )
        return Dataset(
            responses=np.maximum(y, limits),
            censor=(y >= limits).astype(int),
        )
    if scenario.method == "bootstrap":
        theta = np.asarray(scenario.data_params, dtype=float)
    else:
        theta = scenario.truth_eval
    return model.sample(theta, scenario.n, rng)


def _replicate_contour(scenario: Scenario, model: ModelSpec, data: Dataset,
                       child: int):
    """This replication's contour object (and fitted family, if any)."""
    method = scenario.method
    if method == "naive":
        if scenario.model_id == "binomial":
            # the enumeration contour is this model's exact IM contour;
            # Monte Carlo would only add noise around it
            return make_exact_binomial(data), None
        return make_mc_contour(model, data, scenario.m, seed=child), None
    if method in ("variational-scalar", "variational-vector"):
        config = replace(scenario.sa, seed=child)
        fit = fit_scalar if method == "variational-scalar" else fit_vector
        family, _ = fit(model, data, config)
        return gaussian_contour_object(family), family
    if method == "bootstrap":
        kw = scenario.model_kwargs
        spec = quantile_risk_spec(float(kw["tau"]), int(kw.get("B", 500)))
        return make_empirical_risk_contour(data, spec, seed=child), None
    ghat = kaplan_meier_swapped(data)
    return (
        make_censored_contour(model, data, ghat, scenario.m, seed=child),
        None,
    )


def _run_replications(reps: int, threads: int, fn):
    """Index-ordered results; identical for any thread count."""
    out = [None] * reps
    threads = int(threads or 1)
    if threads > 1 and reps > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(fn, r): r for r in range(reps)}
            for fut in as_completed(futures):
                out[futures[fut]] = fut.result()
    else:
        for r in range(reps):
            out[r] = fn(r)
    return out


def _guarded(fn):
    def safe(r):
        try:
            return (*fn(r), None)
        except Exception as exc:  # recorded, not fatal
            return np.nan, np.nan, f"{type(exc).__name__}: {exc}"

    return safe


def _check_failures(failures, reps):
    if len(failures) > 0.05 * reps:
        raise StudyError(
            f"{len(failures)} of {reps} replications failed (more than 5%); "
            f"first failure: {failures[0][1]}",
            failures=failures,
        )


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------


def validity_study(
    scenario: Scenario, alphas=None, threads: int = 1
) -> CalibrationReport:
    """Distribution of the contour at the truth over ``reps`` replications.

    Per-replication failures are recorded on the report rather than raised;
    more than 5% of them abort the study with :class:`StudyError`.
    """
    model = build_model(scenario)
    alphas = np.asarray(
        DEFAULT_ALPHA_GRID if alphas is None else alphas, dtype=float
    )

    def rep(r: int):
        data = _simulate(
            scenario, model, derive_rng(scenario.seed, CAL_TAG, r, 1)
        )
        child = _child_seed(scenario.seed, r, 2)
        start = perf_counter()
        contour, _ = _replicate_contour(scenario, model, data, child)
        value = float(contour(scenario.truth_eval))
        return value, perf_counter() - start

    rows = _run_replications(scenario.reps, threads, _guarded(rep))
    failures = tuple(
        (r, msg) for r, (_, _, msg) in enumerate(rows) if msg is not None
    )
    _check_failures(failures, scenario.reps)
    values = np.sort([v for v, _, msg in rows if msg is None])
    timings = np.array([t for _, t, _ in rows], dtype=float)
    return CalibrationReport(
        scenario=scenario.to_config(),
        values=values,
        alphas=alphas,
        cdf=empirical_cdf(values, alphas),
        timings=timings,
        failures=failures,
    )


def _describe_hypothesis(h: Hypothesis) -> str:
    if h.kind == "half-space":
        return (
            f"half-space a.theta > b with a={[float(x) for x in h.a]}, "
            f"b={float(h.b)}"
        )
    if h.kind in ("box", "box-complement"):
        return f"{h.kind} bounds={h.bounds.tolist()}"
    if h.kind == "finite":
        return f"finite set of {h.points.shape[0]} points"
    return "predicate"


def _proposal_family(model: ModelSpec, data: Dataset):
    theta_hat, info = mle_and_information(model, data)
    if theta_hat.size == 1:
        return GaussianScalarFamily(theta_hat=theta_hat, info=info, xi=1.0)
    return GaussianVectorFamily(
        theta_hat=theta_hat, info=info, xi=np.ones(theta_hat.size)
    )


def hypothesis_calibration(
    scenario: Scenario,
    hypotheses: Sequence[Hypothesis],
    alphas=None,
    threads: int = 1,
) -> HypothesisCalibrationResult:
    """CDF curves of the possibility assigned to fixed true hypotheses.

    Every hypothesis must contain the scenario truth — the study measures
    calibration on true hypotheses, so a false one is a configuration error.
    """
    hyps = tuple(hypotheses)
    if not hyps:
        raise ScenarioError("needs at least one hypothesis")
    model = build_model(scenario)
    dim = model.dim if model.dim is not None else scenario.n
    truth_pt = np.atleast_2d(scenario.truth_eval)
    for k, h in enumerate(hyps):
        if h.dim != dim:
            raise ScenarioError(
                f"hypothesis {k + 1} has dimension {h.dim}, expected {dim}"
            )
        if not bool(h.contains(truth_pt)[0]):
            raise ScenarioError(
                f"hypothesis {k + 1} ({_describe_hypothesis(h)}) is not "
                "true at the scenario truth"
            )
    alphas = np.asarray(
        DEFAULT_ALPHA_GRID if alphas is None else alphas, dtype=float
    )

    def rep(r: int):
        data = _simulate(
            scenario, model, derive_rng(scenario.seed, CAL_TAG, r, 1)
        )
        child = _child_seed(scenario.seed, r, 2)
        start = perf_counter()
        contour, family = _replicate_contour(scenario, model, data, child)
        if family is None:
            family = _proposal_family(model, data)
        vals = np.empty(len(hyps))
        for k, h in enumerate(hyps):
            result = upper_probability(
                contour,
                h,
                family=family,
                seed=_child_seed(scenario.seed, r, 4, k),
            )
            vals[k] = min(max(result.value, 0.0), 1.0)
        return vals, perf_counter() - start

    rows = _run_replications(scenario.reps, threads, _guarded(rep))
    failures = tuple(
        (r, msg) for r, (_, _, msg) in enumerate(rows) if msg is not None
    )
    _check_failures(failures, scenario.reps)
    ok = np.array([v for v, _, msg in rows if msg is None], dtype=float)
    values = tuple(np.sort(ok[:, k]) for k in range(len(hyps)))
    curves = np.vstack([empirical_cdf(v, alphas) for v in values])
    timings = np.array([t for _, t, _ in rows], dtype=float)
    return HypothesisCalibrationResult(
        scenario=scenario.to_config(),
        hypotheses=tuple(_describe_hypothesis(h) for h in hyps),
        alphas=alphas,
        values=values,
        curves=curves,
        timings=timings,
        failures=failures,
    )


_TIMEABLE = ("naive", "variational-scalar", "variational-vector")


def timing_accuracy_study(
    naive_scenario: Scenario, approx_scenario: Scenario
) -> TimingAccuracyResult:
    """Wall-time ratio and L1 distance between two contour methods.

    Both scenarios must describe the same model, truth, sample size,
    replication count, master seed, and evaluation grid; each replication
    generates one shared dataset, evaluates both contours on the grid, and
    reports naive-time / approx-time along with the Riemann-sum L1 distance.
    Replications run sequentially so the wall times stay comparable.
    """
    pair = (naive_scenario, approx_scenario)
    for scn in pair:
        if scn.method not in _TIMEABLE:
            raise ScenarioError(
                f"method {scn.method!r} cannot enter a timing study; "
                f"expected one of {_TIMEABLE}"
            )
        if scn.grid is None:
            raise ScenarioError(
                "timing study scenarios need an evaluation grid"
            )
    for attr in ("model_id", "truth", "n", "reps", "seed", "m",
                 "log_params", "model_kwargs", "grid"):
        a, b = getattr(naive_scenario, attr), getattr(approx_scenario, attr)
        if a != b:
            raise ScenarioError(
                f"timing study scenarios must share {attr}: {a!r} != {b!r}"
            )

    model = build_model(naive_scenario)
    axes = naive_scenario.grid
    volume = float(np.prod([a.hi - a.lo for a in axes]))

    def side_values(scn: Scenario, data: Dataset, child: int):
        if scn.method == "naive":
            start = perf_counter()
            grid = grid_eval(
                make_mc_contour(model, data, scn.m, seed=child), axes
            )
            return grid.values.ravel(), perf_counter() - start
        fit = (
            fit_scalar
            if scn.method == "variational-scalar"
            else fit_vector
        )
        start = perf_counter()
        config = replace(scn.sa, seed=child, m_inner=scn.m)
        family, _ = fit(model, data, config)
        grid = grid_eval(gaussian_contour_object(family), axes)
        return grid.values.ravel(), perf_counter() - start

    ratios = np.empty(naive_scenario.reps)
    l1 = np.empty(naive_scenario.reps)
    naive_seconds = np.empty(naive_scenario.reps)
    approx_seconds = np.empty(naive_scenario.reps)
    for r in range(naive_scenario.reps):
        data = _simulate(
            naive_scenario,
            model,
            derive_rng(naive_scenario.seed, CAL_TAG, r, 1),
        )
        sides = []
        for scn in pair:
            child = _child_seed(
                naive_scenario.seed, r, 3, METHODS.index(scn.method)
            )
            sides.append(side_values(scn, data, child))
        (vals_n, t_n), (vals_a, t_a) = sides
        l1[r] = float(np.mean(np.abs(vals_a - vals_n)) * volume)
        ratios[r] = t_n / t_a
        naive_seconds[r] = t_n
        approx_seconds[r] = t_a
    return TimingAccuracyResult(
        naive_scenario=naive_scenario.to_config(),
        approx_scenario=approx_scenario.to_config(),
        relative_time=float(np.mean(ratios)),
        mean_l1=float(np.mean(l1)),
        ratios=ratios,
        l1=l1,
        naive_seconds=naive_seconds,
        approx_seconds=approx_seconds,
    )
