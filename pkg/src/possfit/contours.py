"""Possibility contours: exact enumeration, Monte Carlo, grids, alpha-cuts.

The central object is :class:`PossibilityContour`, a thin wrapper around an
``evaluate(theta, rng) -> float`` callable plus metadata.  Stochastic
contours carry a seed; every evaluation derives its own Generator from that
seed and either the grid-node index (:meth:`PossibilityContour.eval_at_node`)
or the bit pattern of the point itself (:meth:`PossibilityContour.__call__`),
so values never depend on evaluation order or thread scheduling.

Ties in the Monte Carlo comparison ``R(X, theta) <= R(x, theta)`` are decided
on the log scale with an absolute slack of ``TIE_EPS``, counting ties (and
replicates whose refitting failed) as included — the conservative direction.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special, stats

from ._rng import NODE_TAG, THETA_TAG, derive_rng, theta_key
from .models import Dataset, ModelSpec, log_relative_likelihood

__all__ = [
    "TIE_EPS",
    "PossibilityContour",
    "AxisSpec",
    "ContourGrid",
    "AlphaCut",
    "exact_binomial_contour",
    "make_exact_binomial",
    "mc_contour",
    "make_mc_contour",
    "grid_eval",
    "alpha_cut",
]

TIE_EPS = 1e-9  # log-scale slack for the inclusive tie rule


# ---------------------------------------------------------------------------
# contour objects
# ---------------------------------------------------------------------------


@dataclass
class PossibilityContour:
    """A possibility contour theta -> pi(theta) in [0, 1].

    ``evaluate(theta, rng)`` does the work; ``rng`` is None for
    deterministic contours (seed None) and a derived Generator otherwise.
    ``evaluate_batch(thetas, rng)``, when present, evaluates an (N, dim)
    array of points in one sweep; grids use it only for seedless
    (deterministic) contours, where it cannot change the values.
    """

    kind: str
    dim: int
    evaluate: Callable[[np.ndarray, Optional[np.random.Generator]], float]
    evaluate_batch: Optional[
        Callable[[np.ndarray, Optional[np.random.Generator]], np.ndarray]
    ] = None
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def _point(self, theta) -> np.ndarray:
        th = np.asarray(theta, dtype=float).ravel()
        if self.dim is not None and th.size != self.dim:
            raise ValueError(
                f"{self.kind} contour expects a point of dimension {self.dim}, "
                f"got {th.size}"
            )
        return th

    def __call__(self, theta) -> float:
        """Evaluate at one point; stochastic streams keyed by the point itself."""
        th = self._point(theta)
        rng = (
            None
            if self.seed is None
            else derive_rng(self.seed, THETA_TAG, *theta_key(th))
        )
        return float(self.evaluate(th, rng))

    def eval_at_node(self, theta, index: int) -> float:
        """Evaluate at a grid node; stochastic streams keyed by the node index."""
        th = self._point(theta)
        rng = (
            None if self.seed is None else derive_rng(self.seed, NODE_TAG, int(index))
        )
        return float(self.evaluate(th, rng))


# ---------------------------------------------------------------------------
# exact binomial contour by enumeration
# ---------------------------------------------------------------------------


def exact_binomial_contour(n: int, s_obs: int, theta):
    """P_theta{R(S, theta) <= R(s_obs, theta)} for S ~ binomial(n, theta).

    Exact by enumeration of the n+1 support points, vectorized over theta.
    Values of theta outside [0, 1] give 0.
    """
    n = int(n)
    s_obs = int(s_obs)
    if not 0 <= s_obs <= n:
        raise ValueError("s_obs must lie in {0, ..., n}")
    scalar = np.ndim(theta) == 0
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    valid = (th >= 0.0) & (th <= 1.0)
    tv = np.where(valid, th, 0.5)  # placeholder to keep the math NaN-free
    # probabilities within ~1e-300 of an endpoint overflow scipy's pmf
    # internals; the exact endpoint is the correct limit there anyway
    tv = np.where(tv < 1e-300, 0.0, tv)
    tv = np.where(1.0 - tv < 1e-300, 1.0, tv)

    s = np.arange(n + 1, dtype=float)
    # log R(s; theta) = log L(theta; s) - log L(shat; s), columns over theta
    mle_term = special.xlogy(s, s / n) + special.xlogy(n - s, 1.0 - s / n)
    logrel = (
        special.xlogy(s[:, None], tv[None, :])
        + special.xlogy(n - s[:, None], 1.0 - tv[None, :])
        - mle_term[:, None]
    )
    cutoff = logrel[s_obs]
    include = logrel <= cutoff[None, :] + TIE_EPS
    pmf = stats.binom.pmf(np.arange(n + 1)[:, None], n, tv[None, :])
    vals = np.sum(pmf * include, axis=0)
    vals = np.where(valid, np.minimum(vals, 1.0), 0.0)
    return float(vals[0]) if scalar else vals


def make_exact_binomial(data: Dataset) -> PossibilityContour:
    """Exact possibility contour for the binomial success probability."""
    s_obs = int(np.sum(data.responses))
    n = data.n
    return PossibilityContour(
        kind="exact-discrete",
        dim=1,
        evaluate=lambda th, rng: float(exact_binomial_contour(n, s_obs, th[0])),
        evaluate_batch=lambda thetas, rng: exact_binomial_contour(
            n, s_obs, np.asarray(thetas, dtype=float)[:, 0]
        ),
        meta={"model": "binomial", "n": n, "s_obs": s_obs},
    )


# ---------------------------------------------------------------------------
# naive Monte Carlo contour
# ---------------------------------------------------------------------------


def mc_contour(
    model: ModelSpec,
    data: Dataset,
    theta,
    m: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo contour: share of m datasets simulated under theta whose
    relative likelihood at theta is <= the observed one (ties included).

    Replicates whose refitting machinery fails count as included, and an
    observed value that cannot be computed yields 1 — both choices push the
    estimate upward, never below the exact contour.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    try:
        obs = log_relative_likelihood(model, data, theta)
    except Exception:
        return 1.0
    if np.isnan(obs):
        return 1.0
    m = int(m)
    if model.sim_log_rel_lik is not None:
        sim = np.asarray(model.sim_log_rel_lik(theta, data.n, m, rng), dtype=float)
    else:
        sim = np.empty(m)
        for j in range(m):
            ds = model.sample(theta, data.n, rng)
            try:
                sim[j] = log_relative_likelihood(model, ds, theta)
            except Exception:
                sim[j] = np.nan
    include = np.isnan(sim) | (sim <= obs + TIE_EPS)
    return float(np.mean(include))


def make_mc_contour(
    model: ModelSpec, data: Dataset, m: int, seed: int
) -> PossibilityContour:
    """Monte Carlo possibility contour with reproducible per-node streams."""
    dim = model.dim if model.dim is not None else data.n
    return PossibilityContour(
        kind="monte-carlo",
        dim=dim,
        evaluate=lambda th, rng: mc_contour(model, data, th, m, rng),
        seed=int(seed),
        meta={"model": model.name, "m": int(m)},
    )


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AxisSpec:
    """One grid axis: `count` equally spaced points on [lo, hi]."""

    lo: float
    hi: float
    count: int
    name: Optional[str] = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("axis count must be >= 1")
        if not np.isfinite(self.lo) or not np.isfinite(self.hi) or self.hi < self.lo:
            raise ValueError("axis bounds must be finite with hi >= lo")

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


def _axis_names(axes: Sequence[AxisSpec]) -> list:
    return [a.name if a.name else f"theta_{i + 1}" for i, a in enumerate(axes)]


def _product_nodes(axes: Sequence[AxisSpec]) -> np.ndarray:
    """All grid nodes as an (N, d) array, C order (first axis slowest)."""
    grids = np.meshgrid(*(a.points() for a in axes), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


@dataclass
class ContourGrid:
    """Contour values tabulated on a cartesian product of axes."""

    axes: tuple
    values: np.ndarray  # shaped (axes[0].count, axes[1].count, ...)
    kind: str
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def nodes(self) -> np.ndarray:
        return _product_nodes(self.axes)

    def to_csv(self, path) -> None:
        names = _axis_names(self.axes)
        lines = ["# possibility contour grid", f"# kind={self.kind}"]
        if self.seed is not None:
            lines.append(f"# seed={self.seed}")
        for name, a in zip(names, self.axes):
            lines.append(f"# axis {name}: lo={a.lo!r} hi={a.hi!r} count={a.count}")
        lines.append(",".join(names + ["value"]))
        flat = self.values.ravel()
        for node, v in zip(self.nodes(), flat):
            lines.append(",".join([repr(float(c)) for c in node] + [repr(float(v))]))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    def to_json(self, path) -> None:
        names = _axis_names(self.axes)
        doc = {
            "kind": self.kind,
            "seed": self.seed,
            "axes": [
                {"name": name, "lo": a.lo, "hi": a.hi, "count": a.count}
                for name, a in zip(names, self.axes)
            ],
            "values": [float(v) for v in self.values.ravel()],
            "meta": self.meta,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


def grid_eval(
    contour: PossibilityContour,
    axes: Sequence[AxisSpec],
    parallelism: int = 1,
) -> ContourGrid:
    """Tabulate a contour on a grid; identical output for any parallelism."""
    axes = tuple(axes)
    if contour.dim is not None and len(axes) != contour.dim:
        raise ValueError(
            f"contour has dimension {contour.dim}, got {len(axes)} axes"
        )
    nodes = _product_nodes(axes)
    n_nodes = nodes.shape[0]
    if contour.evaluate_batch is not None and contour.seed is None:
        vals = np.asarray(contour.evaluate_batch(nodes, None), dtype=float).ravel()
        if vals.size != n_nodes:
            raise ValueError("batch evaluation returned a wrong-sized array")
    elif parallelism > 1:
        with ThreadPoolExecutor(max_workers=int(parallelism)) as pool:
            vals = np.fromiter(
                pool.map(contour.eval_at_node, nodes, range(n_nodes)),
                dtype=float,
                count=n_nodes,
            )
    else:
        vals = np.fromiter(
            (contour.eval_at_node(nodes[i], i) for i in range(n_nodes)),
            dtype=float,
            count=n_nodes,
        )
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(
            f"non-finite contour value at node {i} (theta={nodes[i].tolist()})"
        )
    return ContourGrid(
        axes=axes,
        values=vals.reshape(tuple(a.count for a in axes)),
        kind=contour.kind,
        seed=contour.seed,
        meta=dict(contour.meta),
    )


# ---------------------------------------------------------------------------
# alpha-cuts
# ---------------------------------------------------------------------------


@dataclass
class AlphaCut:
    """Grid nodes where the contour exceeds alpha (a confidence region)."""

    alpha: float
    points: np.ndarray  # (k, d)
    values: np.ndarray  # (k,)


def alpha_cut(grid: ContourGrid, alpha: float) -> AlphaCut:
    """{theta on the grid : pi(theta) > alpha}."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    flat = grid.values.ravel()
    mask = flat > alpha
    return AlphaCut(alpha=float(alpha), points=grid.nodes()[mask], values=flat[mask])
