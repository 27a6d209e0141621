"""Command-line front end: JSON run configs in, data artifacts out.

Usage::

    possfit --config run.json [--seed N] [--threads K] [--verbose]

The config is a single JSON document whose ``command`` field selects one of
``contour | fit | calibrate | hypothesis | marginal | choquet``; all other
behavior is driven by config fields (there are no further flags).  ``--seed``
overrides or supplies the master seed, which is otherwise mandatory — no run
ever takes a default from the wall clock.  Exit codes: 0 success, 2
configuration error, 3 numerical failure; diagnostics go to standard error.

Every output file is written to a temporary name and atomically renamed into
place, so failed runs leave no partial outputs.  Each file carries a header
block with the SHA-256 hash of the effective config and the master seed;
rerunning the same config reproduces every output byte-for-byte except for
the single ``generated`` timestamp line.

Randomness contract: with master seed ``s``, simulated datasets draw from
``derive_rng(s, CLI_TAG, 0)``; the contour/fit child seed is
``derive_rng(s, CLI_TAG, 1).integers(2**63)``; the search seed for hypothesis
``k`` is ``derive_rng(s, CLI_TAG, 2, k).integers(2**63)``; marginal and
Choquet computations use keys ``(s, CLI_TAG, 3)`` and ``(s, CLI_TAG, 4)``.

CSV dialect: comma-separated, one header row after the ``#`` header block,
``.`` decimal separator, UTF-8.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from ._rng import CLI_TAG, derive_rng
from .calibration import (
    Scenario,
    ScenarioError,
    StudyError,
    _proposal_family,
    hypothesis_calibration,
    model_from_id,
    validity_study,
)
from .contours import AxisSpec, grid_eval, make_exact_binomial, make_mc_contour
from .families import gaussian_contour_object, family_to_json
from .inference import (
    ChoquetSpec,
    Hypothesis,
    NoComplementError,
    choquet_upper_expectation,
    lower_probability,
    marginal_contour,
    upper_probability,
)
from .models import (
    Dataset,
    DegenerateMLEError,
    MLEConvergenceError,
    SingularInformationError,
    read_dataset_csv,
)
from .nuisance import (
    FiberOptimizationError,
    RiskMinimizationError,
    kaplan_meier_swapped,
    make_censored_contour,
    make_empirical_risk_contour,
    quantile_risk_spec,
)
from .sa import SAConfig, fit_scalar, fit_vector

__all__ = ["main", "ConfigError"]

COMMANDS = ("contour", "fit", "calibrate", "hypothesis", "marginal", "choquet")

_NUMERICAL_ERRORS = (
    DegenerateMLEError,
    MLEConvergenceError,
    SingularInformationError,
    FiberOptimizationError,
    RiskMinimizationError,
    StudyError,
    np.linalg.LinAlgError,
    FloatingPointError,
    ZeroDivisionError,
    OverflowError,
)


class ConfigError(Exception):
    """A run config that cannot be executed as written (exit code 2)."""


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------


def _load_config(path: str, seed_override) -> dict:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    if seed_override is not None:
        config["seed"] = int(seed_override)
    if "seed" not in config:
        raise ConfigError(
            "seed is mandatory: set it in the config or pass --seed "
            "(runs never default to the wall clock)"
        )
    config["seed"] = int(config["seed"])
    return config


def _config_hash(config: dict) -> str:
    canonical = json.dumps(
        config, sort_keys=True, separators=(",", ":"), ensure_ascii=True
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _header_comments(command: str, cfg_hash: str, seed: int) -> list:
    return [
        f"# possfit {command}",
        f"# config-sha256: {cfg_hash}",
        f"# seed: {seed}",
        f"# generated: {_now_iso()}",
    ]


def _json_header(command: str, cfg_hash: str, seed: int) -> dict:
    return {
        "tool": "possfit",
        "command": command,
        "config_sha256": cfg_hash,
        "seed": seed,
        "generated": _now_iso(),
    }


def _parse_output(config: dict) -> dict:
    doc = config.get("output")
    if not isinstance(doc, dict):
        raise ConfigError(
            "output must be an object naming at least one file path "
            "(keys: csv, json)"
        )
    paths = {k: str(doc[k]) for k in ("csv", "json") if doc.get(k)}
    if not paths:
        raise ConfigError("output must name at least one of csv / json")
    return paths


def _write_outputs(texts: dict, paths: dict, verbose: bool) -> None:
    """texts/paths keyed by format; all writes atomic (temp + rename)."""
    for key, path in paths.items():
        tmp = f"{path}.tmp-{os.getpid()}"
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(texts[key])
        os.replace(tmp, path)
        if verbose:
            print(f"possfit: wrote {path}", file=sys.stderr)


def _render_json(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _render_csv(comments: list, header_row: str, rows: list) -> str:
    return "\n".join(comments + [header_row] + rows) + "\n"


# ---------------------------------------------------------------------------
# shared config fragments
# ---------------------------------------------------------------------------


def _parse_grid(config: dict):
    doc = config.get("grid")
    if not isinstance(doc, list) or not doc:
        raise ConfigError("grid must be a non-empty list of axis objects")
    try:
        return tuple(
            AxisSpec(
                lo=float(g["lo"]),
                hi=float(g["hi"]),
                count=int(g["count"]),
                name=g.get("name"),
            )
            for g in doc
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid axis: {exc}")


def _parse_sa(config: dict) -> SAConfig:
    doc = config.get("sa")
    if not isinstance(doc, dict):
        raise ConfigError("this method requires an 'sa' block (SAConfig)")
    try:
        return SAConfig(
            seed=int(doc.get("seed", 0)),
            alpha=float(doc.get("alpha", 0.1)),
            k_outer=int(doc.get("k_outer", 200)),
            m_inner=int(doc.get("m_inner", 500)),
            epsilon=float(doc.get("epsilon", 0.005)),
            min_iter=int(doc.get("min_iter", 5)),
            max_iter=int(doc.get("max_iter", 500)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid sa block: {exc}")


def _bound(value, default: float) -> float:
    return default if value is None else float(value)


def _parse_hypothesis(doc: dict) -> Hypothesis:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError("each hypothesis needs a 'kind' field")
    kind = doc["kind"]
    try:
        if kind == "half-space":
            return Hypothesis.half_space(
                np.asarray(doc["a"], dtype=float), float(doc["b"])
            )
        if kind in ("box", "box-complement"):
            bounds = [
                (_bound(lo, -math.inf), _bound(hi, math.inf))
                for lo, hi in doc["bounds"]
            ]
            h = Hypothesis.box(bounds)
            return h.complement() if kind == "box-complement" else h
        if kind == "whole-space":
            return Hypothesis.whole_space(int(doc["dim"]))
        if kind == "finite-set":
            return Hypothesis.finite_set(
                np.asarray(doc["points"], dtype=float)
            )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {kind} hypothesis: {exc}")
    raise ConfigError(
        f"unknown hypothesis kind {kind!r}; expected half-space, box, "
        "box-complement, whole-space, or finite-set"
    )


def _model_and_data(config: dict, seed: int):
    """Resolve (model, data) from the config's model and data-source fields."""
    model_id = config.get("model")
    if not model_id:
        raise ConfigError("config needs a 'model' id")
    spec = config.get("data")
    if not isinstance(spec, dict):
        raise ConfigError(
            "config needs a 'data' source: inline | csv | simulate"
        )
    kinds = [k for k in ("inline", "csv", "simulate") if k in spec]
    if len(kinds) != 1:
        raise ConfigError(
            "data source must be exactly one of inline | csv | simulate"
        )
    kind = kinds[0]

    data = None
    if kind == "inline":
        doc = spec["inline"]
        if not isinstance(doc, dict) or "responses" not in doc:
            raise ConfigError("inline data needs a 'responses' array")
        covariates = doc.get("covariates")
        censor = doc.get("censor")
        data = Dataset(
            responses=np.asarray(doc["responses"]),
            covariates=None
            if covariates is None
            else np.asarray(covariates, dtype=float),
            censor=None if censor is None else np.asarray(censor),
        )
        n = len(doc["responses"])
    elif kind == "csv":
        path = str(spec["csv"])
        if not os.path.isfile(path):
            raise ConfigError(f"data file not found: {path}")
        if "response" not in spec:
            raise ConfigError("csv data needs a 'response' column name")
        data = read_dataset_csv(
            path,
            response=spec["response"],
            covariates=tuple(spec.get("covariates", ())),
            censor=spec.get("censor"),
        )
        n = len(data.responses)
    else:
        doc = spec["simulate"]
        if not isinstance(doc, dict) or "theta" not in doc or "n" not in doc:
            raise ConfigError("simulate data needs 'theta' and 'n'")
        n = int(doc["n"])

    model = model_from_id(
        model_id,
        n=n,
        model_kwargs=config.get("model_kwargs"),
        log_params=bool(config.get("log_params", False)),
    )
    if data is None:
        theta = np.asarray(spec["simulate"]["theta"], dtype=float)
        data = model.sample(theta, n, derive_rng(seed, CLI_TAG, 0))
    return model, data


def _single_contour(config: dict, model, data, seed: int):
    """(contour, fitted family or None) for single-dataset commands."""
    method = config.get("method", "naive")
    child = int(derive_rng(seed, CLI_TAG, 1).integers(2 ** 63))
    m = int(config.get("m", 500))
    if method == "exact":
        if config.get("model") != "binomial":
            raise ConfigError(
                "the exact contour is only available for the binomial model"
            )
        return make_exact_binomial(data), None
    if method == "naive":
        if config.get("model") == "binomial":
            # enumeration is this model's exact contour; MC would only add
            # noise around it
            return make_exact_binomial(data), None
        return make_mc_contour(model, data, m, seed=child), None
    if method in ("variational-scalar", "variational-vector"):
        sa_config = replace(_parse_sa(config), seed=child)
        fit = fit_scalar if method == "variational-scalar" else fit_vector
        family, _ = fit(model, data, sa_config)
        return gaussian_contour_object(family), family
    if method == "bootstrap":
        doc = config.get("bootstrap")
        if not isinstance(doc, dict) or "tau" not in doc:
            raise ConfigError(
                "bootstrap method needs a 'bootstrap' block with 'tau'"
            )
        spec = quantile_risk_spec(
            float(doc["tau"]), int(doc.get("B", 500))
        )
        return make_empirical_risk_contour(data, spec, seed=child), None
    if method == "censored":
        if config.get("model") != "lognormal-censored":
            raise ConfigError(
                "censored method requires the lognormal-censored model"
            )
        ghat = kaplan_meier_swapped(data)
        return make_censored_contour(model, data, ghat, m, seed=child), None
    raise ConfigError(
        f"unknown contour method {method!r}; expected exact, naive, "
        "variational-scalar, variational-vector, bootstrap, or censored"
    )


def _describe_config_hypothesis(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True)


# ---------------------------------------------------------------------------
# grid rendering
# ---------------------------------------------------------------------------


def _grid_texts(grid, command, cfg_hash, seed):
    names = [
        a.name if a.name else f"theta_{i + 1}"
        for i, a in enumerate(grid.axes)
    ]
    coords = [a.points() for a in grid.axes]
    rows = []
    for idx in np.ndindex(grid.values.shape):
        cells = [repr(float(coords[d][idx[d]])) for d in range(len(idx))]
        cells.append(repr(float(grid.values[idx])))
        rows.append(",".join(cells))
    csv_text = _render_csv(
        _header_comments(command, cfg_hash, seed),
        ",".join(names + ["value"]),
        rows,
    )
    doc = {
        "header": _json_header(command, cfg_hash, seed),
        "axes": [
            {"lo": a.lo, "hi": a.hi, "count": a.count, "name": a.name}
            for a in grid.axes
        ],
        "shape": list(grid.values.shape),
        "values": [float(v) for v in grid.values.ravel()],
    }
    return {"csv": csv_text, "json": _render_json(doc)}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_contour(config, seed, cfg_hash, threads, verbose):
    paths = _parse_output(config)
    axes = _parse_grid(config)
    model, data = _model_and_data(config, seed)
    contour, _ = _single_contour(config, model, data, seed)
    grid = grid_eval(contour, axes, parallelism=threads)
    texts = _grid_texts(grid, "contour", cfg_hash, seed)
    _write_outputs(texts, paths, verbose)


def _cmd_fit(config, seed, cfg_hash, threads, verbose):
    paths = _parse_output(config)
    method = config.get("method", "variational-scalar")
    if method not in ("variational-scalar", "variational-vector"):
        raise ConfigError(
            f"fit method must be variational-scalar or variational-vector, "
            f"got {method!r}"
        )
    sa_config = _parse_sa(config)
    model, data = _model_and_data(config, seed)
    child = int(derive_rng(seed, CLI_TAG, 1).integers(2 ** 63))
    fit = fit_scalar if method == "variational-scalar" else fit_vector
    family, trace = fit(model, data, replace(sa_config, seed=child))

    xi = np.atleast_1d(np.asarray(trace.xi_final, dtype=float))
    xi_repr = repr(float(xi[0])) if xi.size == 1 else [float(v) for v in xi]
    print(f"xi_hat: {xi_repr}")
    print(f"termination: {trace.reason}")

    doc = {"header": _json_header("fit", cfg_hash, seed)}
    doc.update(family_to_json(family))

    xis = np.atleast_2d(np.asarray(trace.xis, dtype=float))
    objs = np.atleast_2d(np.asarray(trace.objectives, dtype=float))
    d = xis.shape[1]
    header_row = ",".join(
        ["t"]
        + [f"xi_{j}" for j in range(d)]
        + [f"objective_{j}" for j in range(d)]
    )
    rows = []
    for i, t in enumerate(trace.ts):
        cells = [str(int(t))]
        cells += [repr(float(v)) for v in xis[i]]
        cells += [repr(float(v)) for v in objs[i]]
        rows.append(",".join(cells))
    texts = {
        "json": _render_json(doc),
        "csv": _render_csv(
            _header_comments("fit", cfg_hash, seed), header_row, rows
        ),
    }
    _write_outputs(texts, paths, verbose)


def _cmd_calibrate(config, seed, cfg_hash, threads, verbose):
    paths = _parse_output(config)
    scenario = Scenario.from_config(config)
    alphas = config.get("alphas")
    if "hypotheses" in config:
        hyps = [_parse_hypothesis(h) for h in config["hypotheses"]]
        result = hypothesis_calibration(
            scenario, hyps, alphas=alphas, threads=threads
        )
        body = result.to_json_dict(include_timings=False)
        header_row = "alpha," + ",".join(
            f"cdf_{j + 1}" for j in range(len(result.hypotheses))
        )
        rows = [
            ",".join(
                [repr(float(a))]
                + [
                    repr(float(result.curves[j, i]))
                    for j in range(len(result.hypotheses))
                ]
            )
            for i, a in enumerate(result.alphas)
        ]
    else:
        report = validity_study(scenario, alphas=alphas, threads=threads)
        body = report.to_json_dict(include_timings=False)
        header_row = "alpha,cdf"
        rows = [
            f"{float(a)!r},{float(c)!r}"
            for a, c in zip(report.alphas, report.cdf)
        ]
    doc = {"header": _json_header("calibrate", cfg_hash, seed)}
    doc.update(body)
    texts = {
        "json": _render_json(doc),
        "csv": _render_csv(
            _header_comments("calibrate", cfg_hash, seed), header_row, rows
        ),
    }
    _write_outputs(texts, paths, verbose)


def _cmd_hypothesis(config, seed, cfg_hash, threads, verbose):
    paths = _parse_output(config)
    specs = config.get("hypotheses")
    if not isinstance(specs, list) or not specs:
        raise ConfigError("hypothesis command needs a non-empty 'hypotheses' list")
    hyps = [_parse_hypothesis(h) for h in specs]
    model, data = _model_and_data(config, seed)
    dim = model.dim if model.dim is not None else len(data.responses)
    for k, h in enumerate(hyps):
        if h.dim != dim:
            raise ConfigError(
                f"hypothesis {k + 1} has dimension {h.dim}, expected {dim}"
            )
    contour, family = _single_contour(config, model, data, seed)
    if family is None:
        family = _proposal_family(model, data)

    entries = []
    rows = []
    for k, (h, raw) in enumerate(zip(hyps, specs)):
        search_seed = int(derive_rng(seed, CLI_TAG, 2, k).integers(2 ** 63))
        upper = upper_probability(
            contour, h, family=family, seed=search_seed
        ).value
        try:
            lower = lower_probability(
                contour, h, family=family, seed=search_seed
            ).value
        except NoComplementError as exc:
            raise ConfigError(
                f"hypothesis {k + 1} has no lower probability: {exc}"
            )
        upper = min(max(float(upper), 0.0), 1.0)
        lower = min(max(float(lower), 0.0), min(upper, 1.0))
        entries.append(
            {
                "hypothesis": _describe_config_hypothesis(raw),
                "upper": upper,
                "lower": lower,
            }
        )
        rows.append(f"{k + 1},{upper!r},{lower!r}")
        print(f"H{k + 1}: upper={upper:.6f} lower={lower:.6f}")

    doc = {
        "header": _json_header("hypothesis", cfg_hash, seed),
        "hypotheses": entries,
    }
    texts = {
        "json": _render_json(doc),
        "csv": _render_csv(
            _header_comments("hypothesis", cfg_hash, seed),
            "hypothesis,upper,lower",
            rows,
        ),
    }
    _write_outputs(texts, paths, verbose)


def _cmd_marginal(config, seed, cfg_hash, threads, verbose):
    paths = _parse_output(config)
    axes = _parse_grid(config)
    if len(axes) != 1:
        raise ConfigError("marginal command needs exactly one grid axis")
    doc = config.get("marginal")
    if not isinstance(doc, dict):
        raise ConfigError(
            "marginal command needs a 'marginal' block with the feature: "
            "{'component': i} or {'linear': [...]}"
        )
    if "component" in doc:
        g = int(doc["component"])
    elif "linear" in doc:
        g = np.asarray(doc["linear"], dtype=float)
    else:
        raise ConfigError(
            "marginal feature must be {'component': i} or {'linear': [...]}"
        )
    model, data = _model_and_data(config, seed)
    contour, family = _single_contour(config, model, data, seed)
    if family is None:
        family = _proposal_family(model, data)
    search_seed = int(derive_rng(seed, CLI_TAG, 3).integers(2 ** 63))
    grid = marginal_contour(
        contour,
        g,
        axes[0],
        family=family,
        seed=search_seed,
        parallelism=threads,
    )
    texts = _grid_texts(grid, "marginal", cfg_hash, seed)
    _write_outputs(texts, paths, verbose)


def _parse_loss(doc: dict):
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError("choquet loss needs a 'kind' field")
    kind = doc["kind"]
    try:
        if kind == "constant":
            value = float(doc["value"])
            return lambda theta: value
        if kind == "linear":
            a = np.asarray(doc["a"], dtype=float)
            b = float(doc.get("b", 0.0))
            return lambda theta: float(
                np.dot(a, np.atleast_1d(np.asarray(theta, dtype=float))) + b
            )
        if kind == "indicator":
            h = _parse_hypothesis(doc["hypothesis"])
            inside = float(doc.get("inside", 1.0))
            outside = float(doc.get("outside", 0.0))
            return lambda theta: (
                inside
                if bool(h.contains(np.atleast_2d(theta))[0])
                else outside
            )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {kind} loss: {exc}")
    raise ConfigError(
        f"unknown loss kind {kind!r}; expected constant, linear, or indicator"
    )


def _cmd_choquet(config, seed, cfg_hash, threads, verbose):
    paths = _parse_output(config)
    doc = config.get("choquet")
    if not isinstance(doc, dict) or "loss" not in doc:
        raise ConfigError("choquet command needs a 'choquet' block with 'loss'")
    loss = _parse_loss(doc["loss"])
    spec = ChoquetSpec(loss=loss, resolution=int(doc.get("resolution", 200)))
    model, data = _model_and_data(config, seed)
    contour, family = _single_contour(config, model, data, seed)
    if family is None:
        family = _proposal_family(model, data)
    child = int(derive_rng(seed, CLI_TAG, 4).integers(2 ** 63))
    result = choquet_upper_expectation(contour, spec, family=family, seed=child)
    print(f"choquet upper expectation: {float(result.value)!r}")
    out = {
        "header": _json_header("choquet", cfg_hash, seed),
        "value": float(result.value),
        "flags": list(result.flags),
    }
    texts = {
        "json": _render_json(out),
        "csv": _render_csv(
            _header_comments("choquet", cfg_hash, seed),
            "value",
            [repr(float(result.value))],
        ),
    }
    _write_outputs(texts, paths, verbose)


_HANDLERS = {
    "contour": _cmd_contour,
    "fit": _cmd_fit,
    "calibrate": _cmd_calibrate,
    "hypothesis": _cmd_hypothesis,
    "marginal": _cmd_marginal,
    "choquet": _cmd_choquet,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="possfit",
        description=(
            "Possibility-contour toolkit: run a JSON-configured contour, "
            "fit, calibration, hypothesis, marginal, or Choquet job."
        ),
    )
    parser.add_argument(
        "--config", required=True, help="path to the JSON run config"
    )
    parser.add_argument(
        "--seed", type=int, default=None,
        help="override (or supply) the master seed",
    )
    parser.add_argument(
        "--threads", type=int, default=None,
        help="cap worker parallelism (default: machine cores); results are "
        "identical for any thread count",
    )
    parser.add_argument(
        "--verbose", action="store_true", help="log progress to stderr"
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    threads = args.threads if args.threads else (os.cpu_count() or 1)
    if threads < 1:
        print("possfit: config error: --threads must be >= 1",
              file=sys.stderr)
        return 2
    try:
        config = _load_config(args.config, args.seed)
        command = config.get("command")
        if command not in COMMANDS:
            raise ConfigError(
                f"unknown command {command!r}; expected one of "
                f"{', '.join(COMMANDS)}"
            )
        cfg_hash = _config_hash(config)
        if args.verbose:
            print(
                f"possfit: running {command} (seed {config['seed']}, "
                f"threads {threads}, config {cfg_hash[:12]})",
                file=sys.stderr,
            )
        _HANDLERS[command](
            config, config["seed"], cfg_hash, threads, args.verbose
        )
    except (ConfigError, ScenarioError) as exc:
        print(f"possfit: config error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"possfit: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
