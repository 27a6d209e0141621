"""Contract tests for the command-line front end.

The CLI reads a single JSON run config (``--config``), with only three other
flags: ``--seed`` (override / supply the master seed), ``--threads``, and
``--verbose``.  Exit codes: 0 ok, 2 config error, 3 numerical failure.

Randomness contract (documented in possfit.cli and pinned here): with master
seed ``s``,

    simulated data        derive_rng(s, CLI_TAG, 0)
    contour / fit child   derive_rng(s, CLI_TAG, 1).integers(2**63)
    hypothesis k search   derive_rng(s, CLI_TAG, 2, k).integers(2**63)
    marginal search       derive_rng(s, CLI_TAG, 3).integers(2**63)
    choquet integration   derive_rng(s, CLI_TAG, 4).integers(2**63)

Output files are written atomically (temp + rename), carry a header block
with the config hash and seed, and are byte-identical across reruns except
for the single timestamp header line.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from possfit import (
    AxisSpec,
    grid_eval,
    make_exact_binomial,
    make_mc_contour,
    models,
)
from possfit._rng import CLI_TAG, derive_rng
from possfit.cli import main


BINOM_RESPONSES = [1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0]  # s=6, n=15


def write_config(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def run(config_path, *extra):
    return main(["--config", config_path, *extra])


def read_lines(path):
    return path.read_text(encoding="utf-8").splitlines()


def csv_sections(path):
    """(comment lines, header row, data rows) of an output CSV."""
    lines = read_lines(path)
    comments = [ln for ln in lines if ln.startswith("#")]
    rest = [ln for ln in lines if not ln.startswith("#")]
    return comments, rest[0], rest[1:]


def contour_config(tmp_path, **overrides):
    doc = {
        "command": "contour",
        "model": "binomial",
        "seed": 11,
        "data": {"inline": {"responses": BINOM_RESPONSES}},
        "method": "exact",
        "grid": [{"lo": 0.0, "hi": 1.0, "count": 200, "name": "theta"}],
        "output": {
            "csv": str(tmp_path / "contour.csv"),
            "json": str(tmp_path / "contour.json"),
        },
    }
    doc.update(overrides)
    return doc


# ---------------------------------------------------------------------------
# cmd_contour
# ---------------------------------------------------------------------------


class TestContour:
    def test_binomial_exact_grid(self, tmp_path):
        cfg = contour_config(tmp_path)
        assert run(write_config(tmp_path, cfg)) == 0

        comments, header, rows = csv_sections(tmp_path / "contour.csv")
        assert header == "theta,value"
        assert len(rows) == 200
        assert any("seed: 11" in c for c in comments)
        assert any("sha256" in c for c in comments)
        assert sum("generated" in c for c in comments) == 1

        # values equal the library's exact contour on the same grid
        data = models.Dataset(responses=np.array(BINOM_RESPONSES))
        grid = grid_eval(
            make_exact_binomial(data), (AxisSpec(0.0, 1.0, 200),)
        )
        got = np.array([float(r.split(",")[1]) for r in rows])
        assert np.array_equal(got, grid.values)

        doc = json.loads((tmp_path / "contour.json").read_text())
        assert doc["header"]["seed"] == 11
        assert len(doc["header"]["config_sha256"]) == 64
        assert doc["axes"][0]["count"] == 200
        assert doc["values"] == [float(v) for v in grid.values]

    def test_bvn_mc_matches_library_byte_for_byte(self, tmp_path):
        cfg = {
            "command": "contour",
            "model": "bvn-correlation",
            "seed": 23,
            "data": {"simulate": {"theta": [0.5], "n": 40}},
            "method": "naive",
            "m": 500,
            "grid": [{"lo": -0.9, "hi": 0.9, "count": 21, "name": "rho"}],
            "output": {"csv": str(tmp_path / "bvn.csv")},
        }
        assert run(write_config(tmp_path, cfg)) == 0

        model = models.bvn_correlation()
        data = model.sample(
            np.array([0.5]), 40, derive_rng(23, CLI_TAG, 0)
        )
        child = int(derive_rng(23, CLI_TAG, 1).integers(2 ** 63))
        grid = grid_eval(
            make_mc_contour(model, data, 500, seed=child),
            (AxisSpec(-0.9, 0.9, 21),),
        )
        coords = np.linspace(-0.9, 0.9, 21)
        expected = [
            f"{float(c)!r},{float(v)!r}"
            for c, v in zip(coords, grid.values)
        ]
        _, header, rows = csv_sections(tmp_path / "bvn.csv")
        assert header == "rho,value"
        assert rows == expected

    def test_missing_data_file_exit2_no_partial_outputs(
        self, tmp_path, capsys
    ):
        cfg = contour_config(
            tmp_path,
            data={"csv": str(tmp_path / "nope.csv"), "response": "y"},
        )
        assert run(write_config(tmp_path, cfg)) == 2
        assert not (tmp_path / "contour.csv").exists()
        assert not (tmp_path / "contour.json").exists()
        assert "config error" in capsys.readouterr().err

    def test_csv_data_source(self, tmp_path):
        rng = np.random.default_rng(4)
        ys = rng.gamma(7.0, 3.0, size=25)
        data_path = tmp_path / "obs.csv"
        data_path.write_text(
            "y\n" + "\n".join(repr(float(y)) for y in ys), encoding="utf-8"
        )
        cfg = {
            "command": "contour",
            "model": "gamma",
            "seed": 5,
            "data": {"csv": str(data_path), "response": "y"},
            "method": "naive",
            "m": 200,
            "grid": [
                {"lo": 2.0, "hi": 15.0, "count": 6, "name": "shape"},
                {"lo": 0.5, "hi": 8.0, "count": 5, "name": "scale"},
            ],
            "output": {"csv": str(tmp_path / "g.csv")},
        }
        assert run(write_config(tmp_path, cfg)) == 0
        _, header, rows = csv_sections(tmp_path / "g.csv")
        assert header == "shape,scale,value"
        assert len(rows) == 30
        vals = np.array([float(r.split(",")[2]) for r in rows])
        assert np.all((vals >= 0.0) & (vals <= 1.0))

    def test_no_output_paths_is_config_error(self, tmp_path):
        cfg = contour_config(tmp_path, output={})
        assert run(write_config(tmp_path, cfg)) == 2

    def test_grid_required(self, tmp_path):
        cfg = contour_config(tmp_path)
        del cfg["grid"]
        assert run(write_config(tmp_path, cfg)) == 2


# ---------------------------------------------------------------------------
# global config handling
# ---------------------------------------------------------------------------


class TestConfigHandling:
    def test_seed_mandatory_and_overridable(self, tmp_path):
        cfg = contour_config(tmp_path)
        del cfg["seed"]
        path = write_config(tmp_path, cfg)
        assert run(path) == 2
        assert run(path, "--seed", "7") == 0
        doc = json.loads((tmp_path / "contour.json").read_text())
        assert doc["header"]["seed"] == 7

    def test_unknown_command_exit2(self, tmp_path, capsys):
        cfg = contour_config(tmp_path, command="paint")
        assert run(write_config(tmp_path, cfg)) == 2
        assert "command" in capsys.readouterr().err

    def test_malformed_json_exit2(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        assert run(str(path)) == 2

    def test_unknown_model_exit2(self, tmp_path):
        cfg = contour_config(tmp_path, model="bogus")
        assert run(write_config(tmp_path, cfg)) == 2

    def test_byte_identity_modulo_timestamp_and_threads(self, tmp_path):
        cfg = {
            "command": "contour",
            "model": "bvn-correlation",
            "seed": 31,
            "data": {"simulate": {"theta": [0.3], "n": 30}},
            "method": "naive",
            "m": 300,
            "grid": [{"lo": -0.9, "hi": 0.9, "count": 15, "name": "rho"}],
            "output": {
                "csv": str(tmp_path / "o.csv"),
                "json": str(tmp_path / "o.json"),
            },
        }
        path = write_config(tmp_path, cfg)
        assert run(path, "--threads", "1") == 0
        first = {
            name: read_lines(tmp_path / name) for name in ("o.csv", "o.json")
        }
        assert run(path, "--threads", "4") == 0
        second = {
            name: read_lines(tmp_path / name) for name in ("o.csv", "o.json")
        }
        for name in ("o.csv", "o.json"):
            a, b = first[name], second[name]
            assert len(a) == len(b)
            diff = [
                (x, y) for x, y in zip(a, b) if x != y
            ]
            assert len(diff) <= 1
            for x, y in diff:
                assert "generated" in x and "generated" in y


# ---------------------------------------------------------------------------
# cmd_fit
# ---------------------------------------------------------------------------


def fit_config(tmp_path, **overrides):
    doc = {
        "command": "fit",
        "model": "binomial",
        "seed": 13,
        "data": {"inline": {"responses": BINOM_RESPONSES}},
        "method": "variational-scalar",
        "sa": {"alpha": 0.1, "k_outer": 60, "m_inner": 100, "max_iter": 10},
        "output": {
            "json": str(tmp_path / "family.json"),
            "csv": str(tmp_path / "trace.csv"),
        },
    }
    doc.update(overrides)
    return doc


class TestFit:
    def test_binomial_scalar_outputs_and_determinism(self, tmp_path, capsys):
        path = write_config(tmp_path, fit_config(tmp_path))
        assert run(path) == 0
        out = capsys.readouterr().out
        assert "xi_hat" in out
        assert "termination" in out

        doc = json.loads((tmp_path / "family.json").read_text())
        assert doc["family"] == "gaussian-scalar"
        assert doc["header"]["seed"] == 13
        xi_first = doc["xi"]

        comments, header, rows = csv_sections(tmp_path / "trace.csv")
        assert header == "t,xi_0,objective_0"
        assert len(rows) >= 1
        assert int(rows[0].split(",")[0]) == 1

        assert run(path) == 0
        doc2 = json.loads((tmp_path / "family.json").read_text())
        assert doc2["xi"] == xi_first

    def test_gamma_vector_family_schema(self, tmp_path):
        cfg = fit_config(
            tmp_path,
            model="gamma",
            data={"simulate": {"theta": [7.0, 3.0], "n": 25}},
            method="variational-vector",
            sa={"alpha": 0.1, "k_outer": 60, "m_inner": 150, "max_iter": 10},
        )
        assert run(write_config(tmp_path, cfg)) == 0
        doc = json.loads((tmp_path / "family.json").read_text())
        assert doc["family"] == "gaussian-vector"
        assert len(doc["theta_hat"]) == 2
        assert np.asarray(doc["info"]).shape == (2, 2)
        assert len(doc["xi"]) == 2
        _, header, rows = csv_sections(tmp_path / "trace.csv")
        assert header == "t,xi_0,xi_1,objective_0,objective_1"

    def test_alpha_out_of_range_exit2(self, tmp_path):
        cfg = fit_config(tmp_path)
        cfg["sa"]["alpha"] = 1.5
        assert run(write_config(tmp_path, cfg)) == 2

    def test_degenerate_mle_exit3(self, tmp_path, capsys):
        cfg = fit_config(
            tmp_path, data={"inline": {"responses": [1] * 15}}
        )
        assert run(write_config(tmp_path, cfg)) == 3
        err = capsys.readouterr().err
        assert "boundary" in err
        assert not (tmp_path / "family.json").exists()

    def test_fit_requires_sa_block(self, tmp_path):
        cfg = fit_config(tmp_path)
        del cfg["sa"]
        assert run(write_config(tmp_path, cfg)) == 2


# ---------------------------------------------------------------------------
# cmd_calibrate
# ---------------------------------------------------------------------------


class TestCalibrate:
    def test_binomial_validity_report(self, tmp_path):
        cfg = {
            "command": "calibrate",
            "model": "binomial",
            "truth": [0.4],
            "n": 15,
            "reps": 100,
            "method": "naive",
            "seed": 19,
            "output": {
                "json": str(tmp_path / "report.json"),
                "csv": str(tmp_path / "report.csv"),
            },
        }
        path = write_config(tmp_path, cfg)
        assert run(path, "--threads", "2") == 0

        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["header"]["seed"] == 19
        assert len(doc["values"]) == 100
        assert len(doc["cdf"]) == 99
        assert "timings" not in doc  # wall-clock noise would break reruns

        comments, header, rows = csv_sections(tmp_path / "report.csv")
        assert header == "alpha,cdf"
        assert len(rows) == 99

        first = read_lines(tmp_path / "report.json")
        assert run(path, "--threads", "4") == 0
        second = read_lines(tmp_path / "report.json")
        diff = [(x, y) for x, y in zip(first, second) if x != y]
        assert len(diff) <= 1
        for x, _ in diff:
            assert "generated" in x

    def test_calibrate_with_hypotheses_curves(self, tmp_path):
        cfg = {
            "command": "calibrate",
            "model": "binomial",
            "truth": [0.4],
            "n": 15,
            "reps": 30,
            "method": "naive",
            "seed": 3,
            "alphas": [0.25, 0.5, 0.9],
            "hypotheses": [
                {"kind": "half-space", "a": [-1.0], "b": -0.9},
            ],
            "output": {"json": str(tmp_path / "hyp.json")},
        }
        assert run(write_config(tmp_path, cfg)) == 0
        doc = json.loads((tmp_path / "hyp.json").read_text())
        assert len(doc["hypotheses"]) == 1
        assert len(doc["curves"]) == 1
        assert len(doc["curves"][0]) == 3
        assert all(0.0 <= c <= 1.0 for c in doc["curves"][0])

    def test_false_hypothesis_exit2(self, tmp_path):
        cfg = {
            "command": "calibrate",
            "model": "binomial",
            "truth": [0.4],
            "n": 15,
            "reps": 10,
            "method": "naive",
            "seed": 3,
            "hypotheses": [{"kind": "half-space", "a": [1.0], "b": 0.9}],
            "output": {"json": str(tmp_path / "hyp.json")},
        }
        assert run(write_config(tmp_path, cfg)) == 2


# ---------------------------------------------------------------------------
# cmd_hypothesis
# ---------------------------------------------------------------------------


class TestHypothesis:
    def test_half_space_on_fitted_gaussian(self, tmp_path, capsys):
        cfg = {
            "command": "hypothesis",
            "model": "binomial",
            "seed": 29,
            "data": {"inline": {"responses": BINOM_RESPONSES}},
            "method": "variational-scalar",
            "sa": {
                "alpha": 0.1,
                "k_outer": 60,
                "m_inner": 100,
                "max_iter": 10,
            },
            "hypotheses": [
                {"kind": "half-space", "a": [1.0], "b": 0.2},
                {"kind": "box", "bounds": [[0.35, 0.45]]},
            ],
            "output": {"json": str(tmp_path / "probs.json")},
        }
        assert run(write_config(tmp_path, cfg)) == 0
        doc = json.loads((tmp_path / "probs.json").read_text())
        assert len(doc["hypotheses"]) == 2
        for entry in doc["hypotheses"]:
            assert 0.0 <= entry["lower"] <= entry["upper"] <= 1.0
        out = capsys.readouterr().out
        assert "upper" in out and "lower" in out

    def test_requires_hypotheses(self, tmp_path):
        cfg = {
            "command": "hypothesis",
            "model": "binomial",
            "seed": 29,
            "data": {"inline": {"responses": BINOM_RESPONSES}},
            "method": "naive",
            "output": {"json": str(tmp_path / "probs.json")},
        }
        assert run(write_config(tmp_path, cfg)) == 2


# ---------------------------------------------------------------------------
# cmd_marginal
# ---------------------------------------------------------------------------


class TestMarginal:
    def test_component_marginal_grid(self, tmp_path):
        cfg = {
            "command": "marginal",
            "model": "gamma",
            "seed": 37,
            "data": {"simulate": {"theta": [7.0, 3.0], "n": 25}},
            "method": "variational-vector",
            "sa": {
                "alpha": 0.1,
                "k_outer": 60,
                "m_inner": 150,
                "max_iter": 10,
            },
            "marginal": {"component": 0},
            "grid": [{"lo": 2.0, "hi": 15.0, "count": 12, "name": "shape"}],
            "output": {"csv": str(tmp_path / "marg.csv")},
        }
        assert run(write_config(tmp_path, cfg)) == 0
        _, header, rows = csv_sections(tmp_path / "marg.csv")
        assert header == "shape,value"
        assert len(rows) == 12
        vals = np.array([float(r.split(",")[1]) for r in rows])
        assert np.all((vals >= 0.0) & (vals <= 1.0))
        assert vals.max() > 0.5  # the MLE's component lies inside the axis


# ---------------------------------------------------------------------------
# cmd_choquet
# ---------------------------------------------------------------------------


class TestChoquet:
    def test_constant_loss_identity(self, tmp_path, capsys):
        cfg = {
            "command": "choquet",
            "model": "binomial",
            "seed": 41,
            "data": {"inline": {"responses": BINOM_RESPONSES}},
            "method": "variational-scalar",
            "sa": {
                "alpha": 0.1,
                "k_outer": 60,
                "m_inner": 100,
                "max_iter": 10,
            },
            "choquet": {"loss": {"kind": "constant", "value": 3.25}},
            "output": {"json": str(tmp_path / "choquet.json")},
        }
        assert run(write_config(tmp_path, cfg)) == 0
        doc = json.loads((tmp_path / "choquet.json").read_text())
        assert doc["value"] == pytest.approx(3.25, abs=1e-6)
        assert "3.25" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# module execution
# ---------------------------------------------------------------------------


class TestEntryPoint:
    def test_python_dash_m_possfit(self, tmp_path):
        cfg = contour_config(tmp_path)
        cfg["grid"][0]["count"] = 20
        path = write_config(tmp_path, cfg)
        proc = subprocess.run(
            [sys.executable, "-m", "possfit", "--config", path],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "contour.csv").exists()

    def test_missing_config_flag_exits_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "possfit"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 2
