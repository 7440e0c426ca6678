"""Config loading, snapshots, and the solve / verify / sweep commands end to end."""

import csv
import json

import numpy as np
import pytest

from orthotropic_cli.main import main
from orthotropic_shared.config import DEFAULT_TOLERANCES, RunConfig, build_config, load_config, parse_override
from orthotropic_shared.energy import EnergyParams
from orthotropic_shared.errors import ArtifactError, ConfigError
from orthotropic_shared.fields import ScalarField
from orthotropic_shared.geometry import build_grid
from orthotropic_shared.runs import WORKERS_ENV, cmd_solve, level_dir
from orthotropic_shared.scenarios import catalogue, expand_scenarios
from orthotropic_shared.snapshots import read_snapshot, write_snapshot


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


class TestSnapshots:
    def test_round_trip_is_bitwise(self, tmp_path, rng):
        grid = build_grid(65, 2.0)
        field = ScalarField(grid, rng.standard_normal(grid.shape) * 1e3)
        params = EnergyParams(1.3, 6.103515625e-07)
        path = write_snapshot(tmp_path / "level" / "field.txt", field, params)
        snapshot = read_snapshot(path)
        assert np.array_equal(snapshot.field.values, field.values)
        assert snapshot.params == params
        assert snapshot.field.grid == grid

    def test_missing(self, tmp_path):
        with pytest.raises(ArtifactError, match="does not exist"):
            read_snapshot(tmp_path / "nope.txt")

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "field.txt"
        path.write_text("65 0.03125\n1 2 3\n", encoding="utf-8")
        with pytest.raises(ArtifactError, match="header"):
            read_snapshot(path)

    def test_wrong_shape(self, tmp_path):
        path = tmp_path / "field.txt"
        path.write_text("9 0.25 1.5 0.01\n" + "0 0 0\n" * 3, encoding="utf-8")
        with pytest.raises(ArtifactError, match="expected 9x9"):
            read_snapshot(path)


class TestConfig:
    def test_defaults(self):
        config = load_config()
        assert config.p == 1.5
        assert config.n == (65, 129)
        assert config.tolerance("stability") == DEFAULT_TOLERANCES["stability"]

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            build_config({"bogus": 1})

    def test_unknown_tolerance(self):
        with pytest.raises(ConfigError, match="tolerance"):
            RunConfig(tolerances={"nope": 0.1})

    @pytest.mark.parametrize(
        "overrides, message",
        [
            ({"n": [64]}, "odd"),
            ({"p": 2.0}, "p must"),
            ({"levels": 1}, "levels"),
            ({"n": [17]}, "n=17"),
            ({"R": 0.95}, "compactly"),
            ({"scenario": "nope"}, "unknown scenario"),
        ],
    )
    def test_invalid_values(self, overrides, message):
        with pytest.raises(ConfigError, match=message):
            build_config(overrides)

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"p": 1.2, "n": [33], "R": 0.6, "scenario": "ustar"}), encoding="utf-8")
        config = load_config(path, {"levels": 3, "seed": None}, ["R=0.7", "out=elsewhere"])
        assert config.p == 1.2
        assert config.n == (33,)
        assert config.levels == 3
        assert config.R == 0.7
        assert config.out == "elsewhere"
        assert config.seed == 0

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist"):
            load_config(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    def test_parse_override(self):
        assert parse_override("R=0.6") == ("R", 0.6)
        assert parse_override("scenario=ustar") == ("scenario", "ustar")
        assert parse_override('sweep={"p": [1.2]}') == ("sweep", {"p": [1.2]})
        with pytest.raises(ConfigError):
            parse_override("noequals")

    def test_sweep_defaults(self):
        config = RunConfig(levels=3, eps0=1e-2)
        assert config.sweep_values("eps") == [pytest.approx(6.25e-4)]
        assert config.sweep_values("n") == [65, 129]

    def test_to_dict_is_json(self):
        data = RunConfig().to_dict()
        assert json.loads(json.dumps(data)) == data


class TestScenarios:
    def test_standard_suite(self):
        labels = [s.label for s in expand_scenarios("standard", 1.5)]
        assert labels == ["affine", "ustar-p1.2", "ustar-p1.5", "ustar-p1.8", "oscillatory"]

    def test_catalogue_lists_every_name(self):
        names = [entry["name"] for entry in catalogue()]
        assert names == ["affine", "ustar", "oscillatory", "standard"]


class TestVerifyCommand:
    def test_affine_passes(self, tmp_path):
        code = main(
            ["--log-level", "warning", "verify", "--scenario", "affine", "--n", "33", "--levels", "4",
             "--out", str(tmp_path)]
        )
        assert code == 0
        bundle = json.loads((tmp_path / "affine" / "reports.json").read_text(encoding="utf-8"))
        assert bundle["passed"]
        assert bundle["config"]["n"] == [33]
        assert bundle["config"]["scenario"] == "affine"
        assert bundle["negative_control"]["expected"] == "fail"
        assert not bundle["negative_control"]["pass"]
        names = {report["name"] for report in bundle["reports"]}
        assert {"minimality", "lebesgue-j1", "maxmin-j2", "theorem", "convergence", "monotonicity"} <= names
        rows = read_rows(tmp_path / "affine" / "summary.csv")
        assert rows[-1]["name"] == "negative-control"
        assert (tmp_path / "affine" / "33" / "ladder.json").is_file()

    def test_tampered_negative_control_fails_the_run(self, tmp_path):
        code = main(
            ["--log-level", "warning", "verify", "--scenario", "affine", "--n", "33", "--levels", "4",
             "--out", str(tmp_path), "--set", "tamper_negative_control=true"]
        )
        assert code == 2

    def test_even_grid_is_a_config_error(self, tmp_path, capsys):
        code = main(["verify", "--scenario", "affine", "--n", "32", "--out", str(tmp_path)])
        assert code == 1
        assert "odd" in capsys.readouterr().err

    def test_missing_artifacts(self, tmp_path, capsys):
        code = main(
            ["verify", "--scenario", "affine", "--n", "33", "--levels", "4", "--out", str(tmp_path),
             "--set", "solve_first=false"]
        )
        assert code == 1
        assert "does not exist" in capsys.readouterr().err

    def test_outputs_are_deterministic(self, tmp_path):
        for name in ("a", "b"):
            assert main(
                ["--log-level", "warning", "verify", "--scenario", "affine", "--n", "33", "--levels", "4",
                 "--out", str(tmp_path / name)]
            ) == 0
        first = (tmp_path / "a" / "affine" / "summary.csv").read_text(encoding="utf-8")
        second = (tmp_path / "b" / "affine" / "summary.csv").read_text(encoding="utf-8")
        assert first == second

    @pytest.mark.parametrize(("scenario", "label"), [("ustar", "ustar-p1.5"), ("oscillatory", "oscillatory")])
    def test_solved_scenarios_report_consistently(self, tmp_path, scenario, label):
        code = main(
            ["--log-level", "warning", "verify", "--scenario", scenario, "--n", "33", "--levels", "4",
             "--out", str(tmp_path)]
        )
        bundle = json.loads((tmp_path / label / "reports.json").read_text(encoding="utf-8"))
        assert code == (0 if bundle["passed"] else 2)
        reports = {report["name"]: report for report in bundle["reports"]}
        assert {"lebesgue-j1", "lipschitz", "caccioppoli", "derivative-equation"} <= set(reports)
        assert all(report["kind"] in {"bound", "stability", "measurement"} for report in reports.values())
        if scenario == "ustar":
            assert reports["exact-trend"]["pass"]
            assert reports["exact-trend"]["kind"] == "bound"
        else:
            assert "exact-trend" not in reports

    @pytest.mark.slow
    def test_standard_suite_passes_with_defaults(self, tmp_path):
        code = main(["--log-level", "warning", "verify", "--scenario", "standard", "--out", str(tmp_path)])
        assert code == 0
        for name in ("affine", "ustar-p1.2", "ustar-p1.5", "ustar-p1.8", "oscillatory"):
            bundle = json.loads((tmp_path / name / "reports.json").read_text(encoding="utf-8"))
            failed = [report["name"] for report in bundle["reports"] if not report["pass"]]
            assert bundle["passed"], failed


class TestSweepCommand:
    def test_empty_axis(self, tmp_path):
        code = main(["sweep", "--scenario", "ustar", "--n", "33", "--out", str(tmp_path), "--set", 'sweep={"p": []}'])
        assert code == 1

    def test_nonpositive_eps(self, tmp_path):
        code = main(["sweep", "--scenario", "ustar", "--n", "33", "--out", str(tmp_path), "--set", 'sweep={"eps": [0]}'])
        assert code == 1

    def test_profile_matches_verify(self, tmp_path):
        common = ["--scenario", "oscillatory", "--n", "33", "--levels", "3", "--out", str(tmp_path)]
        main(["--log-level", "warning", "verify", *common])
        assert main(["--log-level", "warning", "sweep", *common]) == 0
        profile = json.loads((tmp_path / "oscillatory" / "reports.json").read_text(encoding="utf-8"))["profile"]
        rows = read_rows(tmp_path / "sweep.csv")
        assert {row["check"] for row in rows} >= {"theorem-j1", "lebesgue-j2", "caccioppoli", "energy-estimate"}
        for j in (1, 2):
            swept = [float(row["ratio"]) for row in rows if row["check"] == f"theorem-j{j}"]
            assert swept == pytest.approx(profile[f"measured_C_j{j}"], rel=1e-12)
        assert {row["scenario"] for row in rows} == {"oscillatory"}


class TestWorkers:
    def _solve(self, out):
        return cmd_solve(load_config(overrides={"scenario": "affine", "n": [33, 41], "levels": 2, "out": str(out)}))

    def test_parallel_matches_serial(self, tmp_path, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV, "1")
        assert self._solve(tmp_path / "serial").exit_code == 0
        monkeypatch.setenv(WORKERS_ENV, "2")
        assert self._solve(tmp_path / "parallel").exit_code == 0
        config = load_config(overrides={"levels": 2})
        for n in (33, 41):
            for eps in (1e-2, 2.5e-3):
                serial = level_dir(config, "affine", n, eps).relative_to(config.out)
                a = (tmp_path / "serial" / serial / "field.txt").read_bytes()
                b = (tmp_path / "parallel" / serial / "field.txt").read_bytes()
                assert a == b

    @pytest.mark.parametrize("value", ["0", "many"])
    def test_invalid_worker_count(self, tmp_path, monkeypatch, value):
        monkeypatch.setenv(WORKERS_ENV, value)
        outcome = self._solve(tmp_path)
        assert outcome.exit_code == 1
        assert WORKERS_ENV in outcome.message
