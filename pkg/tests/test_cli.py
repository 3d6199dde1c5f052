import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from assetguard import cli, runio
from assetguard.scenario import (
    ScenarioError,
    bundled_scenario_path,
    parse_scenario,
    serialize_scenario,
)

TINY_SCENARIO = """\
name = "tinyrun"

[engagement]
capture_radius_ft = 5.0
evasion_radius_ft = 500.0

[algorithm]
n_scp = 12
n_ibr = 2

[[players]]
name = "evader"
role = "evader"
u_max_g = 7.0
node_count = 10
position_ft = [0.0, 0.0, 30000.0]
velocity_fts = [800.0, 0.0, 0.0]

[[players]]
name = "asset"
role = "asset"
node_count = 2
position_ft = [2500.0, 0.0, 30000.0]
"""


@pytest.fixture(scope="module")
def tiny_path(tmp_path_factory):
    p = tmp_path_factory.mktemp("scn") / "tiny.toml"
    p.write_text(TINY_SCENARIO)
    return p


@pytest.fixture(scope="module")
def tiny_run(tiny_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "tinyrun"
    cli.cmd_solve(tiny_path, out_dir=out)
    return out


class TestScenarioParsing:
    def test_example1_round_trips_table_values(self):
        scn = parse_scenario(bundled_scenario_path("example1"))
        assert scn.params.r_capture == 1.0
        assert scn.params.r_evade == 500.0
        assert scn.evader.mass == 1000.0
        assert scn.evader.ref_area == pytest.approx(np.pi / 4 * 25.0)
        assert scn.evader.u_max_g == 7.0
        assert scn.pursuers[0].u_max_g == 8.0
        assert scn.evader.mach_min == 0.5
        assert np.allclose(scn.evader.x0, [-10000.0, 0.0, 31000.0, 3000.0, 0.0, 0.0])
        assert np.allclose(scn.asset_position, [0.0, 0.0, 30000.0])

    def test_examples_2_to_4_pursuer_roster(self):
        rosters = {2: ["pursuer1", "pursuer2"],
                   3: ["pursuer1", "pursuer2", "pursuer3"],
                   4: ["pursuer1", "pursuer2", "pursuer3", "pursuer4"]}
        starts = {"pursuer1": [4000.0, 0.0], "pursuer2": [5000.0, 0.0],
                  "pursuer3": [3000.0, -500.0], "pursuer4": [3000.0, 500.0]}
        for n, names in rosters.items():
            scn = parse_scenario(bundled_scenario_path(f"example{n}"))
            assert [p.name for p in scn.pursuers] == names
            for p in scn.pursuers:
                assert p.x0[0] == starts[p.name][0]
                assert p.x0[1] == starts[p.name][1]

    def test_two_evaders_rejected(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text(TINY_SCENARIO + TINY_SCENARIO.split("[[players]]")[1].join(
            ["\n[[players]]", ""]))
        text = TINY_SCENARIO + """
[[players]]
name = "evader2"
role = "evader"
position_ft = [1.0, 0.0, 30000.0]
"""
        bad.write_text(text)
        with pytest.raises(ScenarioError, match="exactly one evader"):
            parse_scenario(bad)

    def test_zero_pursuers_valid(self, tiny_path):
        scn = parse_scenario(tiny_path)
        assert scn.pursuers == []

    def test_unknown_keys_rejected(self, tmp_path):
        bad = tmp_path / "bad2.toml"
        bad.write_text(TINY_SCENARIO + "\n[solver]\nmagic = 1\n")
        with pytest.raises(ScenarioError, match="unknown key"):
            parse_scenario(bad)
        bad.write_text(TINY_SCENARIO.replace("capture_radius_ft", "capture_radius"))
        with pytest.raises(ScenarioError):
            parse_scenario(bad)

    def test_serialize_parse_identity(self, tmp_path):
        scn = parse_scenario(bundled_scenario_path("example3"))
        out = tmp_path / "roundtrip.toml"
        serialize_scenario(scn, out)
        scn2 = parse_scenario(out)
        assert scn2.name == scn.name
        assert scn2.params == scn.params
        assert scn2.weights == scn.weights
        assert scn2.n_scp == scn.n_scp and scn2.n_ibr == scn.n_ibr
        assert scn2.evasion_memory == scn.evasion_memory
        for a, b in zip(scn.players, scn2.players):
            assert a.name == b.name and a.role == b.role
            assert np.array_equal(a.x0, b.x0)
            assert (a.mass, a.ref_area, a.u_max_g, a.mach_min, a.node_count) == \
                   (b.mass, b.ref_area, b.u_max_g, b.mach_min, b.node_count)


class TestSolveRun:
    def test_run_directory_contents(self, tiny_run):
        assert (tiny_run / "scenario.toml").exists()
        log = json.loads((tiny_run / "run_log.json").read_text())
        assert log["complete"] and log["iterations_done"] == 2
        assert (tiny_run / "iterations/iter_01/evader.csv").exists()
        assert (tiny_run / "iterations/iter_02/meta.json").exists()
        assert (tiny_run / "history/iter_01_evader.csv").exists()
        assert log["recorded"], "zero-pursuer run records the evader"
        assert log["recorded"][0]["player"] == "evader"

    def test_trajectory_csv_columns(self, tiny_run):
        head = (tiny_run / "iterations/iter_01/evader.csv").read_text().splitlines()[0]
        assert head.split(",") == runio.TRAJECTORY_COLUMNS

    def test_resume_continues_iterations(self, tiny_path, tmp_path):
        out = tmp_path / "resume_run"
        cli.cmd_solve(tiny_path, out_dir=out, n_ibr=1)
        log1 = json.loads((out / "run_log.json").read_text())
        assert log1["iterations_done"] == 1
        cli.cmd_solve(tiny_path, out_dir=out, n_ibr=3)
        log2 = json.loads((out / "run_log.json").read_text())
        assert log2["iterations_done"] == 3
        assert (out / "iterations/iter_03/evader.csv").exists()

    def test_verify_and_report(self, tiny_run):
        results = cli.cmd_verify(tiny_run, laws="pn", ratios="3")
        assert results["open_loop"]["outcome"] == "evader_reaches_asset"
        assert (tiny_run / "verify/engagements.csv").exists()
        plots = cli.cmd_report(tiny_run)
        for name in ("iterations.svg", "trajectory_3d.svg", "states.svg",
                     "mach_cd.svg", "accel.svg"):
            assert (plots / name).exists(), name

    def test_report_deterministic_on_copy(self, tiny_run, tmp_path):
        clone = tmp_path / "clone"
        shutil.copytree(tiny_run, clone)
        cli.cmd_report(clone)
        for svg in sorted((tiny_run / "plots").glob("*.svg")):
            other = clone / "plots" / svg.name
            assert other.read_bytes() == svg.read_bytes(), svg.name


class TestCliProcess:
    def _run(self, *args):
        return subprocess.run([sys.executable, "-m", "assetguard.cli", *args],
                              capture_output=True, text=True)

    def test_bad_scenario_exit_code(self, tmp_path):
        bad = tmp_path / "nope.toml"
        bad.write_text("name = 'x'\n")
        proc = self._run("solve", str(bad))
        assert proc.returncode == cli.EXIT_VALIDATION

    def test_missing_artifact_exit_code(self, tmp_path):
        empty = tmp_path / "emptydir"
        empty.mkdir()
        proc = self._run("report", str(empty))
        assert proc.returncode == cli.EXIT_VALIDATION
        assert "run_log" in proc.stderr

    def test_verify_before_solve_fails(self, tmp_path):
        proc = self._run("verify", str(tmp_path))
        assert proc.returncode == cli.EXIT_VALIDATION
