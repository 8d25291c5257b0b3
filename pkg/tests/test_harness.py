import json
from pathlib import Path

import numpy as np
import pytest

from kintraffic.core import GridSpec, ModelParams, mass
from kintraffic.harness import (ConfigError, build_scenario, check_invariants, config_docs_table, default_config,
                                fundamental_diagram, load_config, parse_config, read_f_snapshot, read_macro_csv,
                                write_f_snapshot, write_macro_csv)
from kintraffic.harness.cli import main
from kintraffic.harness.diagram import is_nonincreasing, is_unimodal
from kintraffic.harness.scenarios import TOLLGATE_PRESET
from kintraffic.kernels import transition_density
from kintraffic.solver import SolverConfig, Trajectory, run

ROOT = Path(__file__).resolve().parents[1]
SMALL = {"grid": {"n_x": 16, "n_v": 8, "n_u": 2}, "solver": {"t_end": 0.1}}


def write_json(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


class TestConfig:
    def test_defaults_fill_in(self):
        cfg = parse_config({"grid": {"n_x": 8}})
        assert cfg.data["grid"]["n_x"] == 8 and cfg.data["grid"]["n_v"] == 64
        assert cfg.data["solver"]["dt"] == "auto" and cfg.data["model"]["alpha"] == 1.0

    @pytest.mark.parametrize("doc, fragment", [
        ({"model": {"alpha": 1.5}}, "model.alpha"),
        ({"model": {"alpha": [0.5, 0.5]}}, "model.alpha"),
        ({"modle": {}}, "unknown section"),
        ({"grid": {"nx": 4}}, "unknown key"),
        ({"grid": {"n_x": 2.5}}, "grid.n_x"),
        ({"grid": {"n_u": 2, "u_nodes": [1.0]}}, "grid.u_nodes"),
        ({"solver": {"dt": "fast"}}, "solver.dt"),
        ({"solver": {"keep_f": 1}}, "solver.keep_f"),
        ({"model": {"L": 1.0, "alpha": 1.0, "d_c": 0.2}, "grid": {"n_x": 4}}, None),
        ({"action": {"kind": "tollgate", "x1": 0.6, "x2": 0.4}}, "action.x1"),
    ])
    def test_rejections(self, doc, fragment):
        if fragment is None:
            parse_config(doc)
            return
        with pytest.raises(ConfigError, match=fragment.replace(".", r"\.")):
            parse_config(doc)

    def test_round_trip(self, tmp_path):
        cfg = parse_config(TOLLGATE_PRESET)
        again = load_config(write_json(tmp_path, json.loads(cfg.to_json())))
        assert again.data == cfg.data and again.to_json() == cfg.to_json()

    def test_parse_error_reports_position(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"grid": {"n_x": 8,}}')
        with pytest.raises(ConfigError, match="line 1, column"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.json")

    def test_docs_table_is_current(self):
        assert config_docs_table() in (ROOT / "docs" / "config.md").read_text()


class TestScenarios:
    def test_uniform_initial_field(self):
        grid, params, f0, action = build_scenario(parse_config(SMALL))
        assert action is None and f0.shape == grid.shape
        assert mass(f0, grid) == pytest.approx(0.3, rel=1e-12)

    def test_tollgate_preset(self):
        grid, _, f0, action = build_scenario(parse_config(TOLLGATE_PRESET))
        inside = (grid.x >= 0.45) & (grid.x <= 0.55)
        assert np.all(action.mu0[inside] > 0) and np.all(action.mu0[~inside] == 0)
        assert np.all(np.diff(action.v_e[inside]) <= 0)
        assert np.all(action.f_e >= 0)


class TestIO:
    def test_macro_csv(self, tmp_path):
        g = GridSpec(4, 4)
        traj = run(np.full(g.shape, 0.5), g, ModelParams(), config=SolverConfig(dt=0.1, t_end=0.2))
        path = tmp_path / "m.csv"
        write_macro_csv(traj, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x,rho,mean_v,flux" and len(lines) == 1 + 3 * 4
        assert all(len(line.split(",")) == 5 for line in lines)
        cols = read_macro_csv(path)
        assert np.allclose(cols["flux"], cols["rho"] * cols["mean_v"], atol=1e-15)

    def test_empty_trajectory_writes_header(self, tmp_path):
        path = tmp_path / "e.csv"
        write_macro_csv(Trajectory(GridSpec(2, 2)), path)
        assert path.read_text() == "t,x,rho,mean_v,flux\n"

    def test_snapshot_round_trip(self, tmp_path, rng):
        f = rng.random((3, 4, 2)) * 1e-3
        f[0, 0, 0] = 1 / 3
        path = tmp_path / "f.txt"
        write_f_snapshot(f, path, t=0.1)
        assert path.read_text().splitlines()[0] == "0.10000000000000001 3 4 2"
        t, back = read_f_snapshot(path)
        assert t == 0.1 and np.array_equal(back, f)


class TestDiagram:
    def test_rows(self):
        rows = fundamental_diagram(ModelParams(), [0.2, 0.8], t_relax=4.0, n_v=8)
        for r in rows:
            assert r.flux == r.rho * r.mean_v and 0 <= r.mean_v <= 1
        assert rows[0].rho == pytest.approx(0.2, rel=1e-12)

    def test_window_validation(self):
        with pytest.raises(ValueError):
            fundamental_diagram(ModelParams(), [0.5], t_relax=1.0, settle_window=2.0)

    def test_shape_predicates(self):
        assert is_nonincreasing([3, 2, 2, 1]) and not is_nonincreasing([1, 2])
        assert is_nonincreasing([1.0, 1.0 + 1e-4], tol=1e-3)
        assert is_unimodal([1, 3, 4, 2]) and not is_unimodal([1, 3, 2, 4])


class TestChecks:
    def test_default_suite_passes(self):
        report = check_invariants(parse_config(SMALL))
        assert report["passed"], report
        names = {p["name"] for p in report["properties"]}
        assert {"normalization", "collision_conservation", "support", "periodicity", "mass_conservation",
                "nonnegativity"} <= names
        assert {"clamp_events", "saturation_events", "sigma_floor_hits"} <= set(report["counters"])

    def test_detects_unnormalized_density(self):
        report = check_invariants(parse_config(SMALL), density=lambda *a: 1.1 * transition_density(*a))
        norm = next(p for p in report["properties"] if p["name"] == "normalization")
        assert not norm["passed"] and not report["passed"]
        assert norm["residual"] == pytest.approx(0.1, rel=1e-5)


class TestCLI:
    def test_simulate_outputs_are_deterministic(self, tmp_path):
        cfg = write_json(tmp_path, SMALL)
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
        for name in ("macro.csv", "f_final.txt", "ledger.json", "config.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        ledger = json.loads((tmp_path / "a" / "ledger.json").read_text())
        assert ledger["blowup"] is False and ledger["ledger"][-1]["t"] == 0.1
        echoed = load_config(tmp_path / "a" / "config.json")
        assert echoed.data == parse_config(SMALL).data

    def test_fixed_point_mode(self, tmp_path):
        cfg = write_json(tmp_path, SMALL)
        assert main(["simulate", "--config", str(cfg), "--mode", "fixed-point", "--out", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "ledger.json").read_text())["converged"] is True

    def test_exit_codes(self, tmp_path, capsys):
        bad = write_json(tmp_path, {"model": {"alpha": 1.5}}, "bad.json")
        assert main(["echo-config", "--config", str(bad)]) == 2
        broken = tmp_path / "broken.json"
        broken.write_text("{")
        assert main(["echo-config", "--config", str(broken)]) == 2
        assert "line 1" in capsys.readouterr().err
        small = write_json(tmp_path, SMALL)
        assert main(["simulate", "--config", str(small), "--dt", "0.5", "--out", str(tmp_path / "o")]) == 3
        assert main(["check", "--config", str(small)]) == 0

    def test_echo_config(self, tmp_path, capsys):
        assert main(["echo-config"]) == 0
        assert parse_config(json.loads(capsys.readouterr().out)).data == default_config().data

    def test_diagram_command(self, tmp_path):
        doc = {"grid": {"n_v": 8}, "diagram": {"densities": [0.3, 0.7], "t_relax": 3.0}}
        assert main(["diagram", "--config", str(write_json(tmp_path, doc)), "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "diagram.csv").read_text().splitlines()
        assert lines[0] == "rho,mean_v,flux,settled" and len(lines) == 3
