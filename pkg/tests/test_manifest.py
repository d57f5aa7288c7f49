"""Presets, manifests and configuration loading."""

from dataclasses import fields

import pytest

from src import output
from src.errors import ConfigError
from src.manifest import RunManifest, load_config, resolve
from src.scenarios import SCENARIOS, Scenario, custom_problem, get_scenario, reference_dt


class TestScenarios:
    def test_reference_data(self):
        for name in ("fig1", "fig2", "fig3"):
            scenario = get_scenario(name)
            spec = scenario.spec
            assert spec.diffusion.u_c == 0.6 and spec.u_max == 1.0
            assert spec.phi(0.7) == pytest.approx(0.1)
            assert spec.u0(0.25) == 0.0 and spec.u0(0.75) == 0.7
            assert spec.horizon == 0.12
            assert scenario.dx == 0.01
        assert reference_dt(0.01) == pytest.approx(2e-5)

    def test_functions(self):
        assert get_scenario("fig1").spec.f(0.6) == pytest.approx(0.18)
        assert get_scenario("fig2").spec.b(0.3) == pytest.approx(0.3)
        assert get_scenario("fig3").spec.b(0.3) == 0.0
        assert get_scenario("fig3").spec.f(1.2) == 0.0
        assert get_scenario("zero-flux").spec.b(0.9) == 0.0

    def test_expected_failures(self):
        assert get_scenario("fig1").expected_fail == {"max_principle"}
        assert get_scenario("fig2").expected_fail == {"boundary_condition"}
        assert not get_scenario("fig3").expected_fail
        assert set(SCENARIOS) >= {"fig1", "fig2", "fig3", "zero-flux"}

    def test_scenario_fields(self):
        # the step size comes from the manifest, not from the preset
        assert [f.name for f in fields(Scenario)] == ["name", "description", "build", "dx", "violated", "expected_fail"]

    def test_output_keeps_no_console_of_its_own(self):
        assert not hasattr(output, "console")

    def test_unknown(self):
        with pytest.raises(ConfigError):
            get_scenario("fig9")

    def test_custom_problem(self):
        spec = custom_problem({"flux_fn": "burgers", "boundary": "zero", "u0": 0.2, "domain": [0.0, 2.0]}, name="mine")
        assert spec.f(0.4) == pytest.approx(0.08)
        assert spec.b(0.9) == 0.0
        assert spec.u0(1.5) == pytest.approx(0.2)
        assert spec.domain == (0.0, 2.0)

    def test_custom_problem_rejects_bad_data(self):
        with pytest.raises(ConfigError):
            custom_problem({"flux_fn": "cubic"})
        with pytest.raises(ConfigError):
            custom_problem({"u0": {"type": "constant", "value": 2.0}})


class TestManifest:
    def test_cli_options_win(self):
        manifest = RunManifest.from_sources({"dx": 0.02, "flux": None}, {"dx": 0.05, "flux": "rusanov"})
        assert manifest.dx == 0.02
        assert manifest.flux == "rusanov"
        assert manifest.scenario == "fig3"

    def test_unknown_keys(self):
        with pytest.raises(ConfigError):
            RunManifest.from_sources({}, {"colour": "red"})

    def test_environment(self, monkeypatch):
        monkeypatch.setenv("DEGENFV_SEED", "11")
        monkeypatch.setenv("DEGENFV_OUT", "/tmp/degenfv-env")
        manifest = RunManifest.from_sources({}, {})
        assert manifest.seed == 11
        assert manifest.out == "/tmp/degenfv-env"

    def test_bad_seed(self, monkeypatch):
        monkeypatch.setenv("DEGENFV_SEED", "many")
        with pytest.raises(ConfigError):
            RunManifest.from_sources({}, {})

    def test_load_config(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("scenario: fig1\ndx: 0.02\nsnapshots: [0.06, 0.12]\n")
        manifest = RunManifest.from_sources({}, load_config(str(path)))
        assert manifest.scenario == "fig1"
        assert manifest.snapshots == (0.06, 0.12)

    def test_missing_config(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.yaml"))

    def test_config_must_be_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError):
            load_config(str(path))


class TestResolve:
    def test_fig3_defaults(self):
        resolved = resolve(RunManifest(scenario="fig3"))
        assert resolved.grid.cells == 100
        assert resolved.config.dt == pytest.approx(2e-5)
        assert resolved.config.flux.name == "godunov"
        assert resolved.config.snapshot_times == pytest.approx((0.04, 0.08, 0.12))
        assert not resolved.expected_fail

    def test_overrides(self):
        resolved = resolve(RunManifest(scenario="fig1", cells=40, dt="cfl", flux="eo", horizon=0.05, epsilon=0.01))
        assert resolved.grid.cells == 40
        assert resolved.config.dt is None
        assert resolved.config.flux.name == "engquist-osher"
        assert resolved.spec.horizon == 0.05
        assert resolved.config.epsilon == 0.01
        assert resolved.expected_fail == {"max_principle"}

    def test_numeric_dt(self):
        assert resolve(RunManifest(scenario="fig3", dt="1e-5")).config.dt == pytest.approx(1e-5)

    @pytest.mark.parametrize(
        "manifest",
        [
            RunManifest(scenario="fig3", dt="soon"),
            RunManifest(scenario="fig3", dt=-1.0),
            RunManifest(scenario="fig3", horizon=0.0),
            RunManifest(scenario="fig3", cells=2),
            RunManifest(scenario="fig3", flux="roe"),
            RunManifest(scenario="fig3", epsilon=-0.1),
        ],
    )
    def test_invalid(self, manifest):
        with pytest.raises(ConfigError):
            resolve(manifest)

    def test_custom_problem(self):
        resolved = resolve(RunManifest(problem={"flux_fn": "lwr", "boundary": "scaled-phi"}, dx=0.05))
        assert resolved.name == "custom"
        assert resolved.grid.cells == 20
        assert resolved.spec.b(0.8) == pytest.approx(0.4)
