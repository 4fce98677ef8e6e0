import pytest

from mecafleet.config import ConfigError, ScenarioConfig, dump_config, load_config


class TestLoad:
    def test_defaults_without_file(self):
        config = load_config()
        assert config.version == 1
        assert config.scenario.kind == "swap_8"
        assert config.physics.mass == 3.0
        assert config.pid.kp == 60.0

    def test_yaml_roundtrip(self, tmp_path):
        path = tmp_path / "scenario.yaml"
        path.write_text(
            "version: 1\n"
            "name: circle-demo\n"
            "seed: 7\n"
            "duration_s: 8.0\n"
            "scenario:\n"
            "  kind: circle_track\n"
            "  circle: {diameter: 1.5, speed: 1.7}\n"
            "thresholds:\n"
            "  mean_error_max: 0.15\n"
        )
        config = load_config(path)
        assert config.name == "circle-demo"
        assert config.scenario.kind == "circle_track"
        assert config.thresholds.mean_error_max == 0.15
        # dump re-parses to the same model
        again = ScenarioConfig.model_validate(
            __import__("yaml").safe_load(dump_config(config))
        )
        assert again == config

    def test_invalid_yaml_reports_line(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("scenario:\n  kind: [unclosed\n")
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert "line" in str(err.value)

    def test_field_errors_carry_paths(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("version: 1\nscenario:\n  kind: teleport\nduration_s: -3\n")
        with pytest.raises(ConfigError) as err:
            load_config(path)
        message = str(err.value)
        assert "scenario.kind" in message
        assert "duration_s" in message

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v9.yaml"
        path.write_text("version: 9\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_overrides_dotted_paths(self):
        config = load_config(overrides={"scenario.kind": "line_track", "seed": 99})
        assert config.scenario.kind == "line_track"
        assert config.seed == 99

    def test_env_overrides(self):
        config = load_config(env={"FLEET_INFRA_PORT": "50123", "FLEET_SEED": "31"})
        assert config.network.infra_port == 50123
        assert config.seed == 31

    def test_env_override_bad_value(self):
        with pytest.raises(ConfigError):
            load_config(env={"FLEET_SEED": "not-a-number"})

    def test_robot_id_range(self, tmp_path):
        path = tmp_path / "ids.yaml"
        path.write_text("robots:\n- id: 900\n")
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert "robots.0.id" in str(err.value)
