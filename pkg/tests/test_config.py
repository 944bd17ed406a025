import pytest

from primnav.config import (
    Config,
    ConfigError,
    config_from_text,
    config_to_text,
    load_config,
    parse_config_text,
)


def test_defaults_available():
    cfg = Config()
    assert cfg.get_float("sim.dt") == 0.1
    assert cfg.get_int("mpl.n_steer") == 64
    assert cfg.get_bool("world.adversarial_holes") is True
    assert cfg.get_float_list("mpl.speeds") == [1.25]


def test_parse_types():
    values = parse_config_text(
        "a.x = 1\n"
        "# comment line\n"
        "sim.dt = 0.25  # trailing comment\n"
        'planner.mode = "naive"\n'
        "world.adversarial_holes = false\n"
        "mpl.speeds = [0.5, 1.0]\n"
    )
    assert values["a.x"] == 1
    assert values["sim.dt"] == 0.25
    assert values["planner.mode"] == "naive"
    assert values["world.adversarial_holes"] is False
    assert values["mpl.speeds"] == [0.5, 1.0]


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        Config({"nope.key": 1})


def test_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("sim.dt = 0.2\nplanner.c_th = 0.5\n")
    cfg = load_config(path, overrides={"sim.dt": 0.05})
    assert cfg.get_float("sim.dt") == 0.05      # override beats file
    assert cfg.get_float("planner.c_th") == 0.5  # file beats default


def test_text_round_trip():
    cfg = Config({"planner.mode": "naive", "mpl.speeds": [0.5, 1.5]})
    text = config_to_text(cfg)
    back = config_from_text(text)
    assert back.as_dict() == cfg.as_dict()


def test_typed_accessor_errors():
    cfg = Config()
    with pytest.raises(ConfigError):
        cfg.get_int("sim.dt")
    with pytest.raises(ConfigError):
        cfg.get_bool("sim.dt")
    with pytest.raises(ConfigError):
        cfg.get("not.a.key")
