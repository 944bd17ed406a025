"""Flat key-value configuration.

One text file holds every tunable, namespaced per subsystem
(``sim.*``, ``world.*``, ``mpl.*``, ``cpn.*``, ``uncertainty.*``,
``planner.*``, ``dataset.*``, ``train.*``, ``goal.*``, ``eval.*``).
Syntax is a TOML-like ``key = value`` per line; ``#`` starts a comment.
Values parse as bool, int, float, quoted or bare string, or a
``[a, b, c]`` list of the above.
"""

from __future__ import annotations

from pathlib import Path


DEFAULTS: dict = {
    # first-order dynamics and robot geometry
    "sim.dt": 0.1,
    "sim.tau_v": 0.6,
    "sim.tau_omega": 0.15,
    "sim.k_psi": 2.0,
    "sim.omega_max": 1.0,
    "sim.v_max": 2.0,
    "sim.robot_radius": 0.25,
    "sim.flight_height": 1.0,
    # depth camera
    "sim.image_rows": 24,
    "sim.image_cols": 32,
    "sim.fov_h_deg": 87.0,
    "sim.fov_v_deg": 58.0,
    "sim.max_range": 5.0,
    "sim.p_holes": 0.1,
    # procedural worlds
    "world.size_x": 20.0,
    "world.size_y": 20.0,
    "world.density": 0.06,
    "world.adversarial_holes": True,
    "world.hole_margin": 1.2,
    "world.spawn_clearance": 1.5,
    # depth completion
    "filter.kernel_radius": 1,
    "filter.passes": 3,
    "filter.fill_order": "nearest-valid-min",
    # motion primitive library
    "mpl.n_steer": 64,
    "mpl.speeds": [1.25],
    "mpl.horizon": 18,
    "mpl.fov_margin_deg": 5.0,
    # collision prediction network
    "cpn.conv_channels": [8, 16, 32],
    "cpn.d_img": 64,
    "cpn.d_state": 16,
    "cpn.d_hidden": 32,
    "cpn.p_drop": 0.2,
    # uncertainty propagation
    "uncertainty.lambda": 0.4,
    "uncertainty.alpha": 1.0,
    "uncertainty.kappa_ut": 1.0,
    "uncertainty.n_mc": 5,
    "uncertainty.sigma_v": 0.4,
    "uncertainty.sigma_omega": 0.1,
    # planner
    "planner.c_th": 0.2,
    "planner.mode": "uncertainty-aware",
    # goal source
    "goal.kind": "fixed-heading",
    "goal.heading_deg": 0.0,
    "goal.waypoints": [],
    "goal.waypoint_radius": 1.0,
    # data collection
    "dataset.delta_th": 0.5,
    "dataset.v_min": 0.4,
    "dataset.v_max": 1.5,
    "dataset.episode_timeout": 40.0,
    "dataset.target_records": 20000,
    "dataset.balance_tol": 0.1,
    # training
    "train.lr": 1e-3,
    "train.batch": 64,
    "train.w_pos": 4.0,
    "train.epochs": 12,
    "train.val_fraction": 0.1,
    # evaluation experiments
    "eval.n_runs": 20,
    "eval.timeout": 100.0,
    "eval.delta_v": 1.0,
    "eval.delta_omega": 0.1,
}


class ConfigError(ValueError):
    pass


def _parse_scalar(text: str):
    text = text.strip()
    if not text:
        raise ConfigError("empty value")
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_value(text: str):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(part) for part in inner.split(",")]
    return _parse_scalar(text)


class Config:
    """Dotted-key configuration with typed accessors.

    Unknown keys are rejected at load time so typos fail loudly.
    """

    def __init__(self, values: dict | None = None):
        self._values = dict(DEFAULTS)
        if values:
            for key, val in values.items():
                self.set(key, val)

    def set(self, key: str, value) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key: {key!r}")
        self._values[key] = value

    def get(self, key: str):
        if key not in self._values:
            raise ConfigError(f"unknown config key: {key!r}")
        return self._values[key]

    def get_float(self, key: str) -> float:
        val = self.get(key)
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{key} must be a number, got {val!r}")
        return float(val)

    def get_int(self, key: str) -> int:
        val = self.get(key)
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{key} must be an integer, got {val!r}")
        return val

    def get_bool(self, key: str) -> bool:
        val = self.get(key)
        if not isinstance(val, bool):
            raise ConfigError(f"{key} must be a bool, got {val!r}")
        return val

    def get_str(self, key: str) -> str:
        val = self.get(key)
        if not isinstance(val, str):
            raise ConfigError(f"{key} must be a string, got {val!r}")
        return val

    def get_list(self, key: str) -> list:
        val = self.get(key)
        if not isinstance(val, list):
            raise ConfigError(f"{key} must be a list, got {val!r}")
        return list(val)

    def get_float_list(self, key: str) -> list[float]:
        return [float(v) for v in self.get_list(key)]

    def as_dict(self) -> dict:
        return dict(self._values)

    def copy(self) -> "Config":
        out = Config()
        out._values = dict(self._values)
        return out


def parse_config_text(text: str) -> dict:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        try:
            values[key] = _parse_value(val)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return values


def load_config(path: str | Path | None = None,
                overrides: dict | None = None) -> Config:
    """Defaults, overlaid by an optional file, overlaid by explicit overrides."""
    cfg = Config()
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        for key, val in parse_config_text(text).items():
            cfg.set(key, val)
    if overrides:
        for key, val in overrides.items():
            cfg.set(key, val)
    return cfg


def _format_value(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, list):
        return "[" + ", ".join(_format_value(v) for v in val) + "]"
    if isinstance(val, str):
        return f'"{val}"'
    return repr(val)


def config_to_text(cfg: Config) -> str:
    """Serialize the resolved configuration; parse_config_text inverts it."""
    lines = [f"{key} = {_format_value(val)}"
             for key, val in sorted(cfg.as_dict().items())]
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> Config:
    return Config(parse_config_text(text))
