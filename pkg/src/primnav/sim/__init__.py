from .world import (
    GenerationError,
    Obstacle,
    World,
    WorldFormatError,
    WorldGenConfig,
    generate_world,
    load_world,
    save_world,
)
from .dynamics import Action, DynamicsParams, RobotState, step_dynamics
from .camera import CameraConfig, DepthImage, render_depth
from .collision import check_collision

__all__ = [
    "Action",
    "CameraConfig",
    "DepthImage",
    "DynamicsParams",
    "GenerationError",
    "Obstacle",
    "RobotState",
    "World",
    "WorldFormatError",
    "WorldGenConfig",
    "check_collision",
    "generate_world",
    "load_world",
    "render_depth",
    "save_world",
    "step_dynamics",
]
