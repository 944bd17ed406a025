"""Ground-truth collision checking for the robot disc."""

from __future__ import annotations

from .dynamics import RobotState
from .geometry import disc_distance
from .world import World


def check_collision(world: World, state: RobotState, robot_radius: float,
                    flight_height: float) -> bool:
    """True iff the robot disc touches an obstacle at flight height or
    leaves the arena bounds."""
    xmin, ymin, xmax, ymax = world.bounds
    if (state.x - robot_radius < xmin or state.x + robot_radius > xmax
            or state.y - robot_radius < ymin or state.y + robot_radius > ymax):
        return True
    for part in world.obstacle_parts():
        if disc_distance(part, state.x, state.y, flight_height) <= robot_radius:
            return True
    return False
