"""Scripted goal-direction sources standing in for a global planner.

The waypoint policy reads the simulator's true position; that is fine
here because the goal source is explicitly external to the planner's
no-position assumption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .angles import wrap_angle
from .sim.dynamics import RobotState

KIND_FIXED = "fixed-heading"
KIND_WAYPOINT = "waypoint-bearing"
KIND_CURRENT = "current-heading"


@dataclass
class GoalPolicy:
    kind: str = KIND_FIXED
    heading: float = 0.0
    waypoints: list[tuple[float, float]] = field(default_factory=list)
    waypoint_radius: float = 1.0
    _current: int = 0

    def __post_init__(self):
        if self.kind not in (KIND_FIXED, KIND_WAYPOINT, KIND_CURRENT):
            raise ValueError(f"unknown goal policy kind {self.kind!r}")
        if self.kind == KIND_WAYPOINT and not self.waypoints:
            raise ValueError("waypoint-bearing policy needs waypoints")

    @classmethod
    def from_config(cls, cfg) -> "GoalPolicy":
        kind = cfg.get_str("goal.kind")
        waypoints = cfg.get_list("goal.waypoints")
        pairs = [(float(waypoints[i]), float(waypoints[i + 1]))
                 for i in range(0, len(waypoints) - 1, 2)]
        return cls(
            kind=kind,
            heading=math.radians(cfg.get_float("goal.heading_deg")),
            waypoints=pairs,
            waypoint_radius=cfg.get_float("goal.waypoint_radius"),
        )

    def reset(self) -> None:
        self._current = 0

    def goal_heading(self, state: RobotState) -> float:
        """Goal heading in [-pi, pi] for the current robot pose."""
        if self.kind == KIND_FIXED:
            return wrap_angle(self.heading)
        if self.kind == KIND_CURRENT:
            return wrap_angle(state.yaw)
        # advance past reached waypoints (sticking at the last one)
        while self._current < len(self.waypoints) - 1:
            wx, wy = self.waypoints[self._current]
            if math.hypot(wx - state.x, wy - state.y) > self.waypoint_radius:
                break
            self._current += 1
        wx, wy = self.waypoints[self._current]
        return math.atan2(wy - state.y, wx - state.x)
