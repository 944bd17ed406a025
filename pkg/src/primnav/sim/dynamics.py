"""First-order closed-loop dynamics for a velocity/yaw-controlled robot.

The low-level speed and yaw-rate loops are modeled as first-order
responses; steering references are yaw offsets from the yaw at plan time,
tracked by a proportional yaw controller with a rate limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..angles import wrap_angle


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    yaw: float       # [-pi, pi]
    v: float         # forward speed, m/s
    omega: float     # yaw rate, rad/s


@dataclass(frozen=True)
class Action:
    """One step of a primitive: reference speed and steering offset."""

    v_ref: float
    steer: float


@dataclass(frozen=True)
class DynamicsParams:
    dt: float = 0.1
    tau_v: float = 0.6
    tau_omega: float = 0.15
    k_psi: float = 2.0
    omega_max: float = 1.0
    v_max: float = 2.0

    @classmethod
    def from_config(cls, cfg) -> "DynamicsParams":
        return cls(
            dt=cfg.get_float("sim.dt"),
            tau_v=cfg.get_float("sim.tau_v"),
            tau_omega=cfg.get_float("sim.tau_omega"),
            k_psi=cfg.get_float("sim.k_psi"),
            omega_max=cfg.get_float("sim.omega_max"),
            v_max=cfg.get_float("sim.v_max"),
        )


def step_dynamics(state: RobotState, action: Action, params: DynamicsParams,
                  plan_yaw: float, dt: float | None = None) -> RobotState:
    """Advance one control period.

    plan_yaw is the yaw the steering offset is measured from (the robot's
    yaw when the current primitive was chosen). Speed and yaw rate follow
    first-order responses; position integrates forward-only unicycle
    kinematics at the midpoint yaw.
    """
    if dt is None:
        dt = params.dt
    if dt <= 0:
        raise ValueError("dt must be positive")

    # first-order filter coefficients capped at 1 so the response never
    # overshoots even for dt > tau
    a_v = min(dt / params.tau_v, 1.0)
    a_w = min(dt / params.tau_omega, 1.0)

    v_ref = min(max(action.v_ref, 0.0), params.v_max)
    v_new = state.v + a_v * (v_ref - state.v)
    v_new = min(max(v_new, 0.0), params.v_max)

    yaw_target = plan_yaw + action.steer
    yaw_err = wrap_angle(yaw_target - state.yaw)
    omega_cmd = max(-params.omega_max,
                    min(params.k_psi * yaw_err, params.omega_max))
    omega_new = state.omega + a_w * (omega_cmd - state.omega)

    yaw_mid = state.yaw + 0.5 * omega_new * dt
    x_new = state.x + v_new * dt * math.cos(yaw_mid)
    y_new = state.y + v_new * dt * math.sin(yaw_mid)
    yaw_new = wrap_angle(state.yaw + omega_new * dt)

    return RobotState(x=x_new, y=y_new, yaw=yaw_new, v=v_new, omega=omega_new)
