import math

import numpy as np
import pytest

from primnav.angles import wrap_angle
from primnav.config import Config
from primnav.mpl import build_mpl, mpl_from_config
from primnav.sim.dynamics import DynamicsParams, RobotState, step_dynamics

FOV_H = math.radians(87.0)


def test_three_steer_grid_hits_endpoints():
    lib = build_mpl(speeds=[1.0], n_steer=3, fov_h=1.2 + 2 * 0.0,
                    fov_margin=0.0, horizon=4)
    assert np.allclose(lib.steers(), [-0.6, 0.0, 0.6])


def test_paper_scale_library():
    # 64 steering angles at a single 1.25 m/s speed, 18-step horizon
    lib = build_mpl(speeds=[1.25], n_steer=64, fov_h=FOV_H,
                    fov_margin=math.radians(5.0), horizon=18)
    assert len(lib) == 64
    assert lib.horizon == 18
    assert all(seq.horizon == 18 for seq in lib.sequences)
    assert set(lib.speeds()) == {1.25}
    arr = lib.action_array()
    assert arr.shape == (64, 18, 2)
    # constant within each primitive
    assert (arr == arr[:, :1, :]).all()


def test_steering_respects_fov_margin():
    margin = math.radians(5.0)
    lib = build_mpl(speeds=[1.0], n_steer=64, fov_h=FOV_H, fov_margin=margin,
                    horizon=6)
    limit = FOV_H / 2 - margin
    assert (np.abs(lib.steers()) <= limit + 1e-12).all()


def test_left_right_symmetry():
    lib = build_mpl(speeds=[0.8, 1.2], n_steer=9, fov_h=FOV_H,
                    fov_margin=0.05, horizon=5)
    steers = lib.steers()
    speeds = lib.speeds()
    pairs = set(zip(speeds.round(9), steers.round(9)))
    for v, s in pairs:
        assert (v, round(-s, 9)) in pairs


def test_speed_major_ordering():
    lib = build_mpl(speeds=[0.5, 1.5], n_steer=3, fov_h=1.2, fov_margin=0.0,
                    horizon=2)
    assert list(lib.speeds()) == [0.5, 0.5, 0.5, 1.5, 1.5, 1.5]
    assert list(lib.steers()[:3]) == sorted(lib.steers()[:3])


def test_invalid_grids_rejected():
    with pytest.raises(ValueError):
        build_mpl(speeds=[1.0], n_steer=1, fov_h=1.0, fov_margin=0.1,
                  horizon=4)
    with pytest.raises(ValueError):
        build_mpl(speeds=[], n_steer=4, fov_h=1.0, fov_margin=0.1, horizon=4)
    with pytest.raises(ValueError):
        build_mpl(speeds=[-1.0], n_steer=4, fov_h=1.0, fov_margin=0.1,
                  horizon=4)
    with pytest.raises(ValueError):
        build_mpl(speeds=[1.0], n_steer=4, fov_h=0.2, fov_margin=0.2,
                  horizon=4)


def test_rollout_keeps_heading_inside_fov():
    # open-loop execution of any primitive ends with a heading offset
    # that stays inside the sensor half-FOV
    lib = mpl_from_config(Config())
    params = DynamicsParams()
    for seq in lib.sequences[:: max(1, len(lib) // 16)]:
        state = RobotState(x=0, y=0, yaw=0.0, v=seq.v_ref, omega=0.0)
        for _ in range(seq.horizon):
            state = step_dynamics(state, seq.first_action(), params,
                                  plan_yaw=0.0)
        assert abs(wrap_angle(state.yaw)) <= FOV_H / 2 + 1e-9
