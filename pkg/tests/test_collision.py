import math

import numpy as np
import pytest

from primnav.sim.collision import check_collision
from primnav.sim.dynamics import RobotState
from primnav.sim.world import Obstacle, World, WorldGenConfig, generate_world

R_ROBOT = 0.25
HEIGHT = 1.0


def _world(*obstacles, bounds=(-50.0, -50.0, 50.0, 50.0)):
    return World(bounds=bounds, obstacles=tuple(obstacles), seed=0)


def _at(x, y):
    return RobotState(x=x, y=y, yaw=0.0, v=0.0, omega=0.0)


def test_empty_world_center_is_free():
    world = generate_world(WorldGenConfig(density=0.0,
                                          adversarial_holes=False), seed=7)
    assert not check_collision(world, _at(0, 0), R_ROBOT, HEIGHT)


def test_disc_wall_face_threshold():
    # wall front face at x = 2.0; disc-to-face distance is closed form
    wall = Obstacle(kind="box", x=2.05, y=0.0, yaw=0.0, dims=(0.1, 8.0),
                    height=3.0)
    eps = 1e-6
    assert not check_collision(_world(wall), _at(2.0 - R_ROBOT - eps, 0.0),
                               R_ROBOT, HEIGHT)
    assert check_collision(_world(wall), _at(2.0 - R_ROBOT + eps, 0.0),
                           R_ROBOT, HEIGHT)


def test_inside_cylinder_collides():
    cyl = Obstacle(kind="cylinder", x=1.0, y=1.0, yaw=0.0, dims=(0.5,),
                   height=2.0)
    assert check_collision(_world(cyl), _at(1.0, 1.0), R_ROBOT, HEIGHT)


def test_short_obstacle_passes_under():
    stump = Obstacle(kind="box", x=0.0, y=0.0, yaw=0.0, dims=(1.0, 1.0),
                     height=0.5)
    assert not check_collision(_world(stump), _at(0.0, 0.0), R_ROBOT,
                               flight_height=1.0)
    assert check_collision(_world(stump), _at(0.0, 0.0), R_ROBOT,
                           flight_height=0.4)


def test_exiting_bounds_collides():
    world = _world(bounds=(-2.0, -2.0, 2.0, 2.0))
    assert not check_collision(world, _at(0.0, 0.0), R_ROBOT, HEIGHT)
    assert check_collision(world, _at(1.8, 0.0), R_ROBOT, HEIGHT)
    assert check_collision(world, _at(0.0, -1.76), R_ROBOT, HEIGHT)


def test_hole_gap_is_passable_where_wide_enough():
    wall = Obstacle(kind="wall-with-hole", x=0.0, y=0.0, yaw=math.pi / 2,
                    dims=(6.0, 0.1), height=2.5, hole=(-0.4, 0.4, 0.5, 1.5))
    world = _world(wall)
    # centered in the aperture: nearest slab edge is 0.4 m > robot radius
    assert not check_collision(world, _at(0.0, 0.0), R_ROBOT, HEIGHT)
    # off-center toward a slab edge
    assert check_collision(world, _at(0.0, 0.3), R_ROBOT, HEIGHT)
    # at a height where the aperture does not exist
    assert check_collision(world, _at(0.0, 0.0), R_ROBOT, flight_height=0.3)


def test_rigid_transform_invariance():
    # rotating+translating world and robot together never changes the verdict
    rng = np.random.default_rng(3)
    base = generate_world(WorldGenConfig(density=0.08, size_x=14.0,
                                         size_y=14.0), seed=21)
    huge = (-1000.0, -1000.0, 1000.0, 1000.0)
    for _ in range(40):
        px, py = rng.uniform(-7, 7, size=2)
        state = _at(px, py)
        verdict = check_collision(
            World(bounds=huge, obstacles=base.obstacles, seed=0), state,
            R_ROBOT, HEIGHT)

        theta = rng.uniform(-math.pi, math.pi)
        tx, ty = rng.uniform(-5, 5, size=2)
        c, s = math.cos(theta), math.sin(theta)
        moved = tuple(
            Obstacle(kind=o.kind,
                     x=c * o.x - s * o.y + tx,
                     y=s * o.x + c * o.y + ty,
                     yaw=o.yaw + theta, dims=o.dims, height=o.height,
                     hole=o.hole)
            for o in base.obstacles)
        state2 = _at(c * px - s * py + tx, s * px + c * py + ty)
        verdict2 = check_collision(
            World(bounds=huge, obstacles=moved, seed=0), state2,
            R_ROBOT, HEIGHT)
        assert verdict == verdict2
