import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from primnav.config import Config
from primnav.dataset import (
    CollectParams,
    Dataset,
    DatasetFormatError,
    EpisodeRecord,
    augment_flip,
    augment_resample,
    balance_records,
    class_ratio,
    collect_episode,
    fill_labels,
    load_dataset,
    save_dataset,
)
from primnav.sim import CameraConfig, DynamicsParams
from primnav.sim.world import Obstacle, World, WorldGenConfig, generate_world

CAM = CameraConfig(rows=8, cols=12, max_range=5.0, p_holes=0.1)
DYN = DynamicsParams()
PARAMS = CollectParams(horizon=6, delta_th=0.5, timeout=8.0,
                       v_range=(0.4, 1.5), steer_max=0.6,
                       spawn_clearance=1.0)


def _record(labels, steer=0.3, omega=0.1, seed=0):
    rng = np.random.default_rng(seed)
    horizon = len(labels)
    actions = np.stack([np.full(horizon, 1.0),
                        np.full(horizon, steer)], axis=1).astype(np.float32)
    return EpisodeRecord(
        depth=rng.uniform(0.5, 5, size=(4, 6)).astype(np.float32),
        valid=rng.random((4, 6)) < 0.9,
        v=1.0, omega=omega, actions=actions,
        labels=np.asarray(labels, dtype=np.uint8), episode_id=3,
    )


# ---------- label filling ----------

def test_fill_labels_rule():
    assert fill_labels(1, 4).tolist() == [1, 1, 1, 1]
    assert fill_labels(4, 4).tolist() == [0, 0, 0, 1]
    assert fill_labels(3, 5).tolist() == [0, 0, 1, 1, 1]


def test_fill_labels_bounds():
    with pytest.raises(ValueError):
        fill_labels(0, 5)
    with pytest.raises(ValueError):
        fill_labels(6, 5)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 18), st.integers(1, 18))
def test_fill_labels_monotone(k, horizon):
    if k > horizon:
        return
    labels = fill_labels(k, horizon)
    assert (np.diff(labels.astype(int)) >= 0).all()
    assert labels.sum() == horizon - k + 1


# ---------- flip augmentation ----------

def test_flip_is_involution():
    rec = _record([0, 0, 1, 1], steer=0.25, omega=-0.4)
    back = augment_flip(augment_flip(rec))
    assert np.array_equal(back.depth, rec.depth)
    assert np.array_equal(back.valid, rec.valid)
    assert np.array_equal(back.actions, rec.actions)
    assert np.array_equal(back.labels, rec.labels)
    assert back.v == rec.v and back.omega == rec.omega


def test_flip_negates_turn_quantities_only():
    rec = _record([0, 1, 1], steer=0.3, omega=0.2)
    flipped = augment_flip(rec)
    assert np.array_equal(flipped.depth, rec.depth[:, ::-1])
    assert np.array_equal(flipped.valid, rec.valid[:, ::-1])
    assert flipped.omega == -rec.omega
    assert np.allclose(flipped.actions[:, 1], -rec.actions[:, 1])
    assert np.array_equal(flipped.actions[:, 0], rec.actions[:, 0])
    assert np.array_equal(flipped.labels, rec.labels)


def test_flip_straight_record_changes_only_image():
    rec = _record([0, 0, 0], steer=0.0, omega=0.0)
    flipped = augment_flip(rec)
    assert flipped.v == rec.v and flipped.omega == -0.0
    assert np.array_equal(flipped.actions, rec.actions)
    assert np.array_equal(flipped.depth, rec.depth[:, ::-1])


def test_flip_symmetric_image_mirrors_steer():
    rec = _record([0, 0, 0], steer=0.3)
    rec.depth[...] = rec.depth[:, ::-1] * 0 + 2.0   # symmetric image
    rec.valid[...] = True
    flipped = augment_flip(rec)
    assert np.array_equal(flipped.depth, rec.depth)
    assert np.allclose(flipped.actions[:, 1], -0.3)


# ---------- resampling augmentation ----------

def test_resample_preserves_prefix_and_labels():
    rec = _record([0, 0, 1, 1, 1])
    rng = np.random.default_rng(1)
    copies = augment_resample(rec, 4, rng, (0.4, 1.5), 0.6)
    assert len(copies) == 4
    k = 3   # first collision step, 1-based
    for copy in copies:
        assert np.array_equal(copy.actions[:k], rec.actions[:k])
        assert np.array_equal(copy.labels, rec.labels)
        assert (np.abs(copy.actions[k:, 1]) <= 0.6).all()
        assert ((copy.actions[k:, 0] >= 0.4)
                & (copy.actions[k:, 0] <= 1.5)).all()
    # the tails actually differ from the original
    assert any(not np.array_equal(c.actions, rec.actions) for c in copies)


def test_resample_requires_collision():
    with pytest.raises(ValueError):
        augment_resample(_record([0, 0, 0]), 2, np.random.default_rng(0),
                         (0.4, 1.5), 0.6)


# ---------- balancing ----------

def test_balance_ratio_within_tolerance():
    rng = np.random.default_rng(2)
    records = [_record([0] * 6) for _ in range(80)]
    records += [_record([0, 0, 0, 1, 1, 1]) for _ in range(20)]
    balanced = balance_records(records, rng, (0.4, 1.5), 0.6, tol=0.1)
    ratio = class_ratio(balanced)
    assert 0.9 <= ratio <= 1.1
    # negatives were not touched
    assert sum(1 for r in balanced if not r.has_collision()) == 80


def test_balance_subsamples_when_positives_dominate():
    rng = np.random.default_rng(3)
    records = [_record([1] * 6) for _ in range(50)]
    records += [_record([0] * 6) for _ in range(10)]
    balanced = balance_records(records, rng, (0.4, 1.5), 0.6)
    assert 0.9 <= class_ratio(balanced) <= 1.1


# ---------- collection ----------

def _empty_world():
    return generate_world(WorldGenConfig(density=0.0,
                                         adversarial_holes=False), seed=0)


def test_empty_world_records_are_all_negative():
    records = collect_episode(_empty_world(), CAM, DYN, PARAMS,
                              robot_radius=0.25, flight_height=1.0,
                              seed=5, episode_id=0)
    assert records
    for rec in records:
        assert not rec.labels.any()
        assert (np.abs(rec.actions[:, 1]) <= PARAMS.steer_max + 1e-6).all()


def test_spawn_inside_obstacle_gives_one_all_ones_record():
    # a giant box swallows the spawn region: first step collides
    block = Obstacle(kind="box", x=0.0, y=0.0, yaw=0.0, dims=(30.0, 30.0),
                     height=3.0)
    world = World(bounds=(-20.0, -20.0, 20.0, 20.0), obstacles=(block,),
                  seed=0)
    records = collect_episode(world, CAM, DYN, PARAMS, robot_radius=0.25,
                              flight_height=1.0, seed=6, episode_id=1)
    assert len(records) == 1
    assert records[0].labels.tolist() == [1] * PARAMS.horizon


def test_record_count_tracks_path_length():
    records = collect_episode(_empty_world(), CAM, DYN, PARAMS,
                              robot_radius=0.25, flight_height=1.0,
                              seed=7, episode_id=2)
    # integrate the logged path: re-derive expected snapshot count from
    # the same trajectory via its displacement budget
    # (empty world, so the episode runs to its timeout)
    n_steps = int(round(PARAMS.timeout / DYN.dt))
    # crude independent bound: speed <= 1.5 m/s, so path <= 1.5 * timeout
    max_records = 1.5 * PARAMS.timeout / PARAMS.delta_th + 1
    assert 2 <= len(records) <= max_records
    # snapshots are spaced at least delta_th of path apart by construction
    assert len(records) <= n_steps


def test_collection_is_deterministic():
    a = collect_episode(_empty_world(), CAM, DYN, PARAMS, 0.25, 1.0,
                        seed=8, episode_id=3)
    b = collect_episode(_empty_world(), CAM, DYN, PARAMS, 0.25, 1.0,
                        seed=8, episode_id=3)
    assert len(a) == len(b)
    for ra, rb in zip(a, b):
        assert np.array_equal(ra.depth, rb.depth)
        assert np.array_equal(ra.actions, rb.actions)
        assert np.array_equal(ra.labels, rb.labels)


def test_label_monotonicity_on_cluttered_worlds():
    cfg = WorldGenConfig(density=0.15, size_x=10.0, size_y=10.0)
    for seed in range(3):
        world = generate_world(cfg, seed=seed)
        records = collect_episode(world, CAM, DYN, PARAMS, 0.25, 1.0,
                                  seed=seed, episode_id=seed)
        assert any(r.has_collision() for r in records)
        for rec in records:
            assert (np.diff(rec.labels.astype(int)) >= 0).all()


# ---------- persistence ----------

def test_round_trip_bit_exact(tmp_path):
    records = [_record([0, 0, 1], seed=i) for i in range(7)]
    ds = Dataset.from_records(records, config_hash=b"12345678")
    path = tmp_path / "d.ords"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert back.checksum() == ds.checksum()
    assert back.config_hash == ds.config_hash
    assert np.array_equal(back.depth, ds.depth)
    assert np.array_equal(back.valid, ds.valid)
    assert np.array_equal(back.actions, ds.actions)
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.episode_ids, ds.episode_ids)


def test_corrupted_tail_rejected(tmp_path):
    ds = Dataset.from_records([_record([0, 1, 1], seed=i) for i in range(3)])
    path = tmp_path / "d.ords"
    save_dataset(ds, path)
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(DatasetFormatError):
        load_dataset(path)
    path.write_bytes(data + b"\x00")
    with pytest.raises(DatasetFormatError):
        load_dataset(path)
    path.write_bytes(b"ORDX" + data[4:])
    with pytest.raises(DatasetFormatError, match="magic"):
        load_dataset(path)


def test_record_accessor_round_trips():
    rec = _record([0, 1, 1], seed=9)
    ds = Dataset.from_records([rec])
    back = ds.record(0)
    assert np.array_equal(back.depth, rec.depth)
    # scalar state is stored at f32 resolution
    assert back.v == np.float32(rec.v) and back.omega == np.float32(rec.omega)
    assert back.episode_id == rec.episode_id
