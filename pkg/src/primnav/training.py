"""End-to-end training of the collision prediction network.

Training runs in f64 with fresh per-batch dropout, weighted binary
cross-entropy and Adam. Records are split into train/validation by
episode (never by record) so near-duplicate snapshots from one flight
cannot leak across the split. Images are completed and normalized once,
with the same filter the planner applies at run time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .cpn import CpnConfig, CpnModel, backward_train, forward_train
from .dataset import Dataset
from .depthfill import FilterConfig, fill_depth
from .nn.losses import weighted_bce
from .nn.optim import Adam
from .sim.camera import DepthImage


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float
    val_precision: float
    val_recall: float


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    n_train: int = 0
    n_val: int = 0

    # full-scale reference from the original study; a documentation
    # baseline, not a target at desk scale
    REFERENCE_VALIDATION = {"accuracy": 0.9815, "precision": 0.983,
                            "recall": 0.974}

    def final(self) -> EpochStats:
        return self.epochs[-1]


def preprocess_images(ds: Dataset, filter_cfg: FilterConfig,
                      max_range: float) -> np.ndarray:
    """Fill + normalize every stored image into CPN inputs (N, 1, H, W)."""
    n, rows, cols = ds.depth.shape
    out = np.empty((n, 1, rows, cols), dtype=np.float32)
    for i in range(n):
        img = DepthImage(depth=ds.depth[i], valid=ds.valid[i].copy(),
                         fov_h=0.0, fov_v=0.0, max_range=max_range)
        filled, _ = fill_depth(img, filter_cfg)
        frame = filled.depth / np.float32(max_range)
        frame[~filled.valid] = 1.0
        out[i, 0] = frame
    return out


def split_by_episode(episode_ids: np.ndarray, val_fraction: float,
                     rng: np.random.Generator
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Shuffle whole episodes into train/validation index sets."""
    unique = np.unique(episode_ids)
    perm = rng.permutation(unique)
    n_val = max(1, int(round(val_fraction * len(unique))))
    val_eps = set(perm[:n_val].tolist())
    is_val = np.array([eid in val_eps for eid in episode_ids])
    return np.flatnonzero(~is_val), np.flatnonzero(is_val)


def prediction_metrics(probs: np.ndarray, labels: np.ndarray
                       ) -> tuple[float, float, float]:
    """(accuracy, precision, recall) at threshold 0.5, collision positive."""
    pred = probs >= 0.5
    truth = labels.astype(bool)
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    fn = int(np.sum(~pred & truth))
    accuracy = float(np.mean(pred == truth))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return accuracy, precision, recall


def _forward_eval(model: CpnModel, images, states, actions,
                  batch: int = 512) -> np.ndarray:
    out = []
    for lo in range(0, images.shape[0], batch):
        hi = lo + batch
        probs, _ = forward_train(
            model, images[lo:hi].astype(model.dtype),
            states[lo:hi].astype(model.dtype),
            actions[lo:hi].astype(model.dtype), rng=None)
        out.append(probs)
    return np.concatenate(out, axis=0)


def train_cpn(ds: Dataset, cfg: Config, seed: int,
              log=None) -> tuple[CpnModel, TrainReport]:
    """Train from scratch on a dataset; deterministic for a given seed."""
    lr = cfg.get_float("train.lr")
    batch = cfg.get_int("train.batch")
    w_pos = cfg.get_float("train.w_pos")
    epochs = cfg.get_int("train.epochs")
    val_fraction = cfg.get_float("train.val_fraction")

    images = preprocess_images(ds, FilterConfig.from_config(cfg),
                               max_range=cfg.get_float("sim.max_range"))
    states = ds.states
    actions = ds.actions
    labels = ds.labels

    rng_split = np.random.default_rng([seed, 1])
    train_idx, val_idx = split_by_episode(ds.episode_ids, val_fraction,
                                          rng_split)

    model = CpnModel(CpnConfig.from_config(cfg),
                     rng=np.random.default_rng([seed, 2]))
    optim = Adam(model.layers(), lr=lr)
    report = TrainReport(n_train=len(train_idx), n_val=len(val_idx))

    for epoch in range(1, epochs + 1):
        order_rng = np.random.default_rng([seed, 3, epoch])
        drop_rng = np.random.default_rng([seed, 4, epoch])
        order = order_rng.permutation(train_idx)
        losses = []
        for lo in range(0, len(order), batch):
            idx = order[lo:lo + batch]
            probs, caches = forward_train(
                model, images[idx].astype(np.float64),
                states[idx].astype(np.float64),
                actions[idx].astype(np.float64), rng=drop_rng)
            loss, dprobs = weighted_bce(probs, labels[idx], w_pos)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"loss became {loss} at epoch {epoch}, batch "
                    f"{lo // batch}; last losses: {losses[-5:]}")
            optim.zero_grads()
            backward_train(model, dprobs, caches)
            optim.step()
            losses.append(loss)

        val_probs = _forward_eval(model, images[val_idx], states[val_idx],
                                  actions[val_idx])
        acc, prec, rec = prediction_metrics(val_probs, labels[val_idx])
        stats = EpochStats(epoch=epoch, train_loss=float(np.mean(losses)),
                           val_accuracy=acc, val_precision=prec,
                           val_recall=rec)
        report.epochs.append(stats)
        if log is not None:
            log(f"epoch {epoch:3d}  loss {stats.train_loss:.4f}  "
                f"val acc {acc:.3f}  prec {prec:.3f}  recall {rec:.3f}")

    return model, report
