"""Loss, optimizer, training loop, evaluation, and checkpoint I/O.

The loss is the total Euclidean distance in pixels between predicted and
expected keypoints: the sum over the three points of the per-point distance.
Batch losses are means of per-sample losses, so reported numbers do not
depend on batch size.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import augment as aug
from .errors import CheckpointFormatError, ConfigError
from .network import Network, build_eva, images_to_batch, labels_to_batch
from .rng import STREAM_AUGMENT, STREAM_SHUFFLE, sub_rng

ZERO_DISTANCE_GUARD = 1e-8

CHECKPOINT_MAGIC = b"EVA1"


def euclid_loss(pred, label):
    """Total Euclidean distance between predicted and expected points.

    Accepts (6,) vectors or (B, 6) batches in CSV column order; returns a
    scalar or a (B,) array of per-sample losses.
    """
    p = np.asarray(pred, dtype=np.float64)
    q = np.asarray(label, dtype=np.float64)
    diff = (p - q).reshape(*p.shape[:-1], 3, 2)
    dist = np.sqrt((diff**2).sum(axis=-1))
    return dist.sum(axis=-1)


def euclid_loss_grad(pred, label):
    """Gradient of euclid_loss with respect to the prediction.

    Each point contributes the unit vector toward the prediction; a point
    whose distance is below a tiny guard contributes zero (a valid
    subgradient at the kink).
    """
    p = np.asarray(pred, dtype=np.float64)
    q = np.asarray(label, dtype=np.float64)
    diff = (p - q).reshape(*p.shape[:-1], 3, 2)
    dist = np.sqrt((diff**2).sum(axis=-1, keepdims=True))
    grad = np.where(dist < ZERO_DISTANCE_GUARD, 0.0, diff / np.where(dist == 0.0, 1.0, dist))
    return grad.reshape(p.shape)


class RmsProp:
    """RMSProp: v <- rho*v + (1-rho)*g^2; w <- w - lr*g/(sqrt(v) + eps)."""

    def __init__(self, params, lr=0.001, rho=0.9, eps=1e-7):
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self.params = list(params)  # (name, array) pairs, updated in place
        self.v = [np.zeros_like(arr) for _, arr in self.params]

    def step(self, grads):
        grads = list(grads)
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        for (name, p), (gname, g), v in zip(self.params, grads, self.v):
            if name != gname or p.shape != g.shape:
                raise ValueError(f"mismatched parameter/gradient {name!r} vs {gname!r}")
            v *= self.rho
            v += (1.0 - self.rho) * g * g
            p -= self.lr * g / (np.sqrt(v) + self.eps)


@dataclass
class TrainConfig:
    scenario: int = 1
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    lr: float = 0.001
    rho: float = 0.9
    eps: float = 1e-7
    backgrounds: aug.BackgroundPool | None = None
    validation: list | None = None  # list[Sample]; None skips validation

    def __post_init__(self):
        aug.scenario_techniques(self.scenario)  # validates id
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if "background" in aug.scenario_techniques(self.scenario) and self.backgrounds is None:
            raise ConfigError(f"scenario {self.scenario} requires a background pool")


@dataclass
class TrainResult:
    network: Network
    history: list  # (epoch, train_loss, val_loss) with val_loss nan when skipped
    best_epoch: int
    best_val_loss: float

    def min_train_loss(self) -> float:
        return min(h[1] for h in self.history)

    def min_val_loss(self) -> float:
        vals = [h[2] for h in self.history if not np.isnan(h[2])]
        return min(vals) if vals else float("nan")


def _augment_sample(sample, plan, pool):
    if plan.is_identity():
        return sample
    return aug.apply(plan, sample, pool)


def train(samples, config: TrainConfig) -> TrainResult:
    """Train a fresh Eva on `samples` under the scenario's augmentations.

    Every epoch shuffles the sample order and draws a fresh augmentation plan
    per sample (streams keyed by (seed, epoch, sample index), so results do
    not depend on batching). When a validation set is given, the returned
    network carries the weights of the best-validation epoch.
    """
    if not samples:
        raise ConfigError("training set is empty")
    net = build_eva(config.seed)
    opt = RmsProp(net.parameters(), lr=config.lr, rho=config.rho, eps=config.eps)
    shuffle_rng = sub_rng(config.seed, STREAM_SHUFFLE)
    pool = config.backgrounds

    n = len(samples)
    history = []
    best_epoch = -1
    best_val = float("inf")
    best_weights = None
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            chunk = order[start : start + config.batch_size]
            batch = []
            for idx in chunk:
                plan_rng = sub_rng(config.seed, STREAM_AUGMENT, epoch, int(idx))
                plan = aug.sample_plan(plan_rng, config.scenario, samples[idx].label, pool)
                batch.append(_augment_sample(samples[idx], plan, pool))
            x = images_to_batch(batch)
            y = labels_to_batch(batch)
            pred = net.forward(x, training=True)
            loss_sum += float(euclid_loss(pred, y).sum())
            grad = (euclid_loss_grad(pred, y) / len(batch)).astype(np.float32)
            net.backward(grad)
            opt.step(net.gradients())

        train_loss = loss_sum / n
        if config.validation:
            val_loss = evaluate(net, config.validation).mean_loss
            if val_loss < best_val:
                best_val = val_loss
                best_epoch = epoch
                best_weights = net.get_weights()
        else:
            val_loss = float("nan")
        history.append((epoch, train_loss, val_loss))

    if best_weights is not None:
        net.set_weights(best_weights)
    return TrainResult(network=net, history=history, best_epoch=best_epoch, best_val_loss=best_val)


@dataclass
class EvalResult:
    mean_loss: float
    per_point_error: np.ndarray  # (3,) mean pixel distance per keypoint
    per_sample: np.ndarray  # (n,) losses


def evaluate(net: Network, samples, batch_size: int = 32) -> EvalResult:
    """Mean loss plus per-keypoint error breakdown in inference mode."""
    if not samples:
        raise ConfigError("evaluation set is empty")
    losses = []
    point_err = np.zeros(3)
    for start in range(0, len(samples), batch_size):
        batch = samples[start : start + batch_size]
        pred = net.forward(images_to_batch(batch), training=False)
        y = labels_to_batch(batch)
        diff = (np.asarray(pred, dtype=np.float64) - y).reshape(-1, 3, 2)
        dist = np.sqrt((diff**2).sum(axis=-1))
        losses.append(dist.sum(axis=-1))
        point_err += dist.sum(axis=0)
    per_sample = np.concatenate(losses)
    return EvalResult(
        mean_loss=float(per_sample.mean()),
        per_point_error=point_err / len(samples),
        per_sample=per_sample,
    )


def write_history_csv(path, history) -> None:
    lines = ["epoch,train_loss,val_loss"]
    for epoch, train_loss, val_loss in history:
        lines.append(f"{epoch},{train_loss:.6f},{val_loss:.6f}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def save_checkpoint(net: Network, path, epoch: int = 0, scenario: int = 1, seed: int = 0) -> None:
    """Binary weight dump; see load_checkpoint for the layout."""
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    params = net.parameters()
    blob += struct.pack("<I", len(params))
    for name, arr in params:
        encoded = name.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    blob += struct.pack("<IBQ", epoch, scenario, seed)
    with open(path, "wb") as f:
        f.write(blob)


def load_checkpoint(path):
    """Rebuild Eva from a checkpoint; returns (network, metadata dict).

    Layout: magic "EVA1", u32 tensor count, then per tensor a u16 name
    length + UTF-8 name, u8 rank, u32 dims, and raw little-endian float32
    data; finally epoch (u32), scenario (u8), seed (u64).
    """
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"bad magic {blob[:4]!r}")
    off = 4

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(blob):
            raise CheckpointFormatError("truncated checkpoint")
        vals = struct.unpack_from(fmt, blob, off)
        off += size
        return vals

    (count,) = take("<I")
    weights = []
    for _ in range(count):
        (name_len,) = take("<H")
        if off + name_len > len(blob):
            raise CheckpointFormatError("truncated checkpoint")
        name = blob[off : off + name_len].decode("utf-8")
        off += name_len
        (rank,) = take("<B")
        shape = take(f"<{rank}I")
        numel = int(np.prod(shape)) if rank else 1
        nbytes = 4 * numel
        if off + nbytes > len(blob):
            raise CheckpointFormatError("truncated checkpoint")
        arr = np.frombuffer(blob, dtype="<f4", count=numel, offset=off).reshape(shape).copy()
        off += nbytes
        weights.append((name, arr))
    epoch, scenario, seed = take("<IBQ")
    if off != len(blob):
        raise CheckpointFormatError("trailing bytes after metadata")

    net = build_eva(0)
    try:
        net.set_weights(weights)
    except ValueError as exc:
        raise CheckpointFormatError(str(exc)) from exc
    return net, {"epoch": epoch, "scenario": scenario, "seed": seed}
