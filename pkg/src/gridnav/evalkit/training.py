"""Mini-batch Adadelta training with on-the-fly augmentation."""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from gridnav.augment import AugmentPolicy, Sample, random_augment
from gridnav.detector import LossWeights, detection_loss, encode_targets
from gridnav.evalkit.dataset import FrameStore
from gridnav.mapper import PX_UNKNOWN, network_view
from gridnav.nn import Adadelta, DetectorNet, NetSpec

VARIANTS = ("laser", "map", "combined")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 60
    net_px: int = 244
    variant: str = "combined"
    seed: int = 0
    loss_weights: LossWeights = field(default_factory=LossWeights)
    policy: AugmentPolicy = field(default_factory=AugmentPolicy)
    rho: float = 0.95
    eps: float = 1e-6
    grid_size: int = 5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")


@dataclass
class TrainResult:
    net: DetectorNet
    log: dict
    best_epoch: int
    best_val_loss: float


def image_to_input(img_u8):
    """Pixel semantics to network floats: FREE 0, UNKNOWN ~0.5, OCCUPIED 1."""
    return (1.0 - img_u8.astype(np.float32) / 255.0)[None]


_BLANK_VALUE = 1.0 - PX_UNKNOWN / 255.0


def sample_from_record(record, store):
    laser = store.local_map(record.laser16)
    gmap = store.local_map(record.gmap16)
    return Sample(laser=laser, gmap=gmap, labels=record.labels_rf)


def batch_arrays(samples, variant, net_px, window, grid_size):
    """Stack network-ready samples (already at window extent) into input and
    target tensors, blanking the tower the variant does not use."""
    n = len(samples)
    laser = np.empty((n, 1, net_px, net_px), dtype=np.float32)
    gmap = np.empty((n, 1, net_px, net_px), dtype=np.float32)
    targets = np.empty((n, 6, grid_size, grid_size), dtype=np.float64)
    for i, s in enumerate(samples):
        laser[i] = image_to_input(s.laser.image)
        gmap[i] = image_to_input(s.gmap.image)
        targets[i] = encode_targets(s.labels, window=window, grid_size=grid_size)
    if variant == "laser":
        gmap[:] = _BLANK_VALUE
    elif variant == "map":
        laser[:] = _BLANK_VALUE
    return laser, gmap, targets


def _epoch_val_loss(net, val_samples, config, window):
    total = 0.0
    count = 0
    bs = config.batch_size
    for i in range(0, len(val_samples), bs):
        chunk = val_samples[i:i + bs]
        laser, gmap, targets = batch_arrays(chunk, config.variant,
                                            config.net_px, window,
                                            config.grid_size)
        out, _ = net.forward(laser, gmap, train=False)
        loss, _ = detection_loss(out, targets, config.loss_weights)
        total += loss * len(chunk)
        count += len(chunk)
    return total / max(count, 1)


def train(train_records, val_records, config=None, store=None, log_fn=None):
    """Train a detector and keep the minimum-validation-loss checkpoint.

    Deterministic for a fixed config seed: weight init, shuffling and
    augmentation all derive from it.
    """
    config = config or TrainConfig()
    if not train_records:
        raise ValueError("training split is empty")
    if not val_records:
        raise ValueError("validation split is empty")
    store = store or FrameStore()
    rng = np.random.default_rng(config.seed)

    train_samples = [sample_from_record(r, store) for r in train_records]
    window = train_samples[0].extent / 2.0
    val_samples = [
        Sample(laser=network_view(s.laser, config.net_px, expected_extent=None),
               gmap=network_view(s.gmap, config.net_px, expected_extent=None),
               labels=s.labels)
        for s in (sample_from_record(r, store) for r in val_records)
    ]

    net = DetectorNet(spec=NetSpec(input_px=config.net_px), seed=config.seed)
    optim = Adadelta(net.parameters(), rho=config.rho, eps=config.eps)

    epochs_log = []
    best_epoch = -1
    best_val = math.inf
    best_state = None
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_samples))
        epoch_loss = 0.0
        seen = 0
        for i in range(0, len(order), config.batch_size):
            chunk = [train_samples[j] for j in order[i:i + config.batch_size]]
            aug = [random_augment(s, config.policy, rng, config.net_px)
                   for s in chunk]
            laser, gmap, targets = batch_arrays(aug, config.variant,
                                                config.net_px, window,
                                                config.grid_size)
            out, cache = net.forward(laser, gmap, train=True)
            loss, dlogits = detection_loss(out, targets, config.loss_weights)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {i // config.batch_size}")
            grads, _ = net.backward(dlogits.astype(net.dtype), cache)
            optim.step(grads)
            epoch_loss += loss * len(chunk)
            seen += len(chunk)
        train_loss = epoch_loss / seen
        val_loss = _epoch_val_loss(net, val_samples, config, window)
        # wall time goes to the live log only; the persisted log must be
        # byte-reproducible across runs
        epochs_log.append({"epoch": epoch, "train_loss": train_loss,
                           "val_loss": val_loss})
        if log_fn:
            log_fn({**epochs_log[-1],
                    "seconds": round(time.perf_counter() - t0, 3)})
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = {k: v.copy() for k, v in net.state_arrays().items()}

    if best_state is not None:
        for name, arr in net.state_arrays().items():
            arr[...] = best_state[name]

    w = config.loss_weights
    log = {"seed": config.seed, "alpha": [w.xent, w.coord, w.conf],
           "batch_size": config.batch_size, "variant": config.variant,
           "net_px": config.net_px, "epochs": epochs_log,
           "best_epoch": best_epoch, "best_val_loss": best_val}
    return TrainResult(net=net, log=log, best_epoch=best_epoch,
                       best_val_loss=best_val)
