"""Training strategies: plain autoencoder fitting and GAN fine-tuning.

Both strategies checkpoint every epoch and return the weights from the
epoch with the lowest validation MSE, not the last one. The generator's
GAN objective is a convex mix of the non-saturating adversarial term and
reconstruction MSE: (1 - w) * adv + w * mse with w = rec_weight, so
rec_weight = 1 reduces exactly to plain MSE continuation.
"""

import hashlib
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import derive_rng
from .losses import bce_loss, bce_loss_grad, mse_loss, mse_loss_grad
from .networks import Autoencoder, Discriminator
from .optim import OptimizerState, adam_step, sgd_step
from .weights_io import save_weights

log = logging.getLogger("satforgery.train")

COLLAPSE_BCE = 1e-4
COLLAPSE_EPOCHS = 10


@dataclass
class TrainConfig:
    arch: str = "A4"
    epochs: int = 100
    batch_size: int = 128
    gen_lr: float = 0.001
    disc_lr: float = 0.001
    rec_weight: float = 0.999     # generator MSE weight during GAN training
    seed: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.gen_lr <= 0 or self.disc_lr <= 0:
            raise ValueError("learning rates must be positive")
        if not 0 <= self.rec_weight <= 1:
            raise ValueError("rec_weight must be in [0, 1]")

    def digest(self):
        raw = repr(sorted(self.__dict__.items())).encode()
        return hashlib.sha256(raw).hexdigest()[:16]


@dataclass
class EpochRecord:
    epoch: int
    train_mse: float
    val_mse: float
    disc_bce: float | None = None
    gen_adv: float | None = None


@dataclass
class TrainHistory:
    stage: str
    records: list = field(default_factory=list)
    initial_val_mse: float = float("nan")

    @property
    def best_epoch(self):
        vals = [r.val_mse for r in self.records]
        return self.records[int(np.argmin(vals))].epoch


@dataclass
class Checkpoint:
    weights: object
    epoch: int
    val_mse: float
    stage: str


def select_best(history, checkpoints):
    """Checkpoint with the lowest validation MSE; earliest epoch on ties."""
    if not checkpoints:
        raise ValueError("no checkpoints")
    best = min(checkpoints, key=lambda c: (c.val_mse, c.epoch))
    return best


def validation_mse(ae, weights, patches, batch=256):
    total = 0.0
    for start in range(0, len(patches), batch):
        chunk = patches[start:start + batch]
        recon = ae.reconstruct(weights, chunk)
        total += float(((recon - chunk) ** 2).sum())
    return total / patches.size


def _check_patches(patches, what):
    if len(patches) == 0:
        raise ValueError(f"empty {what} set")
    if not np.isfinite(patches).all():
        raise ValueError(f"{what} patches contain non-finite values")


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _write_checkpoint(ckpt, config, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = directory / f"{ckpt.stage}_epoch{ckpt.epoch:04d}"
    save_weights(ckpt.weights, f"{stem}.weights")
    Path(f"{stem}.meta").write_text(
        f"epoch = {ckpt.epoch}\nval_mse = {ckpt.val_mse!r}\n"
        f"stage = {ckpt.stage}\nseed = {config.seed}\n"
        f"config_hash = {config.digest()}\n")


def train_autoencoder(train_patches, val_patches, config):
    """MSE-only training; returns (best weights, history)."""
    _check_patches(train_patches, "train")
    _check_patches(val_patches, "validation")
    ae = Autoencoder(config.arch)
    weights = ae.init(derive_rng(config.seed, "ae-init").integers(2**31))
    weights.stage = "plain"
    opt = OptimizerState("adam", config.gen_lr)
    history = TrainHistory("plain",
                           initial_val_mse=validation_mse(ae, weights, val_patches))
    checkpoints = []
    for epoch in range(1, config.epochs + 1):
        rng = derive_rng(config.seed, "ae-shuffle", epoch)
        losses = []
        for idx in _batches(len(train_patches), config.batch_size, rng):
            batch = train_patches[idx]
            recon, caches = ae.forward_train(weights, batch)
            loss = mse_loss(recon, batch)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite training loss at epoch {epoch}")
            grads = ae.backward(weights, caches, mse_loss_grad(recon, batch))
            weights.replace_trainable(adam_step(opt, weights.trainable(), grads))
            losses.append(loss)
        val = validation_mse(ae, weights, val_patches)
        history.records.append(EpochRecord(epoch, float(np.mean(losses)), val))
        log.info("stage=plain epoch=%d train_mse=%.6g val_mse=%.6g",
                 epoch, history.records[-1].train_mse, val)
        ckpt = Checkpoint(weights.copy(), epoch, val, "plain")
        checkpoints.append(ckpt)
        if config.checkpoint_dir:
            _write_checkpoint(ckpt, config, config.checkpoint_dir)
    best = select_best(history, checkpoints)
    return best.weights, history


def train_gan(pretrained, train_patches, val_patches, config):
    """Adversarial fine-tuning of a plain-trained autoencoder.

    Per batch: one discriminator SGD step on real-vs-reconstruction BCE,
    then one generator Adam step on the mixed adversarial/MSE objective.
    Model selection is by lowest validation MSE, as for plain training.
    """
    _check_patches(train_patches, "train")
    _check_patches(val_patches, "validation")
    ae = Autoencoder(pretrained.arch_id)
    gen_weights = pretrained.copy()
    gen_weights.stage = "gan"
    disc = Discriminator()
    disc_weights = disc.init(derive_rng(config.seed, "disc-init").integers(2**31))
    gen_opt = OptimizerState("adam", config.gen_lr)
    disc_opt = OptimizerState("sgd", config.disc_lr)
    w = config.rec_weight
    history = TrainHistory("gan",
                           initial_val_mse=validation_mse(ae, gen_weights, val_patches))
    checkpoints = []
    collapse_run = 0
    for epoch in range(1, config.epochs + 1):
        rng = derive_rng(config.seed, "gan-shuffle", epoch)
        mse_losses, disc_losses, adv_losses = [], [], []
        for idx in _batches(len(train_patches), config.batch_size, rng):
            batch = train_patches[idx]
            recon, gen_caches = ae.forward_train(gen_weights, batch)

            # discriminator step: real patches 1, reconstructions 0
            d_in = np.concatenate([batch, recon], axis=0)
            d_labels = np.r_[np.ones(len(batch)), np.zeros(len(recon))]
            d_out, d_caches = disc.forward_train(disc_weights, d_in)
            d_loss = bce_loss(d_out, d_labels)
            d_grads = disc.backward(disc_weights, d_caches,
                                    bce_loss_grad(d_out, d_labels))
            disc_weights.replace_trainable(
                sgd_step(disc_opt, disc_weights.trainable(), d_grads))

            # generator step: non-saturating adversarial term + reconstruction
            g_out, g_d_caches = disc.forward_train(disc_weights, recon,
                                                   update_running=False)
            ones = np.ones(len(recon))
            adv = bce_loss(g_out, ones)
            _, d_recon_adv = disc.backward(disc_weights, g_d_caches,
                                           bce_loss_grad(g_out, ones),
                                           return_input_grad=True,
                                           param_grads=False)
            rec = mse_loss(recon, batch)
            if not (np.isfinite(d_loss) and np.isfinite(adv) and np.isfinite(rec)):
                raise FloatingPointError(
                    f"non-finite GAN loss at epoch {epoch}")
            d_recon = (1 - w) * d_recon_adv + w * mse_loss_grad(recon, batch)
            g_grads = ae.backward(gen_weights, gen_caches,
                                  d_recon.astype(recon.dtype, copy=False))
            gen_weights.replace_trainable(
                adam_step(gen_opt, gen_weights.trainable(), g_grads))

            mse_losses.append(rec)
            disc_losses.append(d_loss)
            adv_losses.append(adv)
        val = validation_mse(ae, gen_weights, val_patches)
        record = EpochRecord(epoch, float(np.mean(mse_losses)), val,
                             disc_bce=float(np.mean(disc_losses)),
                             gen_adv=float(np.mean(adv_losses)))
        history.records.append(record)
        log.info("stage=gan epoch=%d train_mse=%.6g val_mse=%.6g "
                 "disc_bce=%.6g gen_adv=%.6g", epoch, record.train_mse,
                 val, record.disc_bce, record.gen_adv)
        collapse_run = collapse_run + 1 if record.disc_bce < COLLAPSE_BCE else 0
        if collapse_run == COLLAPSE_EPOCHS:
            warnings.warn("discriminator BCE has been < 1e-4 for "
                          f"{COLLAPSE_EPOCHS} consecutive epochs")
        ckpt = Checkpoint(gen_weights.copy(), epoch, val, "gan")
        checkpoints.append(ckpt)
        if config.checkpoint_dir:
            _write_checkpoint(ckpt, config, config.checkpoint_dir)
    best = select_best(history, checkpoints)
    return best.weights, history
