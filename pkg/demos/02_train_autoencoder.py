"""Training a patch autoencoder, plain and adversarial.

The detector never sees a forged image during training. It learns to
reconstruct *pristine* 64x64 patches; forgeries later betray themselves as
patches the model reconstructs poorly. This script trains the smallest
architecture (A2) on a correlated synthetic patch set, first with plain
MSE, then continues adversarially with a discriminator.

Runtime: a couple of minutes on one core.

Run:  python3 demos/02_train_autoencoder.py
"""

import numpy as np

from satforgery.networks import Autoencoder
from satforgery.train import TrainConfig, train_autoencoder, train_gan

# Correlated patches (smooth random fields) stand in for satellite imagery;
# pure white noise would leave nothing for the bottleneck to exploit.
rng = np.random.default_rng(0)
base = rng.normal(size=(48, 8, 8, 3))
patches = np.repeat(np.repeat(base, 8, axis=1), 8, axis=2)
patches += 0.05 * rng.normal(size=patches.shape)
patches = np.clip(patches, -1, 1).astype(np.float32)
train_p, val_p = patches[:40], patches[40:]

config = TrainConfig(arch="A2", epochs=8, batch_size=8, seed=0)
print(f"architecture A2, {len(train_p)} training / {len(val_p)} validation "
      f"patches, {config.epochs} epochs")

# --- stage 1: plain reconstruction --------------------------------------
best, history = train_autoencoder(train_p, val_p, config)
print(f"\nplain training (initial val MSE {history.initial_val_mse:.4f}):")
for r in history.records:
    print(f"  epoch {r.epoch:2d}  train {r.train_mse:.4f}  val {r.val_mse:.4f}")
print(f"best checkpoint: epoch {history.best_epoch} "
      f"(lowest validation MSE)")

# --- stage 2: adversarial continuation ----------------------------------
# The generator loss blends reconstruction and the non-saturating
# adversarial term; rec_weight=0.999 keeps MSE dominant so "lowest
# validation MSE" remains a meaningful selection criterion.
gan_config = TrainConfig(arch="A2", epochs=4, batch_size=8, seed=0)
gan_best, gan_history = train_gan(best, train_p, val_p, gan_config)
print("\nadversarial continuation:")
for r in gan_history.records:
    print(f"  epoch {r.epoch:2d}  val {r.val_mse:.4f}  "
          f"disc BCE {r.disc_bce:.4f}  gen adv {r.gen_adv:.4f}")

# --- the learned representation ------------------------------------------
ae = Autoencoder("A2")
features = ae.encode(gan_best, val_p)
print(f"\nencoder features: {features.shape[1]} dims per patch; "
      f"these feed the one-class SVM in the full pipeline")
