"""End-to-end forgery detection on a miniature synthetic dataset.

The full recipe, shrunk to run in a few minutes on one core:

  1. generate synthetic "satellite" images; splice forged objects into
     some of them and keep ground-truth masks;
  2. train an autoencoder on patches from pristine pool images only;
  3. fit a one-class SVM on the encoder's training features;
  4. slide a 64x64 window over test images, score every patch, and
     assemble per-pixel soft masks;
  5. report detection and localization AUCs per forgery size class.

The same stages are available as CLI verbs (gen-data, train, fit-svm,
infer, eval); here they are driven through the library API.

Run:  python3 demos/03_forgery_pipeline.py
"""

import tempfile
from pathlib import Path

import numpy as np

from satforgery import dataset, evaluate, imageio, ocsvm, pipeline
from satforgery.networks import Autoencoder
from satforgery.ocsvm import SvmConfig
from satforgery.train import TrainConfig, train_autoencoder

work = Path(tempfile.mkdtemp(prefix="satforgery_demo_"))

# --- 1. data -------------------------------------------------------------
# 6 base images at 384x384 keep this quick; the reference scale is 130
# images at 650x650. The manifest records which images are pool (training),
# test-pristine, and forged (with object size class and position).
manifest = dataset.generate_dataset(work, count=6, dims=(384, 384), seed=0)
print(f"dataset in {work}: {len(manifest.pool_ids)} pool, "
      f"{len(manifest.test_pristine_ids)} pristine test, "
      f"{len(manifest.forged_entries())} forged test images")

# --- 2. autoencoder on pristine patches ----------------------------------
chunks = []
for image_id in manifest.pool_ids:
    image = imageio.load_image(work / "images" / f"{image_id}.png")
    chunks.append(pipeline.extract_patches(image).patches)
patches = np.concatenate(chunks)
train_idx, val_idx = dataset.split_patches(len(patches), seed=0)
print(f"{len(patches)} pool patches -> {len(train_idx)} train / "
      f"{len(val_idx)} validation")

config = TrainConfig(arch="A4", epochs=6, batch_size=64, seed=0)
weights, history = train_autoencoder(patches[train_idx], patches[val_idx],
                                     config)
print(f"trained A4 for {config.epochs} epochs; best val MSE "
      f"{min(r.val_mse for r in history.records):.5f} "
      f"(epoch {history.best_epoch})")

# --- 3. one-class SVM on encoder features --------------------------------
ae = Autoencoder("A4")
features = ae.encode(weights, patches[train_idx])
svm_model = ocsvm.fit(features, SvmConfig())   # gamma=1/2048, nu=1e-5
print(f"one-class SVM: {len(svm_model.coefficients)} support vectors "
      f"out of {svm_model.n_train} ({svm_model.converged=})")

# --- 4. score one forged image -------------------------------------------
entry = manifest.forged_entries("large")[0]
image = imageio.load_image(work / "images" / f"{entry.image_id}.png")
soft = pipeline.compute_soft_mask(image, ae, weights, svm_model)
truth = imageio.load_binary_mask(work / "masks" / f"{entry.image_id}.png")
forged_region = soft.scores[truth == 0].mean()
pristine_region = soft.scores[truth == 1].mean()
print(f"\n{entry.image_id} ({entry.size_class} forgery at {entry.position}):")
print(f"  mean soft-mask score: forged region {forged_region:.3f}, "
      f"pristine region {pristine_region:.3f}  (lower = more suspicious)")
print(f"  image-level detection score (min patch): "
      f"{pipeline.detection_score(soft):.3f}")

# --- 5. AUC report ---------------------------------------------------------
pristine = [imageio.load_image(work / "images" / f"{i}.png")
            for i in manifest.test_pristine_ids]
forged_by_class = {
    sc: [imageio.load_image(work / "images" / f"{e.image_id}.png")
         for e in manifest.forged_entries(sc)]
    for sc in dataset.SIZE_CLASSES}
reports = evaluate.detection_eval(pristine, forged_by_class, ae, weights,
                                  svm_model, "plain")
print("\n" + evaluate.report_table(reports))
