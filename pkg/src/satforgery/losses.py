"""Reconstruction and classification losses with gradients."""

import numpy as np

from .layers import ShapeError

BCE_EPS = 1e-7


def mse_loss(output, target):
    """Mean of squared differences over all entries."""
    if output.shape != target.shape:
        raise ShapeError(f"shape mismatch: {output.shape} vs {target.shape}")
    d = output - target
    return float(np.mean(d * d))


def mse_loss_grad(output, target):
    """Gradient of mse_loss w.r.t. output: 2 (output - target) / count."""
    if output.shape != target.shape:
        raise ShapeError(f"shape mismatch: {output.shape} vs {target.shape}")
    return (2.0 / output.size) * (output - target)


def bce_loss(prediction, label):
    """Mean binary cross entropy; predictions are clamped to [eps, 1-eps]."""
    prediction = np.asarray(prediction)
    label = np.asarray(label)
    if prediction.size == 0:
        raise ValueError("empty batch")
    p = np.clip(prediction, BCE_EPS, 1.0 - BCE_EPS)
    return float(-np.mean(label * np.log(p) + (1 - label) * np.log1p(-p)))


def bce_loss_grad(prediction, label):
    """Gradient of bce_loss w.r.t. the predictions (zero where clamped)."""
    prediction = np.asarray(prediction)
    label = np.asarray(label)
    if prediction.size == 0:
        raise ValueError("empty batch")
    p = np.clip(prediction, BCE_EPS, 1.0 - BCE_EPS)
    g = (-(label / p) + (1 - label) / (1 - p)) / prediction.size
    inside = (prediction > BCE_EPS) & (prediction < 1.0 - BCE_EPS)
    return np.where(inside, g, 0.0)
