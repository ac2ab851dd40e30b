"""ROC/AUC computation for image-level detection and pixel-level localization.

Scores throughout are pristine confidences: LOWER means more likely forged,
and "forged" is the positive class. Ties are grouped into single ROC points,
which makes the trapezoidal AUC equal to the normalized Mann-Whitney
pair-count with half credit for ties.
"""

from dataclasses import dataclass

import numpy as np

from . import pipeline


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray   # score at each step; positives score <= threshold


@dataclass
class AucReport:
    task: str                # "detection" or "localization"
    size_class: str
    strategy: str            # "plain" or "gan"
    auc: float
    n_positive: int
    n_negative: int


def roc(scores, labels):
    """ROC for pristine-confidence scores against {0,1} labels (0 = forged).

    A point is produced per distinct score value, sweeping the decision
    threshold from the lowest score upward (forged ⇔ score <= t).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    pos = labels == 0
    n_pos = int(pos.sum())
    n_neg = int(scores.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present")
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    p = pos[order]
    # group tied scores into one step
    boundary = np.nonzero(np.r_[s[1:] != s[:-1], True])[0]
    tp = np.cumsum(p)[boundary]
    fp = (boundary + 1) - tp
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    thresholds = np.r_[-np.inf, s[boundary]]
    return RocCurve(fpr, tpr, thresholds)


def auc(curve):
    """Trapezoidal area under the curve."""
    return float(np.trapezoid(curve.tpr, curve.fpr))


def auc_from_scores(scores, labels):
    return auc(roc(scores, labels))


def pair_count_auc(scores, labels):
    """Independent oracle: fraction of correctly ordered (forged, pristine)
    pairs, half credit for ties. Quadratic; intended for n <= a few thousand."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    forged = scores[labels == 0]
    pristine = scores[labels == 1]
    diff = pristine[None, :] - forged[:, None]
    return float((np.sum(diff > 0) + 0.5 * np.sum(diff == 0))
                 / (len(forged) * len(pristine)))


def detection_scores(images, autoencoder, weights, svm_model,
                     size=pipeline.PATCH_SIZE, stride=pipeline.PATCH_STRIDE):
    """Minimum patch-level SVM score per image."""
    out = []
    for image in images:
        soft = pipeline.compute_soft_mask(image, autoencoder, weights,
                                          svm_model, size, stride)
        out.append(pipeline.detection_score(soft))
    return np.asarray(out)


def detection_eval(pristine_images, forged_by_class, autoencoder, weights,
                   svm_model, strategy, size=pipeline.PATCH_SIZE,
                   stride=pipeline.PATCH_STRIDE):
    """One detection AucReport per size class, pristine vs forged images."""
    if not pristine_images:
        raise ValueError("no pristine images")
    pristine = detection_scores(pristine_images, autoencoder, weights,
                                svm_model, size, stride)
    reports = []
    for size_class, images in forged_by_class.items():
        if not images:
            raise ValueError(f"no forged images for class {size_class!r}")
        forged = detection_scores(images, autoencoder, weights, svm_model,
                                  size, stride)
        scores = np.r_[pristine, forged]
        labels = np.r_[np.ones(len(pristine), dtype=int),
                       np.zeros(len(forged), dtype=int)]
        reports.append(AucReport("detection", size_class, strategy,
                                 auc_from_scores(scores, labels),
                                 n_positive=len(forged),
                                 n_negative=len(pristine)))
    return reports


def localization_eval(forged_with_masks_by_class, autoencoder, weights,
                      svm_model, strategy, size=pipeline.PATCH_SIZE,
                      stride=pipeline.PATCH_STRIDE):
    """Pixel-level ROC per size class over aggregated soft masks.

    `forged_with_masks_by_class` maps size class to (image, truth_mask)
    pairs; pixels without patch coverage are excluded.
    """
    reports = []
    for size_class, pairs in forged_with_masks_by_class.items():
        all_scores, all_labels = [], []
        for image, truth in pairs:
            if truth.shape != image.shape[:2]:
                raise ValueError("mask and image dimensions differ")
            soft = pipeline.compute_soft_mask(image, autoencoder, weights,
                                              svm_model, size, stride)
            covered = soft.coverage > 0
            all_scores.append(soft.scores[covered])
            all_labels.append(truth[covered])
        scores = np.concatenate(all_scores)
        labels = np.concatenate(all_labels)
        reports.append(AucReport("localization", size_class, strategy,
                                 auc_from_scores(scores, labels),
                                 n_positive=int((labels == 0).sum()),
                                 n_negative=int((labels == 1).sum())))
    return reports


def report_table(reports):
    """Aligned text table, one row per (task, size class, strategy)."""
    header = f"{'task':14s}{'size':10s}{'strategy':10s}{'AUC':>8s}{'n_pos':>8s}{'n_neg':>8s}"
    rows = [header, "-" * len(header)]
    for r in reports:
        rows.append(f"{r.task:14s}{r.size_class:10s}{r.strategy:10s}"
                    f"{r.auc:8.3f}{r.n_positive:8d}{r.n_negative:8d}")
    return "\n".join(rows)


def report_records(reports):
    """Machine-readable key=value lines."""
    return "\n".join(
        f"task={r.task} size={r.size_class} strategy={r.strategy} "
        f"auc={r.auc:.6f} n_pos={r.n_positive} n_neg={r.n_negative}"
        for r in reports)


def save_curve(curve, path):
    """Two-column (fpr, tpr) text dump for external plotting."""
    with open(path, "w") as fh:
        for f, t in zip(curve.fpr, curve.tpr):
            fh.write(f"{f:.9f} {t:.9f}\n")
