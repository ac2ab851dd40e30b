"""ν one-class SVM with an RBF kernel.

`fit` solves the dual

    minimize  0.5 * a' K a
    subject to 0 <= a_i <= 1/(nu*n),  sum(a) = 1

with deterministic SMO pair updates (maximal KKT violation, lowest index on
ties). `fit_bruteforce` is an independent projected-gradient solver for tiny
instances, kept around as an oracle.
"""

import struct
from dataclasses import dataclass

import numpy as np


@dataclass
class SvmConfig:
    gamma: float = 1.0 / 2048.0
    nu: float = 1e-5
    tol: float = 1e-6
    max_iter: int = 100_000
    standardize: bool = False

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not 0 < self.nu <= 1:
            raise ValueError("nu must be in (0, 1]")


@dataclass
class SvmModel:
    support_vectors: np.ndarray   # (m, d)
    coefficients: np.ndarray      # (m,), the nonzero dual variables
    rho: float
    config: SvmConfig
    n_train: int = 0
    converged: bool = True
    n_iter: int = 0
    kkt_residual: float = 0.0
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None


def rbf_kernel(x, y, gamma):
    """exp(-gamma * ||x - y||^2) for single vectors of equal length."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def _gram(a, b, gamma):
    """RBF kernel matrix between row sets a (m, d) and b (n, d)."""
    sq_a = (a * a).sum(axis=1)[:, None]
    sq_b = (b * b).sum(axis=1)[None, :]
    d2 = np.maximum(sq_a + sq_b - 2.0 * (a @ b.T), 0.0)
    return np.exp(-gamma * d2)


def _recover_rho(alpha, g, c, guard):
    free = (alpha > guard) & (alpha < c - guard)
    if free.any():
        return float(g[free].mean())
    at_upper = alpha >= c - guard
    at_zero = alpha <= guard
    lo = g[at_upper].max() if at_upper.any() else -np.inf
    hi = g[at_zero].min() if at_zero.any() else np.inf
    if not np.isfinite(lo):
        return float(hi)
    if not np.isfinite(hi):
        return float(lo)
    return float((lo + hi) / 2.0)


def _kkt_residual(alpha, g, rho, c, guard):
    res = 0.0
    free = (alpha > guard) & (alpha < c - guard)
    if free.any():
        res = float(np.abs(g[free] - rho).max())
    at_zero = alpha <= guard
    if at_zero.any():
        res = max(res, float(np.maximum(rho - g[at_zero], 0.0).max()))
    at_upper = alpha >= c - guard
    if at_upper.any():
        res = max(res, float(np.maximum(g[at_upper] - rho, 0.0).max()))
    return res


def fit(features, config=None):
    """Train on pristine feature vectors (n, d); returns an SvmModel."""
    config = config or SvmConfig()
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"need a non-empty (n, d) feature matrix, got {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("features contain non-finite values")
    mean = std = None
    if config.standardize:
        mean = x.mean(axis=0)
        std = np.where(x.std(axis=0) > 0, x.std(axis=0), 1.0)
        x = (x - mean) / std
    n = x.shape[0]
    c = 1.0 / (config.nu * n)
    K = _gram(x, x, config.gamma)

    # feasible start: fill the box from the front until the simplex is met
    alpha = np.zeros(n)
    n_full = min(int(np.floor(config.nu * n)), n)
    alpha[:n_full] = c
    rest = 1.0 - n_full * c
    if rest > 0 and n_full < n:
        alpha[n_full] = rest
    g = K @ alpha

    guard = 1e-12 * max(c, 1.0)
    n_iter = 0
    converged = False
    while n_iter < config.max_iter:
        up = alpha < c - guard
        low = alpha > guard
        gi = np.where(up, g, np.inf)
        gj = np.where(low, g, -np.inf)
        i = int(np.argmin(gi))
        j = int(np.argmax(gj))
        viol = g[j] - g[i]
        if viol <= config.tol:
            converged = True
            break
        eta = max(K[i, i] + K[j, j] - 2.0 * K[i, j], 1e-12)
        delta = min(viol / eta, c - alpha[i], alpha[j])
        alpha[i] = min(alpha[i] + delta, c)
        alpha[j] = max(alpha[j] - delta, 0.0)
        g += delta * (K[:, i] - K[:, j])
        n_iter += 1

    rho = _recover_rho(alpha, g, c, guard)
    residual = _kkt_residual(alpha, g, rho, c, guard)
    sv = alpha > 0.0
    return SvmModel(
        support_vectors=x[sv].copy(),
        coefficients=alpha[sv].copy(),
        rho=rho,
        config=config,
        n_train=n,
        converged=converged,
        n_iter=n_iter,
        kkt_residual=residual,
        feature_mean=mean,
        feature_std=std,
    )


def decision(model, features):
    """Signed pristine score(s): sum_i a_i K(sv_i, h) - rho.

    Larger means more pristine. Accepts a single vector or an (m, d) batch.
    """
    h = np.asarray(features, dtype=np.float64)
    single = h.ndim == 1
    if single:
        h = h[None, :]
    if h.shape[1] != model.support_vectors.shape[1]:
        raise ValueError(f"feature length {h.shape[1]} does not match model "
                         f"dimension {model.support_vectors.shape[1]}")
    if model.feature_mean is not None:
        h = (h - model.feature_mean) / model.feature_std
    scores = _gram(h, model.support_vectors, model.config.gamma) @ model.coefficients
    scores -= model.rho
    return float(scores[0]) if single else scores


def dual_objective(model_or_alpha, features=None, gamma=None):
    """0.5 a' K a, either of a fitted model or of an explicit (alpha, X)."""
    if isinstance(model_or_alpha, SvmModel):
        sv, a = model_or_alpha.support_vectors, model_or_alpha.coefficients
        gamma = model_or_alpha.config.gamma
    else:
        a = np.asarray(model_or_alpha, dtype=np.float64)
        sv = np.asarray(features, dtype=np.float64)
    K = _gram(sv, sv, gamma)
    return float(0.5 * a @ K @ a)


def _project_box_simplex(v, c):
    """Euclidean projection onto {0 <= a <= c, sum(a) = 1} by bisection."""
    lo, hi = v.min() - c - 1.0, v.max()
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        s = np.clip(v - tau, 0.0, c).sum()
        if s > 1.0:
            lo = tau
        else:
            hi = tau
    return np.clip(v - 0.5 * (lo + hi), 0.0, c)


def fit_bruteforce(features, config=None, iters=200_000, tol=1e-10):
    """Projected-gradient reference solver for tiny n; returns (alpha, rho)."""
    config = config or SvmConfig()
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    c = 1.0 / (config.nu * n)
    K = _gram(x, x, config.gamma)
    step = 1.0 / max(np.linalg.eigvalsh(K).max(), 1e-12)
    alpha = _project_box_simplex(np.full(n, 1.0 / n), c)
    for _ in range(iters):
        new = _project_box_simplex(alpha - step * (K @ alpha), c)
        if np.abs(new - alpha).max() < tol:
            alpha = new
            break
        alpha = new
    g = K @ alpha
    rho = _recover_rho(alpha, g, c, 1e-9 * max(c, 1.0))
    return alpha, rho


MODEL_MAGIC = b"SFSV"
MODEL_VERSION = 1


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_VERSION))
        fh.write(struct.pack("<3d", model.config.gamma, model.config.nu,
                             model.config.tol))
        fh.write(struct.pack("<B", 1 if model.config.standardize else 0))
        m, d = model.support_vectors.shape
        fh.write(struct.pack("<IIq", m, d, model.n_train))
        fh.write(struct.pack("<B", 1 if model.converged else 0))
        fh.write(struct.pack("<qd", model.n_iter, model.kkt_residual))
        fh.write(model.support_vectors.astype("<f4").tobytes())
        fh.write(model.coefficients.astype("<f8").tobytes())
        fh.write(struct.pack("<d", model.rho))
        if model.config.standardize:
            fh.write(model.feature_mean.astype("<f8").tobytes())
            fh.write(model.feature_std.astype("<f8").tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        if fh.read(4) != MODEL_MAGIC:
            raise ValueError(f"{path}: not an SVM model file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != MODEL_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        gamma, nu, tol = struct.unpack("<3d", fh.read(24))
        standardize = bool(struct.unpack("<B", fh.read(1))[0])
        m, d, n_train = struct.unpack("<IIq", fh.read(16))
        converged = bool(struct.unpack("<B", fh.read(1))[0])
        n_iter, residual = struct.unpack("<qd", fh.read(16))
        sv = np.frombuffer(fh.read(4 * m * d), dtype="<f4").reshape(m, d)
        coef = np.frombuffer(fh.read(8 * m), dtype="<f8").copy()
        (rho,) = struct.unpack("<d", fh.read(8))
        mean = std = None
        if standardize:
            mean = np.frombuffer(fh.read(8 * d), dtype="<f8").copy()
            std = np.frombuffer(fh.read(8 * d), dtype="<f8").copy()
    config = SvmConfig(gamma=gamma, nu=nu, tol=tol, standardize=standardize)
    return SvmModel(np.asarray(sv, dtype=np.float64), coef, rho, config,
                    n_train=n_train, converged=converged, n_iter=n_iter,
                    kkt_residual=residual, feature_mean=mean, feature_std=std)
