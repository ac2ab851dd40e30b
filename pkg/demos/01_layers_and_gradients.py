"""A guided tour of the differentiable building blocks.

Every layer in this library is a plain numpy function with a hand-written
backward pass. This script builds each one, runs it forward, and then
verifies the analytic gradients against central finite differences --
the same machinery the test suite and `satforgery selfcheck` use.

Run:  python3 demos/01_layers_and_gradients.py
"""

import numpy as np

from satforgery.gradcheck import grad_check
from satforgery.layers import (
    BatchNormParams,
    ConvParams,
    batchnorm,
    batchnorm_grad,
    conv2d,
    conv2d_grad,
    deconv2d,
)

rng = np.random.default_rng(0)

# --- 1. strided same-padded convolution --------------------------------
# A stride-2 conv halves each spatial dimension (rounding up), exactly the
# "same padding" convention the autoencoder architectures rely on.
x = rng.normal(size=(1, 8, 8, 3))
params = ConvParams(filters=rng.normal(size=(3, 3, 3, 5)),
                    bias=np.zeros(5), stride=2)
y = conv2d(x, params)
print(f"conv2d: {x.shape} -> {y.shape}  (stride 2, same padding)")

# --- 2. transposed convolution is the exact adjoint --------------------
# deconv2d with channel-swapped filters satisfies <conv(x), y> == <x, deconv(y)>
# to machine precision. This identity is what makes the decoder's backward
# pass trustworthy, and it is pinned at 1e-10 in the acceptance suite.
adj = ConvParams(params.filters.transpose(0, 1, 3, 2), np.zeros(3), 2)
lhs = float((conv2d(x, params) * y).sum())
rhs = float((x * deconv2d(y, adj)).sum())
print(f"adjointness: |<Ax,y> - <x,A*y>| / |<Ax,y>| = "
      f"{abs(lhs - rhs) / abs(lhs):.3e}")

# --- 3. batch normalization --------------------------------------------
bn = BatchNormParams(scale=np.ones(5), shift=np.zeros(5),
                     running_mean=np.zeros(5), running_var=np.ones(5))
z = batchnorm(y, bn, update_running=False)
print(f"batchnorm: per-channel mean {np.abs(z.mean(axis=(0, 1, 2))).max():.2e}, "
      f"var {z.var(axis=(0, 1, 2)).max():.3f}")

# --- 4. gradient checking ----------------------------------------------
# grad_check perturbs a random subsample of each parameter tensor and
# compares (loss(p+h) - loss(p-h)) / 2h against the analytic gradient.
def conv_loss(p):
    cp = ConvParams(p["filters"], p["bias"], 2)
    out = conv2d(x, cp)
    _, gf, gb = conv2d_grad(x, cp, out)
    return float(0.5 * (out * out).sum()), {"filters": gf, "bias": gb}


report = grad_check(conv_loss, {"filters": params.filters.copy(),
                                "bias": rng.normal(size=5)},
                    samples_per_param=30)
print("conv2d gradient check:")
print(report.summary())


def bn_loss(p):
    bp = BatchNormParams(p["scale"], p["shift"], np.zeros(5), np.ones(5))
    out = batchnorm(y, bp, update_running=False)
    _, gs, gh = batchnorm_grad(y, bp, out)
    return float(0.5 * (out * out).sum()), {"scale": gs, "shift": gh}


report = grad_check(bn_loss, {"scale": rng.normal(size=5) + 1.5,
                              "shift": rng.normal(size=5)},
                    samples_per_param=5)
print("batchnorm gradient check:")
print(report.summary())
