"""Weight containers and forward/backward passes for the networks.

Weights live in a flat name -> ndarray dict so the optimizers and the
gradient checker can treat every model uniformly. Layer order inside a
block is (de)convolution, activation, then batch normalization.
"""

from dataclasses import dataclass, field

import numpy as np

from .architectures import ArchitectureSpec, build_spec, layer_io_shapes
from .layers import (
    BatchNormParams,
    ConvParams,
    ShapeError,
    activation,
    activation_grad,
    batchnorm,
    batchnorm_grad,
    conv2d,
    conv2d_grad,
    deconv2d,
    deconv2d_grad,
    dense,
    dense_grad,
)

BN_MOMENTUM = 0.99
BN_EPSILON = 1e-3


@dataclass
class ModelWeights:
    arch_id: str
    arrays: dict                     # name -> ndarray, includes running stats
    seed: int | None = None
    stage: str = "init"              # "init", "plain" or "gan"

    def trainable(self):
        return {k: v for k, v in self.arrays.items() if ".running_" not in k}

    def replace_trainable(self, new):
        for k, v in new.items():
            self.arrays[k] = v

    def copy(self):
        return ModelWeights(self.arch_id,
                            {k: v.copy() for k, v in self.arrays.items()},
                            self.seed, self.stage)


def init_weights(spec, seed):
    """Glorot-uniform filters/weights, zero biases, identity batch norm."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for layer, (cin, cout, _, _) in zip(spec.layers, layer_io_shapes(spec)):
        if layer.kind == "dense":
            limit = np.sqrt(6.0 / (cin + cout))
            arrays[f"{layer.name}.weights"] = rng.uniform(
                -limit, limit, size=(cin, cout)).astype(np.float32)
            arrays[f"{layer.name}.bias"] = np.zeros(cout, dtype=np.float32)
        else:
            k = layer.kernel
            fan_in, fan_out = k * k * cin, k * k * cout
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            arrays[f"{layer.name}.filters"] = rng.uniform(
                -limit, limit, size=(k, k, cin, cout)).astype(np.float32)
            arrays[f"{layer.name}.bias"] = np.zeros(cout, dtype=np.float32)
        if layer.batch_norm:
            arrays[f"{layer.name}.bn.scale"] = np.ones(cout, dtype=np.float32)
            arrays[f"{layer.name}.bn.shift"] = np.zeros(cout, dtype=np.float32)
            arrays[f"{layer.name}.bn.running_mean"] = np.zeros(cout, dtype=np.float32)
            arrays[f"{layer.name}.bn.running_var"] = np.ones(cout, dtype=np.float32)
    return ModelWeights(spec.id, arrays, seed=seed)


def _bn_params(arrays, name, train):
    return BatchNormParams(
        scale=arrays[f"{name}.bn.scale"],
        shift=arrays[f"{name}.bn.shift"],
        running_mean=arrays[f"{name}.bn.running_mean"],
        running_var=arrays[f"{name}.bn.running_var"],
        momentum=BN_MOMENTUM,
        epsilon=BN_EPSILON,
        mode="train" if train else "eval",
    )


def _forward_stack(layers, arrays, x, slope, train=False, update_running=True,
                   caches=None):
    for layer in layers:
        if layer.kind == "dense":
            if x.ndim == 4:
                x = x.reshape(x.shape[0], -1)
            w = arrays[f"{layer.name}.weights"]
            b = arrays[f"{layer.name}.bias"]
            z = dense(x, w, b)
        else:
            params = ConvParams(arrays[f"{layer.name}.filters"],
                                arrays[f"{layer.name}.bias"], layer.stride)
            op = conv2d if layer.kind == "conv" else deconv2d
            z = op(x, params)
        a = activation(z, layer.activation, slope)
        if layer.batch_norm:
            bn = _bn_params(arrays, layer.name, train)
            y = batchnorm(a, bn, update_running=update_running)
        else:
            y = a
        if caches is not None:
            caches.append((layer, x, z, a))
        x = y
    return x


def _backward_stack(layers_caches, arrays, upstream, slope, train, grads,
                    need_input_grad=False, param_grads=True):
    """Backpropagate through cached layers, filling `grads` in place.

    With param_grads=False only the input gradient is propagated; with
    need_input_grad=False the first layer's input gradient is skipped.
    """
    for index, (layer, x, z, a) in enumerate(reversed(layers_caches)):
        last = index == len(layers_caches) - 1
        need_in = need_input_grad or not last
        if layer.kind != "dense" and upstream.ndim == 2:
            upstream = upstream.reshape(a.shape)  # leaving the dense head
        if layer.batch_norm:
            bn = _bn_params(arrays, layer.name, train)
            upstream, gsc, gsh = batchnorm_grad(a, bn, upstream)
            if param_grads:
                grads[f"{layer.name}.bn.scale"] = gsc
                grads[f"{layer.name}.bn.shift"] = gsh
        dz = activation_grad(z, layer.activation, upstream, slope)
        if layer.kind == "dense":
            w = arrays[f"{layer.name}.weights"]
            upstream, gw, gb = dense_grad(x, w, dz)
            if param_grads:
                grads[f"{layer.name}.weights"] = gw
                grads[f"{layer.name}.bias"] = gb
        else:
            params = ConvParams(arrays[f"{layer.name}.filters"],
                                arrays[f"{layer.name}.bias"], layer.stride)
            op_grad = conv2d_grad if layer.kind == "conv" else deconv2d_grad
            upstream, gf, gb = op_grad(x, params, dz, need_input=need_in,
                                       need_filters=param_grads)
            if param_grads:
                grads[f"{layer.name}.filters"] = gf
                grads[f"{layer.name}.bias"] = gb
    return upstream


def _check_patch(x, input_shape):
    if x.ndim != 4 or x.shape[1:] != tuple(input_shape):
        raise ShapeError(f"expected (N, {input_shape[0]}, {input_shape[1]}, "
                         f"{input_shape[2]}) patches, got {x.shape}")


class Autoencoder:
    """Encoder/decoder pair for one of the A1..A4 layer layouts."""

    def __init__(self, spec_or_id="A4"):
        self.spec = (spec_or_id if isinstance(spec_or_id, ArchitectureSpec)
                     else build_spec(spec_or_id))
        if not self.spec.decoder:
            raise ValueError(f"{self.spec.id} is not an autoencoder architecture")
        enc_shapes = layer_io_shapes(self.spec)[:len(self.spec.encoder)]
        _, c, h, w = enc_shapes[-1]
        self.bottleneck = (h, w, c)

    def init(self, seed):
        return init_weights(self.spec, seed)

    def encode(self, weights, patches):
        """Flattened bottleneck features; eval-mode batch norm."""
        _check_patch(patches, self.spec.input_shape)
        out = _forward_stack(self.spec.encoder, weights.arrays, patches,
                             self.spec.leaky_slope)
        return out.reshape(out.shape[0], -1)

    def decode(self, weights, features):
        if features.ndim != 2 or features.shape[1] != self.spec.feature_dim:
            raise ShapeError(f"expected (N, {self.spec.feature_dim}) features, "
                             f"got {features.shape}")
        h, w, c = self.bottleneck
        x = features.reshape(features.shape[0], h, w, c)
        return _forward_stack(self.spec.decoder, weights.arrays, x,
                              self.spec.leaky_slope)

    def reconstruct(self, weights, patches):
        return self.decode(weights, self.encode(weights, patches))

    def forward_train(self, weights, patches, update_running=True):
        """Training-mode reconstruction; returns (output, cache)."""
        _check_patch(patches, self.spec.input_shape)
        caches = []
        out = _forward_stack(self.spec.encoder + self.spec.decoder,
                             weights.arrays, patches, self.spec.leaky_slope,
                             train=True, update_running=update_running,
                             caches=caches)
        return out, caches

    def backward(self, weights, caches, d_output, return_input_grad=False):
        """Gradients of a scalar loss w.r.t. all trainable arrays."""
        grads = {}
        d_in = _backward_stack(caches, weights.arrays, d_output,
                               self.spec.leaky_slope, True, grads,
                               need_input_grad=return_input_grad)
        if return_input_grad:
            return grads, d_in
        return grads


class Discriminator:
    """Real-vs-reconstructed patch classifier ending in a sigmoid scalar."""

    def __init__(self):
        self.spec = build_spec("D")

    def init(self, seed):
        return init_weights(self.spec, seed)

    def discriminate(self, weights, patches):
        """Eval-mode probability per patch, shape (N,)."""
        _check_patch(patches, self.spec.input_shape)
        out = _forward_stack(self.spec.encoder + self.spec.dense,
                             weights.arrays, patches, self.spec.leaky_slope)
        return out.reshape(-1)

    def forward_train(self, weights, patches, update_running=True):
        _check_patch(patches, self.spec.input_shape)
        caches = []
        out = _forward_stack(self.spec.encoder + self.spec.dense,
                             weights.arrays, patches, self.spec.leaky_slope,
                             train=True, update_running=update_running,
                             caches=caches)
        return out.reshape(-1), caches

    def backward(self, weights, caches, d_output, return_input_grad=False,
                 param_grads=True):
        grads = {}
        up = np.asarray(d_output).reshape(-1, 1)
        d_in = _backward_stack(caches, weights.arrays, up,
                               self.spec.leaky_slope, True, grads,
                               need_input_grad=return_input_grad,
                               param_grads=param_grads)
        if return_input_grad:
            h, w, c = self.spec.input_shape
            return grads, d_in.reshape(-1, h, w, c)
        return grads
