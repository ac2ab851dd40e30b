"""Declarative definitions of the autoencoder variants and the discriminator.

Four encoder/decoder pairs (A1..A4) share the same depth and kernel ladder
but differ in filter counts and activations; "D" is the patch discriminator.
Parameter counting doubles as a structural audit of every layer.
"""

from dataclasses import dataclass, field

INPUT_SHAPE = (64, 64, 3)
DEFAULT_LEAKY_SLOPE = 0.2


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str            # "conv", "deconv" or "dense"
    filters: int         # output channels (units for dense)
    kernel: int = 0      # square kernel side; unused for dense
    stride: int = 1
    activation: str = "linear"
    batch_norm: bool = False


@dataclass
class ArchitectureSpec:
    id: str
    encoder: list = field(default_factory=list)
    decoder: list = field(default_factory=list)
    dense: list = field(default_factory=list)   # discriminator head only
    input_shape: tuple = INPUT_SHAPE
    feature_dim: int = 0
    leaky_slope: float = DEFAULT_LEAKY_SLOPE

    @property
    def layers(self):
        return self.encoder + self.decoder + self.dense


def _conv(name, f, k, s, act="linear", bn=True):
    return LayerSpec(name, "conv", f, k, s, act, bn)


def _deconv(name, f, k, s, act="linear", bn=True):
    return LayerSpec(name, "deconv", f, k, s, act, bn)


def _encoder(filters, act):
    kernels = (6, 5, 4, 3, 2)
    strides = (1, 2, 2, 2, 2)
    return [_conv(f"conv{i + 1}", filters[i], kernels[i], strides[i], act,
                  bn=(i < 4))
            for i in range(5)]


def _decoder(filters, act):
    kernels = (2, 3, 4, 5, 6)
    strides = (2, 2, 2, 2, 1)
    layers = [_deconv(f"dconv{i + 1}", filters[i], kernels[i], strides[i], act,
                      bn=True)
              for i in range(4)]
    layers.append(_deconv("dconv5", 3, 6, 1, "tanh", bn=False))
    return layers


_AUTOENCODERS = {
    "A1": ((16, 32, 64, 128, 256), (256, 128, 64, 32), "relu"),
    "A2": ((16, 16, 32, 32, 128), (32, 32, 16, 16), "linear"),
    "A3": ((16, 16, 32, 32, 128), (64, 32, 32, 16), "linear"),
    "A4": ((16, 16, 32, 64, 128), (64, 32, 16, 16), "linear"),
}


def build_spec(arch_id):
    """Layer list for one of A1..A4 or the discriminator D."""
    if arch_id in _AUTOENCODERS:
        enc_filters, dec_filters, act = _AUTOENCODERS[arch_id]
        spec = ArchitectureSpec(
            id=arch_id,
            encoder=_encoder(enc_filters, act),
            decoder=_decoder(dec_filters, act),
        )
        # four stride-2 halvings: 64 -> 4
        spec.feature_dim = 4 * 4 * enc_filters[-1]
        return spec
    if arch_id == "D":
        lk = "leaky_relu"
        return ArchitectureSpec(
            id="D",
            encoder=[
                _conv("conv1", 16, 5, 1, lk, bn=True),
                _conv("conv2", 16, 2, 2, "linear", bn=False),
                _conv("conv3", 32, 4, 1, lk, bn=True),
                _conv("conv4", 32, 2, 2, "linear", bn=False),
                _conv("conv5", 64, 3, 1, lk, bn=True),
                _conv("conv6", 64, 2, 2, lk, bn=True),
            ],
            dense=[
                LayerSpec("fc1", "dense", 128, activation=lk),
                LayerSpec("fc2", "dense", 1, activation="sigmoid"),
            ],
        )
    raise ValueError(f"unknown architecture id {arch_id!r}")


def _ceil_div(a, b):
    return -(-a // b)


def layer_io_shapes(spec):
    """(in_channels, out_channels, out_h, out_w) per layer, in order."""
    h, w, c = spec.input_shape
    shapes = []
    for layer in spec.encoder:
        h, w = _ceil_div(h, layer.stride), _ceil_div(w, layer.stride)
        shapes.append((c, layer.filters, h, w))
        c = layer.filters
    for layer in spec.decoder:
        h, w = h * layer.stride, w * layer.stride
        shapes.append((c, layer.filters, h, w))
        c = layer.filters
    flat = h * w * c
    for layer in spec.dense:
        shapes.append((flat, layer.filters, 1, 1))
        flat = layer.filters
    return shapes


def param_count(spec):
    """Trainable parameters: k*k*cin*cout + cout per (de)conv plus 2*C per
    batch norm; in*out + out per dense layer. Running stats excluded."""
    total = 0
    for layer, (cin, cout, _, _) in zip(spec.layers, layer_io_shapes(spec)):
        if layer.kind == "dense":
            total += cin * cout + cout
        else:
            total += layer.kernel * layer.kernel * cin * cout + cout
        if layer.batch_norm:
            total += 2 * cout
    return total


def describe(spec):
    """Human-readable layer table."""
    rows = [f"architecture {spec.id}  (input {spec.input_shape}, "
            f"{param_count(spec)} trainable parameters)"]
    for layer, (cin, cout, oh, ow) in zip(spec.layers, layer_io_shapes(spec)):
        if layer.kind == "dense":
            shape = f"{cin} -> {cout}"
        else:
            shape = (f"{layer.kernel}x{layer.kernel} s{layer.stride} "
                     f"{cin} -> {cout}  out {oh}x{ow}")
        bn = " +bn" if layer.batch_norm else ""
        rows.append(f"  {layer.name:8s} {layer.kind:6s} {shape}  {layer.activation}{bn}")
    return "\n".join(rows)
