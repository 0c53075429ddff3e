"""1-D convolutional autoencoder with hand-written forward and backward passes.

Arrays are batch-first. A batch of feature maps has shape
``(batch, channels, width)``; a batch of network inputs or outputs has shape
``(batch, length)``. Single samples may be passed as 1-D vectors and come
back 1-D.

Layer chain for each convolutional layer ``i``::

    S = K (*) im2col(I) + b      C = relu(S)      then avg-pool, upsample or nothing

followed by ``flatten`` and an affine ``W F + B`` output layer. The flatten
order is channel-major: element ``(c, j)`` of the last feature map lands at
index ``c * width + j``.

``backward`` returns plain integer-order gradients of the data term only;
fractional factors and the L2 penalty are applied at update time (see
:mod:`fracdenoise.fractional`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import ContractError

__all__ = [
    "ConvSpec",
    "ArchSpec",
    "NetworkParams",
    "ForwardTape",
    "init_params",
    "im2col",
    "col2im",
    "conv_forward",
    "relu",
    "avgpool",
    "avgpool_backward",
    "upsample",
    "upsample_backward",
    "flatten",
    "fc_forward",
    "forward",
    "predict",
    "loss",
    "loss_grad",
    "backward",
]


@dataclass(frozen=True)
class ConvSpec:
    filters: int
    channels: int
    width: int = 3
    padding: int = 1
    stride: int = 1

    def __post_init__(self):
        if self.stride != 1:
            raise ContractError("only stride 1 convolutions are supported")
        if min(self.filters, self.channels, self.width) < 1 or self.padding < 0:
            raise ContractError(f"invalid convolution spec {self}")


@dataclass(frozen=True)
class ArchSpec:
    """Architecture descriptor.

    ``pool_after`` and ``upsample_after`` hold 1-based convolution layer
    numbers (``1`` is CONV1).
    """

    conv_layers: tuple[ConvSpec, ...]
    pool_after: tuple[int, ...] = ()
    upsample_after: tuple[int, ...] = ()
    fc_out: int = 250
    input_len: int = 250

    def __post_init__(self):
        object.__setattr__(self, "conv_layers", tuple(self.conv_layers))
        object.__setattr__(self, "pool_after", tuple(sorted(self.pool_after)))
        object.__setattr__(self, "upsample_after", tuple(sorted(self.upsample_after)))
        if not self.conv_layers:
            raise ContractError("at least one convolution layer is required")
        if set(self.pool_after) & set(self.upsample_after):
            raise ContractError("a layer cannot both pool and upsample")
        n = len(self.conv_layers)
        for k in self.pool_after + self.upsample_after:
            if not 1 <= k <= n:
                raise ContractError(f"layer number {k} out of range 1..{n}")
        channels = 1
        for i, spec in enumerate(self.conv_layers, start=1):
            if spec.channels != channels:
                raise ContractError(
                    f"CONV{i} expects {spec.channels} input channels but receives {channels}"
                )
            channels = spec.filters
        if self.widths()[-1] < 1:
            raise ContractError("dimension chain collapses to zero width")

    @classmethod
    def default(cls, length: int = 250) -> "ArchSpec":
        """Four-layer 16-64-64-16 encoder/decoder on ``length``-sample fragments."""
        return cls(
            conv_layers=(
                ConvSpec(16, 1),
                ConvSpec(64, 16),
                ConvSpec(64, 64),
                ConvSpec(16, 64),
            ),
            pool_after=(1, 2),
            upsample_after=(3, 4),
            fc_out=length,
            input_len=length,
        )

    @classmethod
    def tiny(cls, width: int = 8) -> "ArchSpec":
        """Two-layer network used for exhaustive gradient checks."""
        return cls(
            conv_layers=(ConvSpec(3, 1), ConvSpec(2, 3)),
            pool_after=(1,),
            upsample_after=(2,),
            fc_out=width,
            input_len=width,
        )

    def conv_width(self, layer: int, width_in: int) -> int:
        spec = self.conv_layers[layer - 1]
        return width_in - spec.width + 2 * spec.padding + 1

    def widths(self) -> list[int]:
        """Feature width after every stage, starting with the input length."""
        out = [self.input_len]
        w = self.input_len
        for i in range(1, len(self.conv_layers) + 1):
            w = self.conv_width(i, w)
            out.append(w)
            if i in self.pool_after:
                w //= 2
                out.append(w)
            elif i in self.upsample_after:
                w *= 2
                out.append(w)
        return out

    @property
    def flatten_dim(self) -> int:
        return self.conv_layers[-1].filters * self.widths()[-1]

    def to_dict(self) -> dict:
        return {
            "conv_layers": [
                [c.filters, c.channels, c.width, c.padding, c.stride] for c in self.conv_layers
            ],
            "pool_after": list(self.pool_after),
            "upsample_after": list(self.upsample_after),
            "fc_out": self.fc_out,
            "input_len": self.input_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchSpec":
        return cls(
            conv_layers=tuple(ConvSpec(*c) for c in d["conv_layers"]),
            pool_after=tuple(d["pool_after"]),
            upsample_after=tuple(d["upsample_after"]),
            fc_out=int(d["fc_out"]),
            input_len=int(d["input_len"]),
        )


@dataclass
class NetworkParams:
    kernels: list[np.ndarray]
    biases: list[np.ndarray]
    fc_weight: np.ndarray
    fc_bias: np.ndarray

    def names(self) -> list[str]:
        out = []
        for i in range(1, len(self.kernels) + 1):
            out += [f"conv{i}.kernel", f"conv{i}.bias"]
        return out + ["fc.weight", "fc.bias"]

    def items(self) -> list[tuple[str, np.ndarray]]:
        arrays = []
        for k, b in zip(self.kernels, self.biases):
            arrays += [k, b]
        arrays += [self.fc_weight, self.fc_bias]
        return list(zip(self.names(), arrays))

    def __getitem__(self, name: str) -> np.ndarray:
        return dict(self.items())[name]

    def replace(self, name: str, value: np.ndarray) -> "NetworkParams":
        """Copy with one tensor swapped; shape must match."""
        current = self[name]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != current.shape:
            raise ContractError(f"{name}: shape {value.shape} != {current.shape}")
        return NetworkParams.from_items(
            [(n, value if n == name else a) for n, a in self.items()]
        )

    @classmethod
    def from_items(cls, items) -> "NetworkParams":
        d = dict(items)
        n = sum(1 for k in d if k.endswith(".kernel"))
        return cls(
            kernels=[np.array(d[f"conv{i}.kernel"], dtype=np.float64) for i in range(1, n + 1)],
            biases=[np.array(d[f"conv{i}.bias"], dtype=np.float64) for i in range(1, n + 1)],
            fc_weight=np.array(d["fc.weight"], dtype=np.float64),
            fc_bias=np.array(d["fc.bias"], dtype=np.float64),
        )

    def copy(self) -> "NetworkParams":
        return NetworkParams.from_items(self.items())

    @staticmethod
    def is_regularized(name: str) -> bool:
        """Kernels and the FC weight carry the L2 penalty; biases do not."""
        return name.endswith(".kernel") or name == "fc.weight"

    def check(self, arch: ArchSpec) -> None:
        if len(self.kernels) != len(arch.conv_layers):
            raise ContractError("parameter set and architecture disagree on layer count")
        for i, spec in enumerate(arch.conv_layers):
            if self.kernels[i].shape != (spec.filters, spec.channels, spec.width):
                raise ContractError(f"conv{i + 1}.kernel has shape {self.kernels[i].shape}")
            if self.biases[i].shape != (spec.filters,):
                raise ContractError(f"conv{i + 1}.bias has shape {self.biases[i].shape}")
        if self.fc_weight.shape != (arch.fc_out, arch.flatten_dim):
            raise ContractError(
                f"fc.weight has shape {self.fc_weight.shape}, expected {(arch.fc_out, arch.flatten_dim)}"
            )
        if self.fc_bias.shape != (arch.fc_out,):
            raise ContractError(f"fc.bias has shape {self.fc_bias.shape}")
        for name, a in self.items():
            if not np.all(np.isfinite(a)):
                raise ContractError(f"{name} has non-finite entries")


def init_params(arch: ArchSpec, seed: int = 0, scheme: str = "glorot") -> NetworkParams:
    """Uniform random weights, zero biases.

    ``"glorot"`` draws each tensor from ``+-sqrt(6 / (fan_in + fan_out))``.
    ``"he"`` uses ``+-sqrt(6 / fan_in)`` for the kernels instead. The FC
    weight always uses Glorot.
    """
    if scheme not in ("he", "glorot"):
        raise ContractError(f"unknown init scheme {scheme!r}")
    rng = np.random.default_rng(seed)
    kernels, biases = [], []
    for spec in arch.conv_layers:
        fan_in = spec.channels * spec.width
        fan_out = spec.filters * spec.width
        denom = fan_in if scheme == "he" else fan_in + fan_out
        limit = np.sqrt(6.0 / denom)
        kernels.append(rng.uniform(-limit, limit, (spec.filters, spec.channels, spec.width)))
        biases.append(np.zeros(spec.filters))
    limit = np.sqrt(6.0 / (arch.flatten_dim + arch.fc_out))
    w = rng.uniform(-limit, limit, (arch.fc_out, arch.flatten_dim))
    return NetworkParams(kernels, biases, w, np.zeros(arch.fc_out))


# -- layer primitives ---------------------------------------------------------


def im2col(x, kernel_width: int, padding: int) -> np.ndarray:
    """Gather sliding windows into columns.

    ``x`` has shape ``(..., C, W)``; the result has shape
    ``(..., C * F, N_W)`` with ``N_W = W - F + 2 g + 1``. Row ``c * F + f``
    holds tap ``f`` of channel ``c`` for every output position.
    """
    x = np.asarray(x, dtype=np.float64)
    pad = [(0, 0)] * (x.ndim - 1) + [(padding, padding)]
    xp = np.pad(x, pad)
    n_out = x.shape[-1] - kernel_width + 2 * padding + 1
    if n_out < 1:
        raise ContractError("kernel wider than padded input")
    cols = np.stack([xp[..., f : f + n_out] for f in range(kernel_width)], axis=-2)
    return cols.reshape(*x.shape[:-2], x.shape[-2] * kernel_width, n_out)


def col2im(cols, channels: int, kernel_width: int, padding: int, width: int) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add columns back onto the input grid."""
    cols = np.asarray(cols, dtype=np.float64)
    n_out = cols.shape[-1]
    lead = cols.shape[:-2]
    taps = cols.reshape(*lead, channels, kernel_width, n_out)
    out = np.zeros((*lead, channels, width + 2 * padding))
    for f in range(kernel_width):
        out[..., f : f + n_out] += taps[..., f, :]
    return out[..., padding : padding + width]


def conv_forward(x, kernel, bias, padding: int = 1) -> np.ndarray:
    """Pre-activation ``K (*) im2col(x) + b`` for input ``(..., C, W)``."""
    kernel = np.asarray(kernel, dtype=np.float64)
    nf, nc, fw = kernel.shape
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-2] != nc:
        raise ContractError(f"kernel expects {nc} channels, input has {x.shape[-2]}")
    return _conv_cols(im2col(x, fw, padding), kernel.reshape(nf, nc * fw), bias)


def _conv_cols(cols, k2, bias):
    return np.matmul(k2, cols) + np.asarray(bias, dtype=np.float64)[:, None]


def relu(s):
    return np.maximum(s, 0.0)


def avgpool(c):
    """Mean of adjacent pairs; an odd trailing sample is dropped."""
    c = np.asarray(c, dtype=np.float64)
    half = c.shape[-1] // 2
    return 0.5 * (c[..., 0 : 2 * half : 2] + c[..., 1 : 2 * half : 2])


def avgpool_backward(d_pooled, width: int) -> np.ndarray:
    """Halve and replicate each pooled gradient; a dropped sample gets zero."""
    d_pooled = np.asarray(d_pooled, dtype=np.float64)
    out = np.zeros((*d_pooled.shape[:-1], width))
    half = d_pooled.shape[-1]
    out[..., 0 : 2 * half : 2] = 0.5 * d_pooled
    out[..., 1 : 2 * half : 2] = 0.5 * d_pooled
    return out


def upsample(c):
    """Nearest-neighbour upsampling by 2: ``[a, b] -> [a, a, b, b]``."""
    return np.repeat(np.asarray(c, dtype=np.float64), 2, axis=-1)


def upsample_backward(d_up) -> np.ndarray:
    d_up = np.asarray(d_up, dtype=np.float64)
    return d_up[..., 0::2] + d_up[..., 1::2]


def flatten(r) -> np.ndarray:
    r = np.asarray(r)
    return r.reshape(*r.shape[:-2], r.shape[-2] * r.shape[-1])


def fc_forward(f, weight, bias) -> np.ndarray:
    return np.asarray(f) @ np.asarray(weight).T + bias


# -- full network -------------------------------------------------------------


@dataclass
class ForwardTape:
    cols: list[np.ndarray] = field(default_factory=list)
    pre_activations: list[np.ndarray] = field(default_factory=list)
    input_widths: list[int] = field(default_factory=list)
    last_shape: tuple[int, ...] = ()
    flat: np.ndarray | None = None
    squeeze: bool = False
    consumed: bool = False


def forward(params: NetworkParams, arch: ArchSpec, x) -> tuple[np.ndarray, ForwardTape]:
    """Run the network on one input vector or a batch ``(M, input_len)``."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != arch.input_len:
        raise ContractError(f"input must have length {arch.input_len}, got shape {x.shape}")
    if len(params.kernels) != len(arch.conv_layers):
        raise ContractError("parameter set and architecture disagree on layer count")
    tape = ForwardTape(squeeze=squeeze)
    h = x[:, None, :]
    for i, spec in enumerate(arch.conv_layers, start=1):
        kernel = params.kernels[i - 1]
        if kernel.shape != (spec.filters, spec.channels, spec.width):
            raise ContractError(f"conv{i}.kernel has shape {kernel.shape}")
        tape.input_widths.append(h.shape[-1])
        cols = im2col(h, spec.width, spec.padding)
        s = _conv_cols(cols, kernel.reshape(spec.filters, -1), params.biases[i - 1])
        tape.cols.append(cols)
        tape.pre_activations.append(s)
        h = relu(s)
        if i in arch.pool_after:
            h = avgpool(h)
        elif i in arch.upsample_after:
            h = upsample(h)
    tape.last_shape = h.shape
    tape.flat = flatten(h)
    if params.fc_weight.shape[1] != tape.flat.shape[1]:
        raise ContractError(
            f"fc.weight expects {params.fc_weight.shape[1]} features, got {tape.flat.shape[1]}"
        )
    out = fc_forward(tape.flat, params.fc_weight, params.fc_bias)
    return (out[0] if squeeze else out), tape


def predict(params: NetworkParams, arch: ArchSpec, x) -> np.ndarray:
    return forward(params, arch, x)[0]


def loss(pred, target, params: NetworkParams | None = None, lam: float = 0.0) -> float:
    """Half mean-over-batch squared error plus ``lam/2`` times the squared norm
    of every kernel and the FC weight."""
    pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if pred.shape != target.shape:
        raise ContractError(f"prediction shape {pred.shape} != target shape {target.shape}")
    d = pred - target
    value = float(np.sum(d * d)) / (2.0 * pred.shape[0])
    if lam and params is not None:
        reg = sum(float(np.sum(k * k)) for k in params.kernels)
        reg += float(np.sum(params.fc_weight * params.fc_weight))
        value += 0.5 * lam * reg
    return value


def loss_grad(pred, target) -> np.ndarray:
    """Gradient of the data term with respect to the prediction."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    m = 1 if pred.ndim == 1 else pred.shape[0]
    return (pred - target) / m


def backward(
    tape: ForwardTape, params: NetworkParams, arch: ArchSpec, d_out
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Data-term gradients for every parameter, plus the input gradient.

    ``d_out`` is dL/d(output) with the same shape as the forward output.
    The tape is marked consumed and cannot be reused.
    """
    if tape.consumed:
        raise ContractError("forward tape already consumed by a backward pass")
    if tape.flat is None or len(tape.cols) != len(arch.conv_layers):
        raise ContractError("tape does not match this architecture")
    tape.consumed = True
    d_out = np.asarray(d_out, dtype=np.float64)
    if tape.squeeze:
        d_out = d_out[None, :]
    if d_out.shape != (tape.flat.shape[0], params.fc_weight.shape[0]):
        raise ContractError(f"output gradient has shape {d_out.shape}")

    grads: dict[str, np.ndarray] = {
        "fc.weight": d_out.T @ tape.flat,
        "fc.bias": d_out.sum(axis=0),
    }
    d_h = (d_out @ params.fc_weight).reshape(tape.last_shape)
    for i in range(len(arch.conv_layers), 0, -1):
        spec = arch.conv_layers[i - 1]
        s = tape.pre_activations[i - 1]
        if i in arch.pool_after:
            d_c = avgpool_backward(d_h, s.shape[-1])
        elif i in arch.upsample_after:
            d_c = upsample_backward(d_h)
        else:
            d_c = d_h
        d_s = np.where(s > 0.0, d_c, 0.0)
        cols = tape.cols[i - 1]
        d_k2 = np.tensordot(d_s, cols, axes=([0, 2], [0, 2]))
        grads[f"conv{i}.kernel"] = d_k2.reshape(spec.filters, spec.channels, spec.width)
        grads[f"conv{i}.bias"] = d_s.sum(axis=(0, 2))
        k2 = params.kernels[i - 1].reshape(spec.filters, -1)
        d_cols = np.matmul(k2.T, d_s)
        d_h = col2im(d_cols, spec.channels, spec.width, spec.padding, tape.input_widths[i - 1])
    d_input = d_h[:, 0, :]
    ordered = {name: grads[name] for name in params.names()}
    return ordered, (d_input[0] if tape.squeeze else d_input)
