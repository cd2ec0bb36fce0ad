#!/usr/bin/env python3
"""
DnIRB Network
=============

Denoising inception-residual network built from dnirb.core ops:
1. 7x7 stem (1 -> 64) and 3x3 stem (64 -> 64), both followed by ReLU
2. N repeatable DnIRB blocks: two bottlenecked branches (one vs two 3x3
   convolutions), concatenated back to 64 channels and added to an identity
   shortcut
3. Linear 3x3 head (64 -> 1) producing the noise estimate R(y)

The network learns the noise; denoise() returns clamp(y - R(y), 0, 1).
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from dnirb.core import (
    ConvGrads,
    ConvParams,
    Tensor,
    add_elementwise,
    concat_channels,
    conv2d_backward,
    conv2d_forward,
    relu_backward,
    relu_forward,
    split_channels,
)
from dnirb.errors import ChannelMismatchError, ConfigurationError

logger = logging.getLogger(__name__)

# Layer layout entry: (name, c_out, c_in, kernel_size)
LayerSpec = Tuple[str, int, int, int]


@dataclass(frozen=True)
class NetworkConfig:
    """Hyperparameters that fix the network topology"""

    num_blocks: int
    features: int = 64
    bottleneck: int = 32
    in_channels: int = 1
    stem_kernel: int = 7
    # Activation placement; the defaults keep each block's shortcut a true identity.
    branch_output_relu: bool = False
    post_add_relu: bool = False

    def __post_init__(self):
        if self.num_blocks < 1:
            raise ConfigurationError(f"num_blocks must be >= 1, got {self.num_blocks}")
        if self.features < 1 or self.bottleneck < 1 or self.in_channels < 1:
            raise ConfigurationError("channel widths must be positive")
        if 2 * self.bottleneck != self.features:
            raise ConfigurationError(
                f"two branches of {self.bottleneck} channels cannot rejoin {self.features} features"
            )
        if self.stem_kernel < 1 or self.stem_kernel % 2 == 0:
            raise ConfigurationError(f"stem kernel must be odd, got {self.stem_kernel}")


def layer_layout(config: NetworkConfig) -> List[LayerSpec]:
    """Every convolution in forward order; also the checkpoint manifest order"""
    f, b = config.features, config.bottleneck
    layout: List[LayerSpec] = [
        ("stem1", f, config.in_channels, config.stem_kernel),
        ("stem2", f, f, 3),
    ]
    for i in range(config.num_blocks):
        layout += [
            (f"blocks.{i}.branch_a.0", b, f, 1),
            (f"blocks.{i}.branch_a.1", b, b, 3),
            (f"blocks.{i}.branch_b.0", b, f, 1),
            (f"blocks.{i}.branch_b.1", b, b, 3),
            (f"blocks.{i}.branch_b.2", b, b, 3),
        ]
    layout.append(("head", config.in_channels, f, 3))
    return layout


def count_parameters(config: NetworkConfig) -> int:
    """Closed-form parameter count: weights plus biases of every layer"""
    return sum(c_out * c_in * k * k + c_out for _, c_out, c_in, k in layer_layout(config))


@dataclass
class DnIRBlockParams:
    """Branch A: 1x1 bottleneck + one 3x3. Branch B: 1x1 bottleneck + two 3x3."""

    branch_a: List[ConvParams]
    branch_b: List[ConvParams]

    def __post_init__(self):
        kernels_a = [p.kernel_size for p in self.branch_a]
        kernels_b = [p.kernel_size for p in self.branch_b]
        if kernels_a != [1, 3] or kernels_b != [1, 3, 3]:
            raise ConfigurationError(f"block branches must be [1, 3] and [1, 3, 3], got {kernels_a} and {kernels_b}")
        f = self.branch_a[0].c_in
        if self.branch_b[0].c_in != f or self.branch_a[-1].c_out + self.branch_b[-1].c_out != f:
            raise ConfigurationError("concatenated branch output must match the shortcut width")

    @property
    def features(self) -> int:
        return self.branch_a[0].c_in

    def named_layers(self, prefix: str) -> Iterator[Tuple[str, ConvParams]]:
        for j, params in enumerate(self.branch_a):
            yield f"{prefix}.branch_a.{j}", params
        for j, params in enumerate(self.branch_b):
            yield f"{prefix}.branch_b.{j}", params


@dataclass
class NetworkParams:
    """All learnable parameters of one network, plus the config they realise"""

    config: NetworkConfig
    stem1: ConvParams
    stem2: ConvParams
    blocks: List[DnIRBlockParams]
    head: ConvParams

    def __post_init__(self):
        if len(self.blocks) != self.config.num_blocks:
            raise ConfigurationError(f"config expects {self.config.num_blocks} blocks, got {len(self.blocks)}")

    @classmethod
    def from_layers(cls, config: NetworkConfig, layers: Dict[str, ConvParams]) -> "NetworkParams":
        for name, c_out, c_in, k in layer_layout(config):
            if name not in layers:
                raise ConfigurationError(f"missing layer {name}")
            if layers[name].weights.shape != (c_out, c_in, k, k):
                raise ConfigurationError(
                    f"layer {name} has shape {layers[name].weights.shape}, expected {(c_out, c_in, k, k)}"
                )
        blocks = [
            DnIRBlockParams(
                branch_a=[layers[f"blocks.{i}.branch_a.{j}"] for j in range(2)],
                branch_b=[layers[f"blocks.{i}.branch_b.{j}"] for j in range(3)],
            )
            for i in range(config.num_blocks)
        ]
        return cls(config=config, stem1=layers["stem1"], stem2=layers["stem2"], blocks=blocks, head=layers["head"])

    def named_layers(self) -> List[Tuple[str, ConvParams]]:
        layers = [("stem1", self.stem1), ("stem2", self.stem2)]
        for i, block in enumerate(self.blocks):
            layers.extend(block.named_layers(f"blocks.{i}"))
        layers.append(("head", self.head))
        return layers

    def layers(self) -> Dict[str, ConvParams]:
        return dict(self.named_layers())

    @property
    def parameter_count(self) -> int:
        return sum(p.parameter_count for _, p in self.named_layers())

    def copy(self) -> "NetworkParams":
        return NetworkParams.from_layers(self.config, {name: p.copy() for name, p in self.named_layers()})


def init_params(config: NetworkConfig, rng_seed: int) -> NetworkParams:
    """He initialisation: weights ~ Normal(0, 2 / fan_in), biases zero"""
    rng = np.random.default_rng(rng_seed)
    layers = {}
    for name, c_out, c_in, k in layer_layout(config):
        fan_in = c_in * k * k
        weights = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(c_out, c_in, k, k))
        layers[name] = ConvParams(weights, np.zeros(c_out))
    logger.debug(f"Initialised {config.num_blocks}-block network from seed {rng_seed}")
    return NetworkParams.from_layers(config, layers)


def zero_params(config: NetworkConfig) -> NetworkParams:
    layers = {name: ConvParams.zeros(c_out, c_in, k) for name, c_out, c_in, k in layer_layout(config)}
    return NetworkParams.from_layers(config, layers)


# --- forward / backward -----------------------------------------------------


@dataclass
class LayerRecord:
    """What one conv (+ optional ReLU) saw during the forward pass"""

    name: str
    params: ConvParams
    input: Tensor
    preactivation: Tensor
    relu: bool


@dataclass
class BlockCache:
    input: Tensor
    branch_a: List[LayerRecord]
    branch_b: List[LayerRecord]
    summed: Tensor
    post_add_relu: bool


@dataclass
class NetworkCache:
    stem: List[LayerRecord]
    blocks: List[BlockCache]
    head: LayerRecord
    records: List[LayerRecord] = field(default_factory=list)


def _run_chain(x: Tensor, chain: List[Tuple[str, ConvParams, bool]]) -> Tuple[Tensor, List[LayerRecord]]:
    records = []
    for name, params, relu in chain:
        z = conv2d_forward(x, params)
        records.append(LayerRecord(name, params, x, z, relu))
        x = relu_forward(z) if relu else z
    return x, records


def _backprop_chain(records: List[LayerRecord], grad: Tensor, grads: Dict[str, ConvGrads]) -> Tensor:
    for record in reversed(records):
        if record.relu:
            grad = relu_backward(record.preactivation, grad)
        grad, layer_grads = conv2d_backward(record.input, record.params, grad)
        grads[record.name] = layer_grads
    return grad


def _branch_chain(params: List[ConvParams], names: List[str], config: NetworkConfig) -> List[Tuple[str, ConvParams, bool]]:
    last = len(params) - 1
    return [(name, p, j < last or config.branch_output_relu) for j, (name, p) in enumerate(zip(names, params))]


def block_forward_cached(
    x: Tensor, params: DnIRBlockParams, config: Optional[NetworkConfig] = None, prefix: str = "block"
) -> Tuple[Tensor, BlockCache]:
    config = config or NetworkConfig(num_blocks=1, features=params.features, bottleneck=params.features // 2)
    if x.c != params.features:
        raise ChannelMismatchError("block_forward", params.features, x.c)
    names_a = [name for name, _ in params.named_layers(prefix)][:2]
    names_b = [name for name, _ in params.named_layers(prefix)][2:]
    out_a, records_a = _run_chain(x, _branch_chain(params.branch_a, names_a, config))
    out_b, records_b = _run_chain(x, _branch_chain(params.branch_b, names_b, config))
    summed = add_elementwise(x, concat_channels(out_a, out_b))
    out = relu_forward(summed) if config.post_add_relu else summed
    return out, BlockCache(x, records_a, records_b, summed, config.post_add_relu)


def _apply_chain(x: Tensor, chain: List[Tuple[str, ConvParams, bool]]) -> Tensor:
    for _, params, relu in chain:
        x = conv2d_forward(x, params)
        if relu:
            x = relu_forward(x)
    return x


def block_forward(x: Tensor, params: DnIRBlockParams, config: Optional[NetworkConfig] = None) -> Tensor:
    """x + concat(branch_a(x), branch_b(x)); shape is preserved. Keeps no cache."""
    config = config or NetworkConfig(num_blocks=1, features=params.features, bottleneck=params.features // 2)
    if x.c != params.features:
        raise ChannelMismatchError("block_forward", params.features, x.c)
    names = [name for name, _ in params.named_layers("block")]
    out_a = _apply_chain(x, _branch_chain(params.branch_a, names[:2], config))
    out_b = _apply_chain(x, _branch_chain(params.branch_b, names[2:], config))
    summed = add_elementwise(x, concat_channels(out_a, out_b))
    del out_a, out_b
    return relu_forward(summed) if config.post_add_relu else summed


def block_backward(cache: BlockCache, grad_out: Tensor, grads: Dict[str, ConvGrads]) -> Tensor:
    """Accumulate layer gradients into grads; return the gradient w.r.t. the block input"""
    if cache.post_add_relu:
        grad_out = relu_backward(cache.summed, grad_out)
    width_a = cache.branch_a[-1].params.c_out
    grad_a, grad_b = split_channels(grad_out, width_a)
    grad_from_a = _backprop_chain(cache.branch_a, grad_a, grads)
    grad_from_b = _backprop_chain(cache.branch_b, grad_b, grads)
    return Tensor(grad_out.data + grad_from_a.data + grad_from_b.data)


def _check_input(op: str, y: Tensor, config: NetworkConfig) -> None:
    if y.c != config.in_channels:
        raise ChannelMismatchError(op, config.in_channels, y.c)


def network_forward_cached(y: Tensor, params: NetworkParams) -> Tuple[Tensor, NetworkCache]:
    config = params.config
    _check_input("network_forward", y, config)
    x, stem = _run_chain(y, [("stem1", params.stem1, True), ("stem2", params.stem2, True)])
    block_caches = []
    for i, block in enumerate(params.blocks):
        x, block_cache = block_forward_cached(x, block, config, prefix=f"blocks.{i}")
        block_caches.append(block_cache)
    out, head_records = _run_chain(x, [("head", params.head, False)])
    records = list(stem)
    for block_cache in block_caches:
        records += block_cache.branch_a + block_cache.branch_b
    records += head_records
    return out, NetworkCache(stem, block_caches, head_records[0], records)


def network_forward(y: Tensor, params: NetworkParams) -> Tensor:
    """
    R(y): the estimated noise map, same spatial size as y.

    Inference path: each activation is released once the next layer has
    consumed it, so peak memory does not grow with the block count.
    network_forward_cached is the training path and gives identical values.
    """
    config = params.config
    _check_input("network_forward", y, config)
    x = _apply_chain(y, [("stem1", params.stem1, True), ("stem2", params.stem2, True)])
    for block in params.blocks:
        x = block_forward(x, block, config)
    return conv2d_forward(x, params.head)


def network_backward(cache: NetworkCache, grad_out: Tensor) -> Tuple[Tensor, Dict[str, ConvGrads]]:
    """Gradients of a scalar loss w.r.t. the network input and every layer"""
    grads: Dict[str, ConvGrads] = {}
    grad = _backprop_chain([cache.head], grad_out, grads)
    for block_cache in reversed(cache.blocks):
        grad = block_backward(block_cache, grad, grads)
    grad = _backprop_chain(cache.stem, grad, grads)
    return grad, grads


def activation_pattern(cache: NetworkCache) -> List[np.ndarray]:
    """Boolean masks of every ReLU that fired; equal patterns mean the same linear piece"""
    masks = [record.preactivation.data > 0.0 for record in cache.records if record.relu]
    for block_cache in cache.blocks:
        if block_cache.post_add_relu:
            masks.append(block_cache.summed.data > 0.0)
    return masks


def denoise(y: Tensor, params: NetworkParams) -> Tensor:
    """Clean estimate clamp(y - R(y)) in normalised [0, 1] units"""
    noise = network_forward(y, params)
    return Tensor(np.clip(y.data - noise.data, 0.0, 1.0))


def with_blocks(config: NetworkConfig, num_blocks: int) -> NetworkConfig:
    return replace(config, num_blocks=num_blocks)
