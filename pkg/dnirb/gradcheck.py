"""
Finite-Difference Gradient Checks
=================================

Central-difference checks of every differentiable piece:
1. conv2d (input, weights, bias)
2. ReLU, away from the kink
3. One DnIRB block
4. A whole 1-block network through the residual loss

Perturbations that move any ReLU across its kink are skipped and redrawn;
within one activation pattern the loss is smooth in every parameter.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Tuple

import numpy as np

from dnirb.core import ConvParams, Tensor, conv2d_backward, conv2d_forward, relu_backward, relu_forward
from dnirb.errors import GradientCheckError
from dnirb.network import (
    NetworkConfig,
    activation_pattern,
    block_backward,
    block_forward_cached,
    init_params,
    network_backward,
    network_forward_cached,
)
from dnirb.trainer import residual_loss

logger = logging.getLogger(__name__)

# primitives: exact (linear) losses, so a small step and a tight tolerance
PRIMITIVE_STEP = 1e-5
PRIMITIVE_TOLERANCE = 1e-6
# composed cases: piecewise quadratic losses, larger step against roundoff
STEP = 1e-4
TOLERANCE = 1e-5
ERROR_FLOOR = 1e-3
RELU_KINK_MARGIN = 1e-3


@dataclass
class GradCheckResult:
    case: str
    seed: int
    checked: int
    skipped: int
    max_relative_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_relative_error < self.tolerance

    def describe(self) -> str:
        status = "ok" if self.passed else "FAILED"
        return (
            f"{self.case:<8} seed={self.seed:<3} checked={self.checked:<3} skipped={self.skipped:<3} "
            f"max_rel_err={self.max_relative_error:.3e} (tol {self.tolerance:.0e}) {status}"
        )


def relative_error(analytic: float, numeric: float, floor: float = ERROR_FLOOR) -> float:
    """|a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients meaningful"""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def central_difference(array: np.ndarray, index: Tuple[int, ...], loss_fn: Callable[[], float], step: float = STEP) -> float:
    """Perturb array[index] in place by +/- step and restore it"""
    original = array[index]
    array[index] = original + step
    loss_plus = loss_fn()
    array[index] = original - step
    loss_minus = loss_fn()
    array[index] = original
    return (loss_plus - loss_minus) / (2.0 * step)


def _projection(shape, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(shape)


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    # correctly rounded sum: unchanged terms cancel exactly between the two sides
    return math.fsum((a * b).ravel())


def check_conv(seed: int, samples: int = 50, step: float = PRIMITIVE_STEP, tolerance: float = PRIMITIVE_TOLERANCE) -> GradCheckResult:
    """Random 2x3x6x6 input through a 4x3x3x3 kernel; loss = <conv(x), r>"""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 3, 6, 6))
    params = ConvParams(rng.standard_normal((4, 3, 3, 3)), rng.standard_normal(4))
    r = _projection((2, 4, 6, 6), rng)

    def loss() -> float:
        return _inner(conv2d_forward(Tensor(x.copy()), params).data, r)

    grad_x, grads = conv2d_backward(Tensor(x.copy()), params, Tensor(r))
    targets = [(x, grad_x.data), (params.weights, grads.weights), (params.bias, grads.bias)]
    worst, checked = 0.0, 0
    for _ in range(samples):
        array, analytic = targets[int(rng.integers(len(targets)))]
        index = tuple(int(rng.integers(d)) for d in array.shape)
        numeric = central_difference(array, index, loss, step)
        worst = max(worst, relative_error(analytic[index], numeric))
        checked += 1
    return GradCheckResult("conv", seed, checked, 0, worst, tolerance)


def check_relu(seed: int, samples: int = 50, step: float = PRIMITIVE_STEP, tolerance: float = PRIMITIVE_TOLERANCE) -> GradCheckResult:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 3, 5, 5))
    r = _projection(x.shape, rng)

    def loss() -> float:
        return _inner(relu_forward(Tensor(x.copy())).data, r)

    analytic = relu_backward(Tensor(x.copy()), Tensor(r)).data
    worst, checked, skipped = 0.0, 0, 0
    while checked < samples and skipped < 20 * samples:
        index = tuple(int(rng.integers(d)) for d in x.shape)
        if abs(x[index]) < RELU_KINK_MARGIN:
            skipped += 1
            continue
        numeric = central_difference(x, index, loss, step)
        worst = max(worst, relative_error(analytic[index], numeric))
        checked += 1
    return GradCheckResult("relu", seed, checked, skipped, worst, tolerance)


def _same_pattern(a: List[np.ndarray], b: List[np.ndarray]) -> bool:
    return all(np.array_equal(m, n) for m, n in zip(a, b))


def _sample_parameters(
    case: str,
    seed: int,
    rng: np.random.Generator,
    arrays: List[Tuple[np.ndarray, np.ndarray]],
    loss_and_pattern: Callable[[], Tuple[float, List[np.ndarray]]],
    samples: int,
    step: float,
    tolerance: float,
) -> GradCheckResult:
    """Check randomly drawn entries, weighting arrays by size, skipping kink crossings"""
    _, base_pattern = loss_and_pattern()
    sizes = np.array([a.size for a, _ in arrays], dtype=np.float64)
    weights = sizes / sizes.sum()
    worst, checked, skipped = 0.0, 0, 0
    while checked < samples and skipped < 20 * samples:
        array, analytic = arrays[int(rng.choice(len(arrays), p=weights))]
        index = tuple(int(rng.integers(d)) for d in array.shape)
        original = array[index]
        array[index] = original + step
        loss_plus, pattern_plus = loss_and_pattern()
        array[index] = original - step
        loss_minus, pattern_minus = loss_and_pattern()
        array[index] = original
        if not (_same_pattern(pattern_plus, base_pattern) and _same_pattern(pattern_minus, base_pattern)):
            skipped += 1
            continue
        numeric = (loss_plus - loss_minus) / (2.0 * step)
        worst = max(worst, relative_error(analytic[index], numeric))
        checked += 1
    return GradCheckResult(case, seed, checked, skipped, worst, tolerance)


def check_block(seed: int, samples: int = 50, step: float = STEP, tolerance: float = TOLERANCE) -> GradCheckResult:
    """One 64-channel DnIRB block on a 1x64x6x6 input; loss = <block(x), r>"""
    rng = np.random.default_rng(seed)
    params = init_params(NetworkConfig(num_blocks=1), int(rng.integers(2 ** 31))).blocks[0]
    x = rng.standard_normal((1, params.features, 6, 6))
    r = _projection(x.shape, rng)

    def loss_and_pattern():
        out, cache = block_forward_cached(Tensor(x.copy()), params)
        pattern = [rec.preactivation.data > 0 for rec in cache.branch_a + cache.branch_b if rec.relu]
        return _inner(out.data, r), pattern

    out, cache = block_forward_cached(Tensor(x.copy()), params)
    grads = {}
    grad_x = block_backward(cache, Tensor(r), grads)
    arrays = [(x, grad_x.data)]
    for name, layer in params.named_layers("block"):
        arrays.append((layer.weights, grads[name].weights))
        arrays.append((layer.bias, grads[name].bias))
    return _sample_parameters("block", seed, rng, arrays, loss_and_pattern, samples, step, tolerance)


def check_network(seed: int, samples: int = 50, step: float = STEP, tolerance: float = TOLERANCE) -> GradCheckResult:
    """1-block network on one 8x8 pair, differentiated through the residual loss"""
    rng = np.random.default_rng(seed)
    params = init_params(NetworkConfig(num_blocks=1), int(rng.integers(2 ** 31)))
    # shift biases off zero so bias gradients are exercised on a generic point
    for _, layer in params.named_layers():
        layer.bias += 0.01 * rng.standard_normal(layer.bias.shape)
    clean = rng.uniform(0.2, 0.8, (1, 1, 8, 8))
    noise = 0.05 * rng.laplace(size=clean.shape)
    noisy = Tensor(clean + noise)
    target = Tensor(noise)

    def loss_and_pattern():
        pred, cache = network_forward_cached(noisy, params)
        loss, _ = residual_loss(pred, target)
        return loss, activation_pattern(cache)

    pred, cache = network_forward_cached(noisy, params)
    _, grad = residual_loss(pred, target)
    _, grads = network_backward(cache, grad)
    arrays = []
    for name, layer in params.named_layers():
        arrays.append((layer.weights, grads[name].weights))
        arrays.append((layer.bias, grads[name].bias))
    return _sample_parameters("network", seed, rng, arrays, loss_and_pattern, samples, step, tolerance)


CHECKS = {
    "conv": check_conv,
    "relu": check_relu,
    "block": check_block,
    "network": check_network,
}


def run_suite(seeds: Iterable[int] = range(20), samples: int = 50, cases: Iterable[str] = tuple(CHECKS)) -> List[GradCheckResult]:
    results = []
    for case in cases:
        for seed in seeds:
            result = CHECKS[case](seed, samples=samples)
            logger.info(result.describe())
            results.append(result)
    return results


def assert_suite_passes(results: List[GradCheckResult]) -> None:
    failures = [r for r in results if not r.passed]
    if failures:
        raise GradientCheckError("; ".join(r.describe() for r in failures))
