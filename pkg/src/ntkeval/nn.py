"""Finite-width fully connected ReLU networks in tangent parameterization.

Architecture (depth = number of hidden layers, output is scalar):

    pre_1 = b_0 + W_0 @ x                  (or (W_0 @ x)/sqrt(d_in), see below)
    act_l = sqrt(c_l / n_l) * relu(pre_l)   for each hidden layer l
    pre_{l+1} = b_l + W_l @ act_l
    output = b_L + W_L @ act_L

The ``sqrt(c_l / n_l)`` factor sits after each hidden ReLU; the input layer
carries no width factor by default, its weights are instead initialized with
variance ``sw0^2 / d_in``.  Setting ``first_layer_scaled=True`` switches to
the alternative convention: unit-variance first-layer weights with an
explicit ``1/sqrt(d_in)`` rescaling of the input combination (this is the
finite-width counterpart of the ``ntkj`` kernel family).

Conventions pinned for reproducibility:

* ReLU derivative at exactly 0 is 0 (measure-zero event).
* Parameter initialization draws layer by layer, weights (row-major) then
  bias, from a single stream, so a fixed seed gives bit-identical networks.
* The parameter vector ordering for gradient inner products is layer 0..L,
  weights before bias within a layer.
* Batch gradients accumulate through matrix products with fixed operand
  order; training is full-batch by default and sequential over epochs.
* Training loss is ``mean((f(x_i) - y_i)^2)`` over the (mini-)batch.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NonFiniteActivation, NonFiniteLoss, ShapeMismatch
from .kernels import KernelHyperParams
from .rng import RngStream


@dataclass(frozen=True)
class NetworkArch:
    d_in: int
    hidden_widths: tuple[int, ...]
    first_layer_scaled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.d_in < 1 or any(w < 1 for w in self.hidden_widths):
            raise ValueError("d_in and hidden widths must be positive")
        if not 1 <= len(self.hidden_widths) <= 2:
            raise ValueError("only 1 or 2 hidden layers are supported")

    @property
    def depth(self) -> int:
        return len(self.hidden_widths)


@dataclass
class NetworkParams:
    """Per-layer weights and biases; also used as the gradient container."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.002
    epochs: int = 3000
    batch_size: int | None = None  # None = full batch

    def __post_init__(self):
        if self.lr < 0 or self.epochs < 1:
            raise ValueError("lr must be >= 0 and epochs >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    @classmethod
    def default_for_depth(cls, depth: int, lr: float = 0.002) -> "TrainConfig":
        return cls(lr=lr, epochs=3000 if depth == 1 else 6000)


def _layer_scales(arch: NetworkArch, h: KernelHyperParams) -> list[float]:
    cs = [h.c1, h.c2]
    return [math.sqrt(cs[i] / n) for i, n in enumerate(arch.hidden_widths)]


def _init_sigmas(arch: NetworkArch, h: KernelHyperParams) -> list[tuple[float, float]]:
    """(weight sigma, bias sigma) per parameter layer 0..depth."""
    if arch.first_layer_scaled:
        first_w = 1.0
    else:
        first_w = h.sw0 / math.sqrt(arch.d_in)
    sigmas = [(first_w, h.sb0)]
    per_level = [(h.sw1, h.sb1), (h.sw2, h.sb2)]
    for level in range(arch.depth):
        sigmas.append(per_level[level])
    return sigmas


def init_network(arch: NetworkArch, h: KernelHyperParams, rng: RngStream) -> NetworkParams:
    """Draw fresh parameters with the per-layer variances described above."""
    fan_ins = [arch.d_in, *arch.hidden_widths]
    fan_outs = [*arch.hidden_widths, 1]
    sigmas = _init_sigmas(arch, h)
    weights, biases = [], []
    for (n_out, n_in), (sw, sb) in zip(zip(fan_outs, fan_ins), sigmas):
        weights.append(rng.normal_array((n_out, n_in), scale=sw))
        biases.append(rng.normal_array((n_out,), scale=sb) if sb > 0 else np.zeros(n_out))
    return NetworkParams(weights, biases)


@dataclass
class ForwardCache:
    """Pre-activations and scaled activations saved for the backward pass."""

    x: np.ndarray
    pres: list[np.ndarray] = field(default_factory=list)
    acts: list[np.ndarray] = field(default_factory=list)


def _arch_of(params: NetworkParams, first_layer_scaled: bool) -> NetworkArch:
    widths = tuple(w.shape[0] for w in params.weights[:-1])
    return NetworkArch(params.weights[0].shape[1], widths, first_layer_scaled)


def forward(
    params: NetworkParams,
    h: KernelHyperParams,
    x: np.ndarray,
    first_layer_scaled: bool = False,
) -> tuple[float, ForwardCache]:
    """Scalar network output plus the cache needed by :func:`backward`."""
    x = np.asarray(x, dtype=np.float64)
    arch = _arch_of(params, first_layer_scaled)
    if x.shape != (arch.d_in,):
        raise ShapeMismatch(f"input shape {x.shape}, expected ({arch.d_in},)")
    scales = _layer_scales(arch, h)
    cache = ForwardCache(x)
    a = x
    for level, s in enumerate(scales):
        pre = params.weights[level] @ a
        if level == 0 and first_layer_scaled:
            pre = pre / math.sqrt(arch.d_in)
        pre = pre + params.biases[level]
        cache.pres.append(pre)
        a = s * np.maximum(pre, 0.0)
        cache.acts.append(a)
    out = float(params.weights[-1] @ a + params.biases[-1])
    if not math.isfinite(out):
        raise NonFiniteActivation(f"non-finite output {out!r}")
    return out, cache


def backward(
    params: NetworkParams,
    h: KernelHyperParams,
    x: np.ndarray,
    cache: ForwardCache,
    upstream: float = 1.0,
    first_layer_scaled: bool = False,
) -> NetworkParams:
    """Exact reverse-mode gradient of ``upstream * output`` w.r.t. every W, b."""
    arch = _arch_of(params, first_layer_scaled)
    if cache.x.shape != (arch.d_in,) or len(cache.pres) != arch.depth:
        raise ShapeMismatch("cache does not match the parameter shapes")
    scales = _layer_scales(arch, h)
    g_w = [np.empty(0)] * len(params.weights)
    g_b = [np.empty(0)] * len(params.biases)

    g_b[-1] = np.array([upstream])
    g_w[-1] = upstream * cache.acts[-1][np.newaxis, :]
    # Gradient w.r.t. the last hidden pre-activation.
    d_pre = (upstream * params.weights[-1][0]) * (scales[-1] * (cache.pres[-1] > 0.0))
    for level in range(arch.depth - 1, -1, -1):
        inputs = cache.acts[level - 1] if level > 0 else cache.x
        g_b[level] = d_pre
        g_w[level] = np.outer(d_pre, inputs)
        if level == 0 and first_layer_scaled:
            g_w[0] = g_w[0] / math.sqrt(arch.d_in)
        if level > 0:
            d_act = params.weights[level].T @ d_pre
            d_pre = d_act * (scales[level - 1] * (cache.pres[level - 1] > 0.0))
    return NetworkParams(g_w, g_b)


def forward_batch(
    params: NetworkParams,
    h: KernelHyperParams,
    X: np.ndarray,
    first_layer_scaled: bool = False,
) -> np.ndarray:
    """Network outputs for every row of ``X``."""
    arch = _arch_of(params, first_layer_scaled)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != arch.d_in:
        raise ShapeMismatch(f"batch shape {X.shape}, expected (*, {arch.d_in})")
    scales = _layer_scales(arch, h)
    A = X
    for level, s in enumerate(scales):
        PRE = A @ params.weights[level].T
        if level == 0 and first_layer_scaled:
            PRE /= math.sqrt(arch.d_in)
        PRE += params.biases[level]
        A = s * np.maximum(PRE, 0.0)
    return A @ params.weights[-1][0] + params.biases[-1][0]


def _batch_gradients(params, scales, X, y, first_scale: float):
    """Mean-squared-error loss and its parameter gradients on one batch."""
    pres, acts = [], []
    A = X
    for level, s in enumerate(scales):
        PRE = A @ params.weights[level].T
        if level == 0 and first_scale != 1.0:
            PRE *= first_scale
        PRE += params.biases[level]
        pres.append(PRE)
        A = s * np.maximum(PRE, 0.0)
        acts.append(A)
    out = A @ params.weights[-1][0] + params.biases[-1][0]
    resid = out - y
    loss = float(np.mean(resid * resid))

    d_out = (2.0 / X.shape[0]) * resid
    g_w = [np.empty(0)] * len(params.weights)
    g_b = [np.empty(0)] * len(params.biases)
    g_w[-1] = (d_out @ acts[-1])[np.newaxis, :]
    g_b[-1] = np.array([np.sum(d_out)])
    D = np.multiply.outer(d_out, params.weights[-1][0])
    depth = len(scales)
    for level in range(depth - 1, -1, -1):
        D *= scales[level] * (pres[level] > 0.0)
        inputs = acts[level - 1] if level > 0 else X
        g_w[level] = D.T @ inputs
        if level == 0 and first_scale != 1.0:
            g_w[0] *= first_scale
        g_b[level] = D.sum(axis=0)
        if level > 0:
            D = D @ params.weights[level]
    return loss, NetworkParams(g_w, g_b)


def train_sgd(
    params: NetworkParams,
    h: KernelHyperParams,
    X: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    rng: RngStream,
    first_layer_scaled: bool = False,
) -> tuple[NetworkParams, list[float]]:
    """Gradient-descent training on squared error; returns params and loss trace.

    Full-batch by default (deterministic given the seed); with a
    ``batch_size`` the rows are reshuffled each epoch from ``rng``.  The
    trace records the full-training-set MSE under the parameters at the start
    of each epoch.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeMismatch(f"incompatible training shapes {X.shape}, {y.shape}")
    arch = _arch_of(params, first_layer_scaled)
    scales = _layer_scales(arch, h)
    first_scale = 1.0 / math.sqrt(arch.d_in) if first_layer_scaled else 1.0
    params = params.copy()
    n = X.shape[0]
    full_batch = cfg.batch_size is None or cfg.batch_size >= n
    trace: list[float] = []

    def apply(grads: NetworkParams):
        for w, g in zip(params.weights, grads.weights):
            w -= cfg.lr * g
        for b, g in zip(params.biases, grads.biases):
            b -= cfg.lr * g

    for epoch in range(cfg.epochs):
        if full_batch:
            loss, grads = _batch_gradients(params, scales, X, y, first_scale)
            if not math.isfinite(loss):
                raise NonFiniteLoss(epoch, loss)
            trace.append(loss)
            apply(grads)
        else:
            out = forward_batch(params, h, X, first_layer_scaled)
            loss = float(np.mean((out - y) ** 2))
            if not math.isfinite(loss):
                raise NonFiniteLoss(epoch, loss)
            trace.append(loss)
            order = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                _, grads = _batch_gradients(params, scales, X[idx], y[idx], first_scale)
                apply(grads)
    return params, trace


def write_loss_trace(trace: list[float], path: Path | str):
    """Write the per-epoch training loss as ``epoch,train_mse`` CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mse"])
        for epoch, mse in enumerate(trace):
            writer.writerow([epoch, repr(mse)])


def empirical_ntk(
    params: NetworkParams,
    h: KernelHyperParams,
    x: np.ndarray,
    y: np.ndarray,
    first_layer_scaled: bool = False,
) -> float:
    """Inner product of the parameter gradients of the output at x and at y.

    Accumulates per-layer dot products in the fixed parameter order (layer
    0..L, weights then bias) so the value is reproducible.
    """
    _, cache_x = forward(params, h, x, first_layer_scaled)
    _, cache_y = forward(params, h, y, first_layer_scaled)
    gx = backward(params, h, x, cache_x, 1.0, first_layer_scaled)
    gy = backward(params, h, y, cache_y, 1.0, first_layer_scaled)
    total = 0.0
    for wx, wy, bx, by in zip(gx.weights, gy.weights, gx.biases, gy.biases):
        total += float(np.vdot(wx, wy))
        total += float(np.vdot(bx, by))
    return total
