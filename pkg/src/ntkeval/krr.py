"""Kernel ridge regression in dual form, plus RMSE scoring.

The fitted object stores dual weights ``alpha = (H + lambda*I)^-1 y`` so one
factorization serves every prediction: ``yhat(x) = sum_j k(x, x_j) alpha_j``.
The ridge coefficient defaults to zero; any diagonal jitter the solver needed
is reported separately and never folded into ``lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput
from .kernels import KernelGram, KernelHyperParams, KernelId, cross_kernel
from .linalg import DEFAULT_JITTER, JitterPolicy, SpdMatrix, solve_spd


@dataclass(frozen=True)
class KrrModel:
    kernel: KernelId
    hyper: KernelHyperParams
    train_inputs: np.ndarray
    dual_weights: np.ndarray
    lam: float
    jitter_used: float


def fit(
    gram: KernelGram,
    y: np.ndarray,
    lam: float = 0.0,
    *,
    train_inputs: np.ndarray,
    policy: JitterPolicy = DEFAULT_JITTER,
) -> KrrModel:
    """Solve ``(H + lambda*I) alpha = y`` for the dual weights.

    ``train_inputs`` must be the design matrix the Gram was built from; it is
    kept on the model for prediction.
    """
    y = np.asarray(y, dtype=np.float64)
    n = gram.matrix.order
    if y.shape != (n,):
        raise DimensionMismatch(f"y shape {y.shape} does not match Gram order {n}")
    train_inputs = np.ascontiguousarray(train_inputs, dtype=np.float64)
    if train_inputs.shape[0] != n:
        raise DimensionMismatch(
            f"{train_inputs.shape[0]} training rows for a Gram of order {n}"
        )
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    target = gram.matrix if lam == 0.0 else SpdMatrix(
        gram.matrix.entries + lam * np.eye(n)
    )
    alpha, eps = solve_spd(target, y, policy)
    return KrrModel(gram.kernel, gram.hyper, train_inputs, alpha, lam, eps)


def predict(model: KrrModel, X_new: np.ndarray, n_workers: int = 1) -> np.ndarray:
    """Predictions ``cross_kernel(X_new, train) @ dual_weights``."""
    k = cross_kernel(model.kernel, model.hyper, X_new, model.train_inputs, n_workers)
    return k @ model.dual_weights


def rmse(pred: np.ndarray, truth: np.ndarray) -> float:
    """Root mean squared error between paired vectors."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise DimensionMismatch(f"shapes {pred.shape} and {truth.shape} differ")
    if pred.size == 0:
        raise EmptyInput("rmse of empty vectors")
    diff = pred - truth
    return math.sqrt(float(np.mean(diff * diff)))
