"""Scalar and batched evaluation of the nine comparison kernels.

Five kernel families are implemented over a shared two-level ReLU recursion:

* ``NTKB`` - tangent kernel of the bias-inclusive network whose first-layer
  weights carry variance ``sw0^2 / d_in`` with no explicit input rescaling,
  and whose hidden activations are scaled by ``sqrt(c_l / n_l)``.
* ``NTKJ`` - same recursion, but the first layer is an explicit ``1/sqrt(d_in)``
  rescaling of unit-variance weights, which changes only the level-0 tangent
  seed (``<x,y>/d_in + 1`` instead of ``<x,y> + 1``).
* ``NTKA`` - bias-free variant with raw ``<x,y>`` as the level-0 covariance
  and ReLU normalization constant 2 at each level.
* ``GP`` - the covariance (not tangent) recursion of the same bias-inclusive
  network at initialization.
* ``LAPLACE`` - ``a * exp(-||x - y|| / b)``, unrelated to any network.

The building block is the pair of ReLU Gaussian moments for jointly normal
``(u, v)`` with covariance triple ``(kxx, kxy, kyy)`` and angle
``delta = arccos(kxy / sqrt(kxx*kyy))``:

    E[relu(u) relu(v)] = sqrt(kxx*kyy) (sin d + (pi - d) cos d) / (2 pi)
    E[step(u) step(v)] = (pi - d) / (2 pi)

Batch evaluation is row-based: a row of kernel values against many points is
computed with elementwise vector operations plus per-row pairwise sums, and a
scalar call is exactly a one-row batch, so Gram entries match scalar calls
bit for bit and assembly order (or worker count) cannot change any byte.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, InvalidMoment
from .linalg import SpdMatrix

TWO_PI = 2.0 * math.pi
COS_OVERSHOOT_TOL = 1e-8


@dataclass(frozen=True)
class KernelHyperParams:
    """All tunable kernel constants.

    Defaults are the values used throughout the experiments: variance-adjust
    constants ``c1 = c2 = 2``, unit weight/bias scales, Laplacian ``a = 2``,
    ``b = 6``, input dimension 15.
    """

    c1: float = 2.0
    c2: float = 2.0
    sw0: float = 1.0
    sw1: float = 1.0
    sw2: float = 1.0
    sb0: float = 1.0
    sb1: float = 1.0
    sb2: float = 1.0
    lap_a: float = 2.0
    lap_b: float = 6.0
    d_in: int = 15

    def __post_init__(self):
        for name in ("c1", "c2", "sw0", "sw1", "sw2", "lap_a", "lap_b"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("sb0", "sb1", "sb2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.d_in < 1:
            raise ValueError("d_in must be a positive integer")


class KernelFamily(Enum):
    NTKB = "ntkb"
    NTKJ = "ntkj"
    NTKA = "ntka"
    GP = "gp"
    LAPLACE = "laplace"


@dataclass(frozen=True)
class KernelId:
    """One of the nine kernels: a family plus depth (1 or 2 hidden layers).

    Depth is meaningless for the Laplacian and normalized to 1.
    """

    family: KernelFamily
    depth: int = 1

    def __post_init__(self):
        if self.family is KernelFamily.LAPLACE:
            object.__setattr__(self, "depth", 1)
        elif self.depth not in (1, 2):
            raise ValueError(f"depth must be 1 or 2, got {self.depth}")

    @property
    def name(self) -> str:
        if self.family is KernelFamily.LAPLACE:
            return "k1"
        return f"{self.family.value}{self.depth}"

    @classmethod
    def parse(cls, name: str) -> "KernelId":
        try:
            return KERNEL_IDS[name.lower()]
        except KeyError:
            raise ValueError(f"unknown kernel {name!r}") from None


KERNEL_IDS = {
    "ntkb1": KernelId(KernelFamily.NTKB, 1),
    "ntkb2": KernelId(KernelFamily.NTKB, 2),
    "ntkj1": KernelId(KernelFamily.NTKJ, 1),
    "ntkj2": KernelId(KernelFamily.NTKJ, 2),
    "ntka1": KernelId(KernelFamily.NTKA, 1),
    "ntka2": KernelId(KernelFamily.NTKA, 2),
    "gp1": KernelId(KernelFamily.GP, 1),
    "gp2": KernelId(KernelFamily.GP, 2),
    "k1": KernelId(KernelFamily.LAPLACE),
}


@dataclass(frozen=True)
class ArcCosStats:
    """Angle and ReLU moments for one covariance triple.

    ``q`` is the ReLU-ReLU moment, ``d`` the step-step moment (in [0, 1/2]).
    """

    delta: float
    q: float
    d: float


def arc_moments(kxx: float, kxy: float, kyy: float) -> ArcCosStats:
    """Gaussian ReLU moments for the covariance triple ``(kxx, kxy, kyy)``.

    The cosine is clamped to [-1, 1]; overshoot beyond 1e-8 raises
    :class:`InvalidMoment` because it indicates an upstream kernel bug rather
    than round-off.
    """
    if kxx <= 0.0 or kyy <= 0.0:
        raise InvalidMoment(f"self-covariances must be positive, got ({kxx}, {kyy})")
    denom = math.sqrt(kxx * kyy)
    c = kxy / denom
    if abs(c) > 1.0 + COS_OVERSHOOT_TOL:
        raise InvalidMoment(f"cosine {c!r} overshoots [-1, 1] beyond tolerance")
    c = min(1.0, max(-1.0, c))
    delta = math.acos(c)
    q = denom * (math.sin(delta) + (math.pi - delta) * math.cos(delta)) / TWO_PI
    d = (math.pi - delta) / TWO_PI
    return ArcCosStats(delta, q, d)


def _arc_qd_vec(kxx, kxy: np.ndarray, kyy) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (q, d) with the same domain checks as :func:`arc_moments`."""
    bad_self = (np.min(kxx) <= 0.0) if np.ndim(kxx) else (kxx <= 0.0)
    if bad_self or np.min(kyy) <= 0.0:
        raise InvalidMoment("non-positive self-covariance in batch")
    denom = np.sqrt(kxx * kyy)
    c = kxy / denom
    overshoot = np.abs(c) - 1.0
    if np.max(overshoot) > COS_OVERSHOOT_TOL:
        j = int(np.argmax(overshoot))
        raise InvalidMoment(
            f"cosine {c[j]!r} overshoots [-1, 1] beyond tolerance at offset {j}"
        )
    delta = np.arccos(np.clip(c, -1.0, 1.0))
    q = denom * (np.sin(delta) + (np.pi - delta) * np.cos(delta)) / TWO_PI
    d = (np.pi - delta) / TWO_PI
    return q, d


def _level_constants(
    family: KernelFamily, h: KernelHyperParams
) -> list[tuple[float, float, float]]:
    """Per-level ``(c, sw^2, sb^2)`` for levels 1..2 of the recursion."""
    if family in (KernelFamily.NTKB, KernelFamily.GP):
        return [
            (h.c1, h.sw1 * h.sw1, h.sb1 * h.sb1),
            (h.c2, h.sw2 * h.sw2, h.sb2 * h.sb2),
        ]
    if family is KernelFamily.NTKJ:
        return [(2.0, 1.0, 1.0), (2.0, 1.0, 1.0)]
    if family is KernelFamily.NTKA:
        return [(2.0, 1.0, 0.0), (2.0, 1.0, 0.0)]
    raise ValueError(family)


def _kernel_row(kernel: KernelId, h: KernelHyperParams, x: np.ndarray, Y: np.ndarray):
    """Kernel values of ``x`` against every row of ``Y`` (the shared path)."""
    if kernel.family is KernelFamily.LAPLACE:
        diff = Y - x
        dist = np.sqrt(np.sum(diff * diff, axis=1))
        return h.lap_a * np.exp(-dist / h.lap_b)

    dot = np.sum(x * Y, axis=1)
    sx = np.sum(x * x)
    sy = np.sum(Y * Y, axis=1)
    family = kernel.family

    if family in (KernelFamily.NTKB, KernelFamily.GP):
        w0 = (h.sw0 * h.sw0) / h.d_in
        b0 = h.sb0 * h.sb0
        kxy = w0 * dot + b0
        kxx = w0 * sx + b0
        kyy = w0 * sy + b0
        theta = 1.0 + dot
    elif family is KernelFamily.NTKJ:
        kxy = dot / h.d_in + 1.0
        kxx = sx / h.d_in + 1.0
        kyy = sy / h.d_in + 1.0
        theta = kxy.copy()
    else:  # NTKA: raw inner product, no bias anywhere
        kxy = dot
        kxx = sx
        kyy = sy.copy()
        theta = dot

    has_bias = family is not KernelFamily.NTKA
    constants = _level_constants(family, h)
    for c, sw2, sb2 in constants[: kernel.depth]:
        q, d = _arc_qd_vec(kxx, kxy, kyy)
        # Tangent update: output-bias gradient (1), direct readout-weight
        # term (c*q), and the derivative chain through this level.
        theta = c * q + (c * sw2) * d * theta
        if has_bias:
            theta = theta + 1.0
        # Covariance update; the self terms use q at delta = 0, i.e. k/2.
        kxy = sb2 + (c * sw2) * q
        kxx = sb2 + (c * sw2) * (0.5 * kxx)
        kyy = sb2 + (c * sw2) * (0.5 * kyy)

    return kxy if family is KernelFamily.GP else theta


def _check_inputs(h: KernelHyperParams, x: np.ndarray, Y: np.ndarray):
    if x.ndim != 1 or Y.ndim != 2:
        raise DimensionMismatch(f"expected vector and matrix, got {x.shape}, {Y.shape}")
    if x.shape[0] != h.d_in or Y.shape[1] != h.d_in:
        raise DimensionMismatch(
            f"input length {x.shape[0]}/{Y.shape[1]} does not match d_in={h.d_in}"
        )


def kernel_row(
    kernel: KernelId, h: KernelHyperParams, x: np.ndarray, Y: np.ndarray
) -> np.ndarray:
    """Validated row evaluation: ``[k(x, Y[0]), k(x, Y[1]), ...]``."""
    x = np.asarray(x, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    _check_inputs(h, x, Y)
    return _kernel_row(kernel, h, x, Y)


def kernel_value(
    kernel: KernelId, h: KernelHyperParams, x: np.ndarray, y: np.ndarray
) -> float:
    """Scalar kernel evaluation; exactly a one-row batch."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {y.shape}")
    return float(kernel_row(kernel, h, x, y[np.newaxis, :])[0])


def ntkb(x, y, depth: int, h: KernelHyperParams) -> float:
    """Bias-inclusive tangent kernel, depth 1 or 2."""
    return kernel_value(KernelId(KernelFamily.NTKB, depth), h, x, y)


def ntkj(x, y, depth: int, h: KernelHyperParams) -> float:
    """Tangent kernel with explicit first-layer ``1/sqrt(d_in)`` rescaling."""
    return kernel_value(KernelId(KernelFamily.NTKJ, depth), h, x, y)


def ntka(x, y, depth: int, h: KernelHyperParams) -> float:
    """Bias-free tangent kernel on raw inner products."""
    return kernel_value(KernelId(KernelFamily.NTKA, depth), h, x, y)


def gp_kernel(x, y, depth: int, h: KernelHyperParams) -> float:
    """Initialization (NNGP) covariance of the bias-inclusive network."""
    return kernel_value(KernelId(KernelFamily.GP, depth), h, x, y)


def laplacian(x, y, h: KernelHyperParams) -> float:
    """``a * exp(-||x - y||_2 / b)``."""
    return kernel_value(KernelId(KernelFamily.LAPLACE), h, x, y)


@dataclass(frozen=True)
class KernelGram:
    """Symmetric kernel matrix with its provenance."""

    kernel: KernelId
    hyper: KernelHyperParams
    matrix: SpdMatrix


def _gram_row_block(args) -> list[tuple[int, np.ndarray]]:
    kernel, h, X, rows = args
    out = []
    for i in rows:
        try:
            out.append((i, _kernel_row(kernel, h, X[i], X[i:])))
        except InvalidMoment as exc:
            raise InvalidMoment(f"Gram row {i}: {exc}") from exc
    return out


def _cross_row_block(args) -> list[tuple[int, np.ndarray]]:
    kernel, h, X_test, X_train, rows = args
    out = []
    for i in rows:
        try:
            out.append((i, _kernel_row(kernel, h, X_test[i], X_train)))
        except InvalidMoment as exc:
            raise InvalidMoment(f"cross-kernel row {i}: {exc}") from exc
    return out


def _run_blocks(worker, argss, n_workers: int):
    if n_workers <= 1 or len(argss) <= 1:
        for args in argss:
            yield from worker(args)
        return
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        for block in pool.map(worker, argss):
            yield from block


def _row_chunks(n_rows: int, n_workers: int) -> list[np.ndarray]:
    n_blocks = 1 if n_workers <= 1 else min(n_rows, 4 * n_workers)
    return [c for c in np.array_split(np.arange(n_rows), n_blocks) if len(c)]


def gram_matrix(
    kernel: KernelId,
    h: KernelHyperParams,
    X: np.ndarray,
    n_workers: int = 1,
) -> KernelGram:
    """Kernel Gram matrix over the rows of ``X``.

    Only the upper triangle is computed (in parallel over row blocks when
    ``n_workers > 1``) and mirrored, so the result is exactly symmetric and
    byte-identical for any worker count.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != h.d_in:
        raise DimensionMismatch(f"design matrix shape {X.shape} does not match d_in={h.d_in}")
    n = X.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    argss = [(kernel, h, X, rows) for rows in _row_chunks(n, n_workers)]
    for i, vals in _run_blocks(_gram_row_block, argss, n_workers):
        out[i, i:] = vals
    iu, ju = np.triu_indices(n, k=1)
    out[ju, iu] = out[iu, ju]
    return KernelGram(kernel, h, SpdMatrix(out))


def cross_kernel(
    kernel: KernelId,
    h: KernelHyperParams,
    X_test: np.ndarray,
    X_train: np.ndarray,
    n_workers: int = 1,
) -> np.ndarray:
    """Rectangular kernel matrix: entry ``(i, j)`` is ``k(X_test[i], X_train[j])``."""
    X_test = np.ascontiguousarray(X_test, dtype=np.float64)
    X_train = np.ascontiguousarray(X_train, dtype=np.float64)
    for arr in (X_test, X_train):
        if arr.ndim != 2 or arr.shape[1] != h.d_in:
            raise DimensionMismatch(f"matrix shape {arr.shape} does not match d_in={h.d_in}")
    out = np.empty((X_test.shape[0], X_train.shape[0]), dtype=np.float64)
    argss = [
        (kernel, h, X_test, X_train, rows)
        for rows in _row_chunks(X_test.shape[0], n_workers)
    ]
    for i, vals in _run_blocks(_cross_row_block, argss, n_workers):
        out[i] = vals
    return out
