"""Data simulation and the multi-trial model comparison.

Each trial draws a fresh dataset from the ground-truth kernel, fits every
requested model on the same train/test split, and records the held-out RMSE.
Trials are embarrassingly parallel: every random draw in trial ``t`` comes
from streams keyed by ``(master_seed, t * STREAM_SPAN + purpose)``, so results
do not depend on scheduling or worker count, and aggregation is a
deterministic fold over sorted trial ids.

Dataset recipe (per trial): ``d_in * n_obs`` uniforms on ``[low, high)``
reshaped row-major into an ``n_obs x d_in`` design matrix, each observation
vector normalized to unit Euclidean norm; responses are one multivariate
normal draw with covariance given by the ground-truth kernel Gram; the split
holds out ``round(n_obs * test_fraction)`` observations chosen by a seeded
shuffle.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import krr, nn
from .errors import DimensionMismatch, InconsistentModels, InvalidConfig
from .kernels import KernelHyperParams, KernelId, KERNEL_IDS, cross_kernel, gram_matrix
from .linalg import sample_mvn
from .rng import RngStream

# Canonical model-name order used in every report and output file.
MODEL_NAMES = (
    "ntkb1", "ntkb2", "ntkj1", "ntkj2", "gp1", "gp2",
    "ntka1", "ntka2", "k1", "nn1", "nn2",
)
NN_MODELS = ("nn1", "nn2")

# Purpose offsets for per-trial RNG streams.
STREAM_SPAN = 16
_STREAM_DATA = 0
_STREAM_NN_INIT = {1: 1, 2: 3}
_STREAM_NN_TRAIN = {1: 2, 2: 4}


@dataclass(frozen=True)
class SimConfig:
    d_in: int = 15
    n_obs: int = 1000
    n_trials: int = 50
    uniform_low: float = -5.0
    uniform_high: float = 7.0
    test_fraction: float = 1.0 / 3.0
    ground_truth: KernelId = KERNEL_IDS["ntkb1"]
    master_seed: int = 42

    def __post_init__(self):
        if self.d_in < 1 or self.n_obs < 2 or self.n_trials < 1:
            raise InvalidConfig("d_in, n_obs, n_trials must be positive (n_obs >= 2)")
        if not 0.0 < self.test_fraction < 1.0:
            raise InvalidConfig("test_fraction must lie strictly between 0 and 1")
        if self.uniform_high <= self.uniform_low:
            raise InvalidConfig("uniform_high must exceed uniform_low")


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def X_train(self) -> np.ndarray:
        return self.X[self.train_idx]

    @property
    def X_test(self) -> np.ndarray:
        return self.X[self.test_idx]

    @property
    def y_train(self) -> np.ndarray:
        return self.y[self.train_idx]

    @property
    def y_test(self) -> np.ndarray:
        return self.y[self.test_idx]


@dataclass(frozen=True)
class ModelResult:
    rmse: float
    jitter: float
    seconds: float
    error: str | None = None


@dataclass(frozen=True)
class TrialReport:
    trial_id: int
    results: dict[str, ModelResult] = field(default_factory=dict)


@dataclass(frozen=True)
class SummaryRow:
    model: str
    n_trials: int
    mean_rmse: float
    se_mean_rmse: float


def data_stream(cfg: SimConfig, trial_id: int) -> RngStream:
    return RngStream(cfg.master_seed, trial_id * STREAM_SPAN + _STREAM_DATA)


def simulate_dataset(
    cfg: SimConfig, rng: RngStream, hyper: KernelHyperParams | None = None
) -> Dataset:
    """Draw one dataset from the ground-truth kernel (see module docstring)."""
    hyper = hyper or KernelHyperParams(d_in=cfg.d_in)
    if hyper.d_in != cfg.d_in:
        raise InvalidConfig("hyper.d_in disagrees with SimConfig.d_in")
    raw = rng.uniforms(cfg.n_obs * cfg.d_in, cfg.uniform_low, cfg.uniform_high)
    X = raw.reshape(cfg.n_obs, cfg.d_in)
    norms = np.sqrt(np.sum(X * X, axis=1))
    if np.any(norms == 0.0):
        raise InvalidConfig("cannot normalize a zero observation vector")
    X /= norms[:, np.newaxis]

    gram = gram_matrix(cfg.ground_truth, hyper, X)
    y = sample_mvn(gram.matrix, rng)

    n_test = int(np.floor(cfg.n_obs * cfg.test_fraction + 0.5))
    if not 0 < n_test < cfg.n_obs:
        raise InvalidConfig(f"test fraction leaves an empty split (n_test={n_test})")
    perm = rng.permutation(cfg.n_obs)
    return Dataset(X, y, np.sort(perm[: cfg.n_obs - n_test]), np.sort(perm[cfg.n_obs - n_test :]))


def _fit_kernel_model(
    name: str,
    dataset: Dataset,
    hyper: KernelHyperParams,
    lam: float,
    n_workers: int,
) -> tuple[float, float]:
    kid = KernelId.parse(name)
    gram = gram_matrix(kid, hyper, dataset.X_train, n_workers)
    model = krr.fit(gram, dataset.y_train, lam, train_inputs=dataset.X_train)
    pred = krr.predict(model, dataset.X_test, n_workers)
    return krr.rmse(pred, dataset.y_test), model.jitter_used


def _fit_nn_model(
    name: str,
    dataset: Dataset,
    hyper: KernelHyperParams,
    cfg: SimConfig,
    trial_id: int,
    width: int,
    train_cfg: nn.TrainConfig,
) -> float:
    depth = 1 if name == "nn1" else 2
    arch = nn.NetworkArch(cfg.d_in, (width,) * depth)
    init_rng = RngStream(cfg.master_seed, trial_id * STREAM_SPAN + _STREAM_NN_INIT[depth])
    train_rng = RngStream(cfg.master_seed, trial_id * STREAM_SPAN + _STREAM_NN_TRAIN[depth])
    params = nn.init_network(arch, hyper, init_rng)
    trained, _ = nn.train_sgd(
        params, hyper, dataset.X_train, dataset.y_train, train_cfg, train_rng
    )
    pred = nn.forward_batch(trained, hyper, dataset.X_test)
    return krr.rmse(pred, dataset.y_test)


def run_trial(
    cfg: SimConfig,
    models: tuple[str, ...],
    trial_id: int,
    *,
    hyper: KernelHyperParams | None = None,
    lam: float = 0.0,
    nn_width: int = 10_000,
    nn_train: dict[int, nn.TrainConfig] | None = None,
    n_workers: int = 1,
) -> TrialReport:
    """Simulate one dataset and evaluate every requested model on it.

    A model failure is recorded in its result and does not abort the others.
    """
    unknown = [m for m in models if m not in MODEL_NAMES]
    if unknown:
        raise InvalidConfig(f"unknown models {unknown}")
    hyper = hyper or KernelHyperParams(d_in=cfg.d_in)
    nn_train = nn_train or {
        1: nn.TrainConfig.default_for_depth(1),
        2: nn.TrainConfig.default_for_depth(2),
    }
    dataset = simulate_dataset(cfg, data_stream(cfg, trial_id), hyper)
    results: dict[str, ModelResult] = {}
    for name in models:
        start = time.perf_counter()
        try:
            if name in NN_MODELS:
                depth = 1 if name == "nn1" else 2
                value = _fit_nn_model(
                    name, dataset, hyper, cfg, trial_id, nn_width, nn_train[depth]
                )
                jitter = 0.0
            else:
                value, jitter = _fit_kernel_model(name, dataset, hyper, lam, n_workers)
            results[name] = ModelResult(value, jitter, time.perf_counter() - start)
        except Exception as exc:  # noqa: BLE001 - recorded per model
            results[name] = ModelResult(
                float("nan"), 0.0, time.perf_counter() - start, f"{type(exc).__name__}: {exc}"
            )
    return TrialReport(trial_id, results)


def _trial_worker(args) -> TrialReport:
    cfg, models, trial_id, hyper, lam, nn_width, nn_train = args
    return run_trial(
        cfg, models, trial_id,
        hyper=hyper, lam=lam, nn_width=nn_width, nn_train=nn_train, n_workers=1,
    )


def run_trials(
    cfg: SimConfig,
    models: tuple[str, ...],
    *,
    hyper: KernelHyperParams | None = None,
    lam: float = 0.0,
    nn_width: int = 10_000,
    nn_train: dict[int, nn.TrainConfig] | None = None,
    n_workers: int = 1,
    on_trial=None,
) -> list[TrialReport]:
    """Run all trials, optionally across processes; order is by trial id."""
    if n_workers <= 1:
        reports = []
        for t in range(cfg.n_trials):
            report = run_trial(
                cfg, models, t,
                hyper=hyper, lam=lam, nn_width=nn_width, nn_train=nn_train, n_workers=1,
            )
            if on_trial is not None:
                on_trial(report)
            reports.append(report)
        return reports
    argss = [(cfg, models, t, hyper, lam, nn_width, nn_train) for t in range(cfg.n_trials)]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        reports = list(pool.map(_trial_worker, argss))
    if on_trial is not None:
        for report in reports:
            on_trial(report)
    return reports


def aggregate(reports: list[TrialReport]) -> list[SummaryRow]:
    """Per-model trial count, mean RMSE, and standard error of the mean.

    Failed model fits (recorded errors) are excluded from the statistics.
    A single surviving trial gets SE 0.0 by convention, with a warning.
    """
    if not reports:
        raise InconsistentModels("no trial reports to aggregate")
    model_sets = {tuple(sorted(r.results)) for r in reports}
    if len(model_sets) != 1:
        raise InconsistentModels(f"trials disagree on the model set: {sorted(model_sets)}")
    rows = []
    present = next(iter(model_sets))
    for name in (m for m in MODEL_NAMES if m in present):
        values = np.array(
            [r.results[name].rmse for r in sorted(reports, key=lambda r: r.trial_id)
             if r.results[name].error is None]
        )
        if values.size == 0:
            continue
        if values.size == 1:
            warnings.warn(f"single trial for {name}: SE reported as 0.0", stacklevel=2)
            se = 0.0
        else:
            se = float(np.std(values, ddof=1) / np.sqrt(values.size))
        rows.append(SummaryRow(name, int(values.size), float(np.mean(values)), se))
    return rows
