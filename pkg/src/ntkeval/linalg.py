"""Symmetric positive (semi-)definite factorization, solves, and MVN sampling.

Covariance and Gram matrices produced elsewhere in the package are often
numerically semi-definite, especially at zero ridge.  Factorization therefore
runs under a jitter schedule: increasing diagonal boosts ``eps * I`` are tried
in order and the first one that makes Cholesky succeed is reported alongside
the factor.  All accumulation is in float64; the near-singular 1000x1000 Gram
matrices this package produces are not reliably factorizable in less.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotFactorizable
from .rng import RngStream


@dataclass(frozen=True)
class SpdMatrix:
    """Symmetric matrix expected to be positive (semi-)definite.

    Symmetry must be exact (bitwise): producers mirror one triangle rather
    than computing both halves independently.
    """

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
        if not np.array_equal(m, m.T):
            raise DimensionMismatch("matrix is not exactly symmetric")
        object.__setattr__(self, "entries", m)

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    def mean_diagonal(self) -> float:
        return float(np.mean(np.diagonal(self.entries)))


@dataclass(frozen=True)
class JitterPolicy:
    """Increasing jitter schedule, ending in :class:`NotFactorizable`.

    With ``relative=True`` (the default) each step is multiplied by the mean
    diagonal of the target matrix, so the schedule is scale-free:
    ``{0, 1e-10, 1e-8, 1e-6} * mean(diag)``.
    """

    steps: tuple[float, ...] = (0.0, 1e-10, 1e-8, 1e-6)
    relative: bool = True

    def magnitudes(self, m: SpdMatrix) -> list[float]:
        scale = m.mean_diagonal() if self.relative else 1.0
        return [s * scale for s in self.steps]


DEFAULT_JITTER = JitterPolicy()


@dataclass(frozen=True)
class SpdFactor:
    """Lower-triangular factor with the jitter that made it exist:
    ``lower @ lower.T == entries + jitter_applied * I``."""

    lower: np.ndarray
    jitter_applied: float


def cholesky_psd(m: SpdMatrix, policy: JitterPolicy = DEFAULT_JITTER) -> SpdFactor:
    """Factor ``m + eps*I`` for the smallest workable ``eps`` in the schedule.

    Raises
    ------
    NotFactorizable
        If every jitter magnitude in the schedule fails, which signals a
        badly scaled or indefinite input.
    """
    entries = m.entries
    if not entries.any():
        # Degenerate all-zero covariance: L = 0 is an exact factor, but
        # LAPACK rejects the zero pivot, so handle it directly.
        return SpdFactor(np.zeros_like(entries), 0.0)
    eye = np.eye(m.order)
    tried = policy.magnitudes(m)
    for eps in tried:
        target = entries if eps == 0.0 else entries + eps * eye
        try:
            lower = scipy.linalg.cholesky(target, lower=True)
        except scipy.linalg.LinAlgError:
            continue
        return SpdFactor(lower, eps)
    raise NotFactorizable(
        f"Cholesky failed for every jitter in {tried} (order {m.order}); "
        "the matrix is badly scaled or indefinite"
    )


def solve_spd(
    m: SpdMatrix, rhs: np.ndarray, policy: JitterPolicy = DEFAULT_JITTER
) -> tuple[np.ndarray, float]:
    """Solve ``(m + eps*I) x = rhs``; returns ``(x, eps)``.

    ``eps`` is whatever jitter :func:`cholesky_psd` needed; zero whenever the
    plain factorization succeeds.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape[0] != m.order:
        raise DimensionMismatch(
            f"rhs length {rhs.shape[0]} does not match matrix order {m.order}"
        )
    factor = cholesky_psd(m, policy)
    if not factor.lower.any():
        raise NotFactorizable("cannot solve against an all-zero matrix")
    x = scipy.linalg.cho_solve((factor.lower, True), rhs)
    return x, factor.jitter_applied


def sample_mvn(
    cov: SpdMatrix, rng: RngStream, policy: JitterPolicy = DEFAULT_JITTER
) -> np.ndarray:
    """Draw a mean-zero multivariate normal vector with covariance ``cov``.

    The draw is ``L @ z`` with ``L`` from :func:`cholesky_psd` and ``z``
    standard normal from ``rng``, so the realized covariance is
    ``cov + jitter*I``.  Fixed ``(master_seed, stream_id)`` gives a
    bit-identical vector on every run.
    """
    factor = cholesky_psd(cov, policy)
    z = rng.normals(cov.order)
    return factor.lower @ z
