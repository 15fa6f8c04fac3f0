"""Deterministic, independently keyed random-number streams.

Every random draw in the package comes from an :class:`RngStream`, which is a
counter-based Philox generator keyed by ``(master_seed, stream_id)``.  The
same key always yields the same draw sequence, and distinct ``stream_id``
values give statistically independent streams, so work can be distributed
across trials or processes without any shared RNG state.

Standard normals are produced by the inverse-CDF (probit) transform applied
to 53-bit uniforms from the Philox stream.  The transform is pinned here so
that a port to another language can reproduce the distributional pipeline:
``z = ndtri(u)`` with ``u`` the raw uniform draw, and ``u == 0`` replaced by
``2**-54`` to keep the probit finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_MIN_UNIFORM = 2.0**-54


@dataclass
class RngStream:
    """Stateful draw sequence keyed by ``(master_seed, stream_id)``.

    Instances are cheap to create and must not be shared between concurrent
    tasks; derive one stream per task instead.
    """

    master_seed: int
    stream_id: int
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    def _generator(self) -> np.random.Generator:
        if self._gen is None:
            key = np.array(
                [self.master_seed & _MASK64, self.stream_id & _MASK64],
                dtype=np.uint64,
            )
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def uniforms(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """Draw ``n`` uniforms on ``[low, high)`` as float64."""
        u = self._generator().random(n)
        return low + (high - low) * u

    def normals(self, n: int) -> np.ndarray:
        """Draw ``n`` standard normals via the probit transform."""
        u = self._generator().random(n)
        if np.any(u == 0.0):
            u = np.where(u == 0.0, _MIN_UNIFORM, u)
        return ndtri(u)

    def normal_array(self, shape: tuple[int, ...], scale: float = 1.0) -> np.ndarray:
        """Draw a standard-normal array of the given shape, times ``scale``."""
        n = int(np.prod(shape)) if shape else 1
        z = self.normals(n).reshape(shape)
        return z if scale == 1.0 else scale * z

    def permutation(self, n: int) -> np.ndarray:
        """Return a random permutation of ``range(n)``."""
        return self._generator().permutation(n)
