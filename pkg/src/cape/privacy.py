"""Local differential privacy mechanism for embedding vectors.

Each vector is min-max normalized into [0, 1] (so a unit L1 sensitivity
calibrates the noise), then perturbed componentwise with i.i.d. Laplace
noise at scale sensitivity / epsilon.  No clipping happens after the
addition; perturbed values may leave [0, 1].

Sampling draws uniforms from a PCG64 stream (a named, documented
generator with platform-stable output) and maps them through the Laplace
inverse CDF, so seeded runs replay exactly anywhere.  A ``NoiseRng`` is
single-owner; concurrent perturbation should use independent streams from
:meth:`NoiseRng.split`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hashing import stable_seed


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget epsilon and query sensitivity; scale = sensitivity/epsilon."""

    epsilon: float
    sensitivity: float = 1.0

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.sensitivity > 0:
            raise ValueError(f"sensitivity must be > 0, got {self.sensitivity}")

    @property
    def scale(self) -> float:
        return self.sensitivity / self.epsilon


class NoiseRng:
    """Seeded uniform source backed by PCG64.

    Identical seeds yield identical sample sequences on every platform.
    ``split`` derives an independent stream by mixing a stream id into the
    seed through blake2b.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniforms(self, n: int) -> np.ndarray:
        """n uniforms on the open interval (0, 1); exact zeros are redrawn."""
        u = self._gen.random(int(n))
        zeros = u == 0.0
        while zeros.any():
            u[zeros] = self._gen.random(int(zeros.sum()))
            zeros = u == 0.0
        return u

    def split(self, stream: object) -> "NoiseRng":
        return NoiseRng(stable_seed(self.seed, "stream", stream))


@dataclass(frozen=True)
class PerturbedEmbedding:
    """Released vector, the noise actually applied, and the parameters used.

    ``values - <normalized input>`` reproduces ``noise`` bitwise, and
    ``<normalized input> + noise`` reproduces ``values`` bitwise.
    """

    values: np.ndarray
    noise: np.ndarray
    params: PrivacyParams


def minmax_normalize(x: np.ndarray) -> np.ndarray:
    """Affinely map ``x`` onto [0, 1]; a constant vector maps to zeros."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite (no NaN/Inf)")
    lo = x.min()
    hi = x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def minmax_normalize_batch(batch: np.ndarray) -> np.ndarray:
    """Row-wise :func:`minmax_normalize` (per-instance, not per-dimension)."""
    batch = np.asarray(batch, dtype=np.float64)
    if not np.all(np.isfinite(batch)):
        raise ValueError("input must be finite (no NaN/Inf)")
    lo = batch.min(axis=1, keepdims=True)
    hi = batch.max(axis=1, keepdims=True)
    span = hi - lo
    flat = (span == 0.0).ravel()
    span[flat.reshape(-1, 1)] = 1.0
    out = (batch - lo) / span
    out[flat] = 0.0
    return out


def sample_laplace_array(scale: float, rng: NoiseRng, shape) -> np.ndarray:
    """i.i.d. Laplace(0, scale) samples via the inverse CDF.

    Draws u uniform on (-0.5, 0.5) and returns
    ``-scale * sign(u) * ln(1 - 2|u|)``.
    """
    if not scale > 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    shape = tuple(np.atleast_1d(shape).astype(int)) if not isinstance(shape, tuple) else shape
    n = int(np.prod(shape)) if shape else 1
    u = rng.uniforms(n) - 0.5
    samples = -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return samples.reshape(shape)


def sample_laplace(scale: float, rng: NoiseRng) -> float:
    """One Laplace(0, scale) sample; consumes exactly one uniform."""
    return float(sample_laplace_array(scale, rng, (1,))[0])


def perturb(x: np.ndarray, params: PrivacyParams, rng: NoiseRng) -> PerturbedEmbedding:
    """Add fresh i.i.d. Laplace noise to an already-normalized vector.

    Does NOT normalize; callers run :func:`minmax_normalize` first.  The
    stored noise is the representable delta actually applied: the raw draw
    settles through the add/subtract pair so that both
    ``values == x + noise`` and ``values - x == noise`` hold bitwise.
    """
    x = np.asarray(x, dtype=np.float64)
    raw = sample_laplace_array(params.scale, rng, x.shape)
    values = x + raw
    for _ in range(8):
        resummed = x + (values - x)
        if np.array_equal(resummed, values):
            break
        values = resummed
    noise = values - x
    values.flags.writeable = False
    noise.flags.writeable = False
    return PerturbedEmbedding(values=values, noise=noise, params=params)


def perturb_batch(batch: np.ndarray, params: PrivacyParams, rng: NoiseRng) -> np.ndarray:
    """Fast path for training: rows + fresh Laplace noise, values only.

    Noise is drawn row-major, so the stream matches elementwise draws.
    """
    batch = np.asarray(batch, dtype=np.float64)
    return batch + sample_laplace_array(params.scale, rng, batch.shape)
