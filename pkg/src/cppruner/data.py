"""Synthetic data, mixed-noise generation (Cases 1-5) and observation masks."""

import warnings
from dataclasses import dataclass

import numpy as np

from .rng import RngStream
from .tensor_core import FactorMatrices, cp_reconstruct

_SMOOTH_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass
class NoiseSpec:
    """Mixed-noise recipe; the five presets follow the usual HSI benchmark."""

    case: int = 1
    gaussian_sigma: float = 0.2
    sparse_rate: float = 0.0
    deadlines: bool = False
    deadlines_per_band: int = 2
    stripe_band_fraction: float = 0.0
    stripe_column_fraction: float = 0.0
    stripe_amplitude: float = 0.25

    def __post_init__(self):
        for r in (self.sparse_rate, self.stripe_band_fraction, self.stripe_column_fraction):
            if not (0.0 <= r <= 1.0):
                raise ValueError("rates must lie in [0, 1]")
        if self.gaussian_sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @classmethod
    def preset(cls, case: int) -> "NoiseSpec":
        if case == 1:
            return cls(case=1, gaussian_sigma=0.2)
        if case == 2:
            return cls(case=2, gaussian_sigma=0.1, sparse_rate=0.1)
        if case == 3:
            return cls(case=3, gaussian_sigma=0.1, sparse_rate=0.1, deadlines=True)
        if case == 4:
            return cls(case=4, gaussian_sigma=0.1, sparse_rate=0.1,
                       stripe_band_fraction=0.4, stripe_column_fraction=0.1)
        if case == 5:
            return cls(case=5, gaussian_sigma=0.1, sparse_rate=0.1, deadlines=True,
                       stripe_band_fraction=0.4, stripe_column_fraction=0.1)
        raise ValueError(f"unknown noise case {case}")


def synth_lowrank(shape, rank, smooth=True, seed=0):
    """Random low-rank tensor with known CP factors, values in [0, 1].

    Factor rows are positive uniform draws (optionally smoothed with a
    length-5 binomial kernel); the tensor is normalized by its maximum so
    the exact CP rank survives normalization, and the returned factors
    reproduce the normalized tensor.
    """
    shape = tuple(int(s) for s in shape)
    if rank > min(shape):
        warnings.warn(f"rank {rank} exceeds the smallest dimension {min(shape)}")
    stream = RngStream(seed, "noise")
    factor_list = []
    for size in shape:
        # localized bumps at random centers keep the components
        # well-separated (high conditioning), unlike raw positive draws
        # whose rows are all strongly aligned
        centers = stream.uniform(rank) * (size - 1)
        width = max(size / (2.0 * rank), 1.5)
        idx = np.arange(size, dtype=np.float64)
        rows = np.exp(-((idx[None, :] - centers[:, None]) ** 2) / (2.0 * width * width))
        rows += 0.05 * stream.uniform(rank * size).reshape(rank, size)
        if smooth:
            rows = np.stack([
                np.convolve(np.pad(row, 2, mode="edge"), _SMOOTH_KERNEL, mode="valid")
                for row in rows
            ])
        factor_list.append(rows)
    factors = FactorMatrices(factor_list)
    tensor = cp_reconstruct(factors)
    peak = tensor.max()
    factors.factors[0] /= peak
    tensor = cp_reconstruct(factors)
    return tensor, factors


def apply_noise(t, spec: NoiseSpec, seed=0, clamp=True):
    """Corrupt ``t`` per the noise spec; returns (noisy, sparse-corruption mask).

    Impulse noise is salt-and-pepper: selected entries are set to 0 or 1
    equiprobably.  Dead lines zero a few random columns in every band,
    stripes add a constant offset to random columns of random bands.  The
    mask marks impulse and dead-line entries.  With clamp=False the result
    keeps out-of-range values (variance measurement mode).
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3 and (spec.deadlines or spec.stripe_band_fraction > 0):
        raise ValueError("band-structured noise needs a 3-way tensor")
    stream = RngStream(seed, "noise")
    noisy = t.copy()
    sparse_mask = np.zeros(t.shape, dtype=bool)

    if spec.gaussian_sigma > 0:
        noisy += spec.gaussian_sigma * stream.normal(t.size).reshape(t.shape)
    if spec.sparse_rate > 0:
        hit = stream.uniform(t.size).reshape(t.shape) < spec.sparse_rate
        salt = stream.uniform(t.size).reshape(t.shape) < 0.5
        noisy[hit] = salt[hit].astype(np.float64)
        sparse_mask |= hit
    if spec.deadlines:
        n_cols = t.shape[1]
        for band in range(t.shape[2]):
            cols = stream.integers(spec.deadlines_per_band, n_cols)
            noisy[:, cols, band] = 0.0
            sparse_mask[:, cols, band] = True
    if spec.stripe_band_fraction > 0 and spec.stripe_column_fraction > 0:
        n_bands = t.shape[2]
        n_cols = t.shape[1]
        band_hit = stream.uniform(n_bands) < spec.stripe_band_fraction
        for band in np.nonzero(band_hit)[0]:
            col_hit = stream.uniform(n_cols) < spec.stripe_column_fraction
            offsets = (stream.uniform(n_cols) * 2.0 - 1.0) * spec.stripe_amplitude
            noisy[:, col_hit, band] += offsets[col_hit]
    if clamp:
        noisy = np.clip(noisy, 0.0, 1.0)
    return noisy, sparse_mask


def sample_mask(shape, sr, seed=0):
    """Bernoulli(sr) observation mask drawn from the "mask" stream."""
    if not (0.0 <= sr <= 1.0):
        raise ValueError(f"sampling rate must be in [0, 1], got {sr}")
    shape = tuple(int(s) for s in shape)
    n = int(np.prod(shape))
    stream = RngStream(seed, "mask")
    mask = (stream.uniform(n) < sr).reshape(shape)
    return mask
