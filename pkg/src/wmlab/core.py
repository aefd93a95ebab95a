"""Numeric substrate: grids, spectral transforms, seeded randomness, null calibration.

Grids are plain ``numpy`` arrays of shape ``(height, width, channels)``.
Transforms act on the two leading spatial axes, so a leading batch axis
``(B, height, width, channels)`` is also accepted everywhere.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import fft as sp_fft
from scipy.special import gammaln, logsumexp


class InvalidInputError(ValueError):
    """Raised when an operation receives arguments outside its contract."""


def check_grid(values, name: str = "grid") -> np.ndarray:
    """Validate and return a float ``(h, w, c)`` grid (or a batch of them)."""
    arr = np.asarray(values)
    if arr.ndim not in (3, 4):
        raise InvalidInputError(f"{name} must have shape (h, w, c) or (B, h, w, c), got {arr.shape}")
    if any(d == 0 for d in arr.shape):
        raise InvalidInputError(f"{name} has a zero dimension: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def _spatial_axes(arr: np.ndarray) -> tuple[int, int]:
    return (arr.ndim - 3, arr.ndim - 2)


# ---------------------------------------------------------------------------
# Fourier / cosine transforms
# ---------------------------------------------------------------------------

def dft2(grid) -> np.ndarray:
    """Centered, orthonormal 2-D DFT over the spatial axes."""
    arr = check_grid(grid)
    axes = _spatial_axes(arr)
    if arr.shape[axes[0]] < 2 or arr.shape[axes[1]] < 2:
        raise InvalidInputError(f"dft2 needs height, width >= 2, got {arr.shape}")
    return sp_fft.fftshift(sp_fft.fft2(arr, axes=axes, norm="ortho"), axes=axes)


def idft2(spec, imag_tol: float = 1e-9) -> np.ndarray:
    """Inverse of :func:`dft2`; returns the real part.

    The imaginary residue must stay below ``imag_tol`` (relative to the
    largest magnitude), otherwise the spectrum was not conjugate-symmetric.
    """
    spec = np.asarray(spec)
    if spec.ndim not in (3, 4) or any(d == 0 for d in spec.shape):
        raise InvalidInputError(f"bad spectrum shape {spec.shape}")
    axes = _spatial_axes(spec)
    out = sp_fft.ifft2(sp_fft.ifftshift(spec, axes=axes), axes=axes, norm="ortho")
    scale = max(1.0, float(np.max(np.abs(out))))
    residue = float(np.max(np.abs(out.imag)))
    if residue > imag_tol * scale:
        raise InvalidInputError(f"spectrum is not conjugate-symmetric (imag residue {residue:.3e})")
    return np.ascontiguousarray(out.real)


def partner_index(n: int) -> np.ndarray:
    """Centered index of the negated frequency for every centered index."""
    f = np.arange(n) - n // 2
    return (-f + n // 2) % n


def symmetrize(spec: np.ndarray) -> np.ndarray:
    """Project a centered spectrum onto the conjugate-symmetric subspace."""
    spec = np.asarray(spec, dtype=complex)
    axes = _spatial_axes(spec)
    h, w = spec.shape[axes[0]], spec.shape[axes[1]]
    ri, ci = partner_index(h), partner_index(w)
    partner = np.take(np.take(spec, ri, axis=axes[0]), ci, axis=axes[1])
    return 0.5 * (spec + np.conj(partner))


def dct2(grid) -> np.ndarray:
    """Orthonormal type-II DCT over the (square) spatial axes."""
    arr = check_grid(grid)
    axes = _spatial_axes(arr)
    if arr.shape[axes[0]] != arr.shape[axes[1]]:
        raise InvalidInputError(f"dct2 needs a square grid, got {arr.shape}")
    return sp_fft.dctn(arr, type=2, axes=axes, norm="ortho")


def idct2(grid) -> np.ndarray:
    """Exact inverse of :func:`dct2` (orthonormal type-III)."""
    arr = check_grid(grid)
    axes = _spatial_axes(arr)
    if arr.shape[axes[0]] != arr.shape[axes[1]]:
        raise InvalidInputError(f"idct2 needs a square grid, got {arr.shape}")
    return sp_fft.idctn(arr, type=2, axes=axes, norm="ortho")


# ---------------------------------------------------------------------------
# Randomness
# ---------------------------------------------------------------------------

def _label_words(label: str) -> list[int]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


class SeededRng:
    """Counter-based (Philox) generator keyed by a 64-bit seed and a label path.

    ``child(label)`` derives an independent, reproducible stream; the parent
    stream is not advanced by deriving children.
    """

    def __init__(self, seed: int, path: tuple[str, ...] = ()):
        if not 0 <= int(seed) < 2**64:
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.path = tuple(path)
        words = [self.seed & 0xFFFFFFFF, self.seed >> 32]
        for label in self.path:
            words.extend(_label_words(label))
        self.generator = np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))

    def child(self, *labels) -> "SeededRng":
        return SeededRng(self.seed, self.path + tuple(str(x) for x in labels))

    def normal(self, size) -> np.ndarray:
        return self.generator.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, path={self.path!r})"


def gaussian_field(rng: SeededRng, h: int, w: int, c: int) -> np.ndarray:
    """i.i.d. standard normal grid of shape ``(h, w, c)``."""
    if min(h, w, c) <= 0:
        raise InvalidInputError(f"dimensions must be positive, got {(h, w, c)}")
    return rng.normal((h, w, c))


# ---------------------------------------------------------------------------
# Null calibration and tail probabilities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NullModel:
    """Sorted detection statistics drawn under the no-watermark hypothesis."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float))
        if s.size < 1000:
            raise InvalidInputError(f"NullModel needs at least 1000 samples, got {s.size}")
        object.__setattr__(self, "samples", s)

    @property
    def sample_count(self) -> int:
        return int(self.samples.size)

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.samples, q))


def calibrate_null(statistic_sampler: Callable[[SeededRng], float], n: int, rng: SeededRng) -> NullModel:
    """Draw ``n`` null statistics; call ``i`` receives the child stream ``rng.child(i)``."""
    if n < 1000:
        raise InvalidInputError(f"n must be >= 1000, got {n}")
    samples = np.array([float(statistic_sampler(rng.child("null", i))) for i in range(n)])
    return NullModel(samples)


def p_value(stat: float, null: NullModel) -> float:
    """Smoothed left-tail p-value: (#{null <= stat} + 1) / (n + 1).

    Lower statistics mean a closer match to the key.
    """
    count = int(np.searchsorted(null.samples, stat, side="right"))
    return (count + 1) / (null.sample_count + 1)


def binomial_tail(n: int, k: int) -> float:
    """P(X >= k) for X ~ Binomial(n, 1/2), evaluated in log space."""
    if n < 0 or k < 0 or k > n:
        raise InvalidInputError(f"need 0 <= k <= n, got n={n}, k={k}")
    if k == 0:
        return 1.0
    j = np.arange(k, n + 1)
    log_terms = gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1) - n * math.log(2.0)
    return float(min(1.0, math.exp(logsumexp(log_terms))))


def binomial_threshold(n: int, fpr: float) -> int:
    """Smallest k with ``binomial_tail(n, k) <= fpr``."""
    if not 0.0 < fpr < 1.0:
        raise InvalidInputError(f"fpr must lie in (0, 1), got {fpr}")
    for k in range(n + 1):
        if binomial_tail(n, k) <= fpr:
            return k
    return n + 1
