"""Initial-noise watermark schemes: key generation, embedding, detection, calibration.

Four desk-scale schemes share one interface:

* ``tree_ring``        one complex value per Fourier ring band
* ``ring_id``          one digit per ring, written as a magnitude level
* ``gaussian_shading`` bits carried by the sign quantile of every latent element
* ``wind``             per-image seeded noise plus a per-group Fourier ring pattern

Detection always works on an estimate of z_T (the empty-prompt inversion of a
clean latent). Lower statistics mean a stronger match, except for Gaussian
Shading whose decision is on bit accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import ndtri

from .core import (
    InvalidInputError,
    NullModel,
    SeededRng,
    binomial_threshold,
    dft2,
    gaussian_field,
    idft2,
    p_value,
    partner_index,
)
from .diffusion import GmmDenoiser, NoiseSchedule, invert

SCHEMES = ("tree_ring", "ring_id", "gaussian_shading", "wind")
P_VALUE_LEVEL = 0.05


@dataclass(frozen=True)
class SchemeParams:
    """Desk-scale scheme parameters (shared by all four schemes where relevant)."""

    latent_shape: tuple = (16, 16, 1)
    channel: int = 0
    tree_ring_bands: tuple = ((3.0, 4.0), (4.0, 5.0), (5.0, 6.0))
    statistic: str = "l1"            # tree_ring band distance: "l1" or "l2"
    normalize: bool = True           # divide the band distance by the band's RMS magnitude
    ring_id_bands: tuple = ((3.0, 4.0), (4.0, 5.0), (5.0, 6.0), (6.0, 7.0))
    ring_id_alphabet: int = 4
    ring_id_spacing: Optional[float] = None   # None -> 3 null standard deviations
    ring_id_keys: int = 8
    n_bits: int = 256
    repetition: Optional[int] = None          # None -> latent size // n_bits
    wind_groups: int = 8
    wind_band: tuple = (3.0, 6.0)
    wind_candidates: int = 16

    def __post_init__(self):
        h, w, c = self.latent_shape
        if not 0 <= self.channel < c:
            raise InvalidInputError(f"channel {self.channel} outside latent channels {c}")
        limit = min(h, w) / 2
        for bands in (self.tree_ring_bands, self.ring_id_bands, (self.wind_band,)):
            _check_bands(bands, limit)
        if self.statistic not in ("l1", "l2"):
            raise InvalidInputError(f"statistic must be 'l1' or 'l2', got {self.statistic!r}")
        if not 1 <= self.n_bits <= h * w * c:
            raise InvalidInputError("n_bits must lie in [1, latent element count]")
        if self.repetition is not None and self.repetition * self.n_bits > h * w * c:
            raise InvalidInputError("repetition * n_bits exceeds latent element count")
        if self.ring_id_alphabet < 2 or self.wind_groups < 1 or self.wind_candidates < 1:
            raise InvalidInputError("alphabet >= 2, groups >= 1 and candidates >= 1 required")

    @property
    def bit_repetition(self) -> int:
        h, w, c = self.latent_shape
        return self.repetition or (h * w * c) // self.n_bits


def _check_bands(bands, limit: float) -> None:
    spans = sorted((float(a), float(b)) for a, b in bands)
    for a, b in spans:
        if not 0 <= a < b <= limit:
            raise InvalidInputError(f"ring band [{a}, {b}) must satisfy 0 <= inner < outer <= {limit}")
    for (a0, b0), (a1, b1) in zip(spans, spans[1:]):
        if a1 < b0:
            raise InvalidInputError(f"ring bands [{a0}, {b0}) and [{a1}, {b1}) overlap")


# ---------------------------------------------------------------------------
# Fourier ring geometry
# ---------------------------------------------------------------------------

def ring_bins(h: int, w: int, inner: float, outer: float) -> tuple[np.ndarray, np.ndarray]:
    """Centered-spectrum bins with inner <= radius < outer, split by conjugate pairing.

    Returns (canonical, partner) flat index arrays: each canonical bin is
    written freely, its partner receives the conjugate. Self-conjugate bins
    appear in ``canonical`` with themselves as partner.
    """
    yy, xx = np.meshgrid(np.arange(h) - h // 2, np.arange(w) - w // 2, indexing="ij")
    radius = np.hypot(yy, xx)
    inside = (radius >= inner) & (radius < outer)
    pr, pc = partner_index(h), partner_index(w)
    canonical, partner = [], []
    for i, j in zip(*np.nonzero(inside)):
        k = (int(pr[i]), int(pc[j]))
        if (i, j) <= k:
            canonical.append(i * w + j)
            partner.append(k[0] * w + k[1])
    return np.asarray(canonical, dtype=int), np.asarray(partner, dtype=int)


def _write_pairs(spec2d: np.ndarray, canonical, partner, values) -> None:
    flat = spec2d.reshape(-1)
    values = np.asarray(values, dtype=complex)
    self_conj = canonical == partner
    values = np.where(self_conj, values.real, values)
    flat[canonical] = values
    flat[partner[~self_conj]] = np.conj(values[~self_conj])


def _band_pattern(h: int, w: int, canonical, partner, values) -> np.ndarray:
    """Full-band expected spectrum values (canonical + partner bins), in flat-index order."""
    spec = np.zeros((h, w), dtype=complex)
    _write_pairs(spec, canonical, partner, values)
    idx = np.union1d(canonical, partner)
    return idx, spec.reshape(-1)[idx]


# ---------------------------------------------------------------------------
# Keys
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WatermarkKey:
    """Scheme-tagged secret.

    Payload fields by scheme:
      tree_ring:        ``values`` (one complex value per band)
      ring_id:          ``digits`` (one per ring)
      gaussian_shading: ``bits``
      wind:             ``group``, ``pattern_seed``, ``noise_seed``
    """

    scheme: str
    key_id: str
    seed: int
    values: tuple = ()
    digits: tuple = ()
    bits: tuple = ()
    group: int = 0
    pattern_seed: int = 0
    noise_seed: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidInputError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True)
class KeyRing:
    keys: tuple

    def __post_init__(self):
        ids = [k.key_id for k in self.keys]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("key ids in a KeyRing must be unique")

    def __len__(self) -> int:
        return len(self.keys)

    def __iter__(self):
        return iter(self.keys)

    def by_id(self, key_id: str) -> WatermarkKey:
        for k in self.keys:
            if k.key_id == key_id:
                return k
        raise KeyError(key_id)


def gen_key(scheme: str, rng: SeededRng, params: SchemeParams = SchemeParams(), key_id: str = "k0",
            group: Optional[int] = None) -> WatermarkKey:
    """Draw a reproducible key from ``rng``."""
    seed = int(rng.integers(0, 2**63))
    if scheme == "tree_ring":
        n = len(params.tree_ring_bands)
        vals = (rng.normal(n) + 1j * rng.normal(n)) / math.sqrt(2.0)
        return WatermarkKey(scheme, key_id, seed, values=tuple(complex(v) for v in vals))
    if scheme == "ring_id":
        digits = rng.integers(0, params.ring_id_alphabet, len(params.ring_id_bands))
        return WatermarkKey(scheme, key_id, seed, digits=tuple(int(d) for d in digits))
    if scheme == "gaussian_shading":
        bits = rng.integers(0, 2, params.n_bits)
        return WatermarkKey(scheme, key_id, seed, bits=tuple(int(b) for b in bits))
    if scheme == "wind":
        g = int(rng.integers(0, params.wind_groups)) if group is None else int(group)
        if not 0 <= g < params.wind_groups:
            raise InvalidInputError(f"wind group {g} outside [0, {params.wind_groups})")
        return WatermarkKey(scheme, key_id, seed, group=g, pattern_seed=wind_pattern_seed(rng.seed, g),
                            noise_seed=int(rng.integers(0, 2**63)))
    raise InvalidInputError(f"unknown scheme {scheme!r}")


def wind_pattern_seed(master_seed: int, group: int) -> int:
    return int(SeededRng(master_seed, ("wind-group", str(group))).integers(0, 2**63))


def make_key_ring(scheme: str, rng: SeededRng, params: SchemeParams = SchemeParams()) -> KeyRing:
    """Owner's key set: one key for tree_ring / gaussian_shading, ``ring_id_keys`` digit
    strings for ring_id, ``wind_groups x wind_candidates`` keys for wind."""
    if scheme in ("tree_ring", "gaussian_shading"):
        return KeyRing((gen_key(scheme, rng.child("key", 0), params, "k0"),))
    if scheme == "ring_id":
        keys, seen = [], set()
        i = 0
        while len(keys) < params.ring_id_keys:
            k = gen_key(scheme, rng.child("key", i), params, f"k{len(keys)}")
            i += 1
            if k.digits in seen:
                continue
            seen.add(k.digits)
            keys.append(k)
        return KeyRing(tuple(keys))
    if scheme == "wind":
        keys = []
        for g in range(params.wind_groups):
            for j in range(params.wind_candidates):
                k = gen_key(scheme, rng.child("key", g, j), params, f"g{g}n{j}", group=g)
                keys.append(replace(k, pattern_seed=wind_pattern_seed(rng.seed, g)))
        return KeyRing(tuple(keys))
    raise InvalidInputError(f"unknown scheme {scheme!r}")


# ---------------------------------------------------------------------------
# Embedding
# ---------------------------------------------------------------------------

def ring_id_spacing(params: SchemeParams) -> float:
    """Level spacing: three null standard deviations of the smallest ring's readout."""
    if params.ring_id_spacing is not None:
        return float(params.ring_id_spacing)
    h, w, _ = params.latent_shape
    smallest = min(len(np.union1d(*ring_bins(h, w, a, b))) for a, b in params.ring_id_bands)
    # readout = mean of Re(F) over the ring; Re(F) ~ N(0, 1/2) per bin under the null
    return 3.0 * math.sqrt(0.5 / smallest)


def _wind_pattern(params: SchemeParams, pattern_seed: int) -> np.ndarray:
    canonical, _ = ring_bins(*params.latent_shape[:2], *params.wind_band)
    prng = SeededRng(pattern_seed, ("pattern",))
    n = canonical.size
    return (prng.normal(n) + 1j * prng.normal(n)) / math.sqrt(2.0)


def wind_noise(key: WatermarkKey, params: SchemeParams) -> np.ndarray:
    """The exact initial noise a wind key produces."""
    h, w, c = params.latent_shape
    z = gaussian_field(SeededRng(key.noise_seed, ("noise",)), h, w, c)
    spec = dft2(z)
    canonical, partner = ring_bins(h, w, *params.wind_band)
    _write_pairs(spec[:, :, params.channel], canonical, partner, _wind_pattern(params, key.pattern_seed))
    return idft2(spec)


def _band_values(key: WatermarkKey, params: SchemeParams) -> list:
    """(bands, per-band canonical values) for the Fourier-ring schemes."""
    h, w, _ = params.latent_shape
    out = []
    if key.scheme == "tree_ring":
        for (a, b), v in zip(params.tree_ring_bands, key.values):
            canonical, partner = ring_bins(h, w, a, b)
            out.append((canonical, partner, np.full(canonical.size, v)))
    elif key.scheme == "ring_id":
        delta = ring_id_spacing(params)
        for (a, b), d in zip(params.ring_id_bands, key.digits):
            canonical, partner = ring_bins(h, w, a, b)
            out.append((canonical, partner, np.full(canonical.size, d * delta, dtype=complex)))
    return out


def embed(key: WatermarkKey, rng: SeededRng, params: SchemeParams = SchemeParams()) -> np.ndarray:
    """Watermarked initial noise z_T for ``key``; ``rng`` supplies the free randomness."""
    h, w, c = params.latent_shape
    if key.scheme in ("tree_ring", "ring_id"):
        z = gaussian_field(rng, h, w, c)
        spec = dft2(z)
        for canonical, partner, vals in _band_values(key, params):
            _write_pairs(spec[:, :, params.channel], canonical, partner, vals)
        return idft2(spec)
    if key.scheme == "gaussian_shading":
        if len(key.bits) != params.n_bits:
            raise InvalidInputError("key bit count does not match params.n_bits")
        n = h * w * c
        carried = _bit_of_element(params)
        u = rng.uniform(size=n)
        bits = np.asarray(key.bits)
        z = rng.normal(n)  # elements past n_bits * r stay plain Gaussian
        m = carried >= 0
        z[m] = ndtri((bits[carried[m]] + u[m]) / 2.0)
        return z.reshape(h, w, c)
    if key.scheme == "wind":
        return wind_noise(key, params)
    raise InvalidInputError(f"unknown scheme {key.scheme!r}")


def _bit_of_element(params: SchemeParams) -> np.ndarray:
    """Which bit each flattened latent element carries (-1: none). Repeats tile the latent."""
    h, w, c = params.latent_shape
    n = h * w * c
    r = params.bit_repetition
    out = np.full(n, -1)
    used = params.n_bits * r
    out[:used] = np.arange(used) % params.n_bits
    return out


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def _spectrum(z: np.ndarray, params: SchemeParams) -> np.ndarray:
    """Centered spectrum of the watermark channel, flattened: (B, h*w)."""
    z = np.asarray(z, dtype=float)
    batch = z.reshape((-1,) + tuple(params.latent_shape))
    spec = dft2(batch)[..., params.channel]
    return spec.reshape(batch.shape[0], -1)


def tree_ring_statistic(z, key: WatermarkKey, params: SchemeParams = SchemeParams()) -> np.ndarray:
    """Band distance between the spectrum of ``z`` and the key pattern (per batch element)."""
    h, w, _ = params.latent_shape
    spec = _spectrum(z, params)
    diffs, observed = [], []
    for canonical, partner, vals in _band_values(key, params):
        idx, pattern = _band_pattern(h, w, canonical, partner, vals)
        diffs.append(spec[:, idx] - pattern)
        observed.append(spec[:, idx])
    d = np.abs(np.concatenate(diffs, axis=1))
    stat = d.mean(axis=1) if params.statistic == "l1" else (d**2).mean(axis=1)
    if params.normalize:
        # scale-free: a band shrunk towards zero reads as far from the key, not close to it
        power = np.mean(np.abs(np.concatenate(observed, axis=1)) ** 2, axis=1)
        rms = np.sqrt(power)
        scale = rms if params.statistic == "l1" else power
        with np.errstate(divide="ignore", invalid="ignore"):
            stat = np.where(scale > 0, stat / np.where(scale > 0, scale, 1.0), np.where(stat > 0, np.inf, 0.0))
    return stat


def ring_id_readout(z, params: SchemeParams = SchemeParams()) -> np.ndarray:
    """Per-ring mean real part of the spectrum: (B, rings)."""
    h, w, _ = params.latent_shape
    spec = _spectrum(z, params)
    out = []
    for a, b in params.ring_id_bands:
        idx = np.union1d(*ring_bins(h, w, a, b))
        out.append(spec[:, idx].real.mean(axis=1))
    return np.stack(out, axis=1)


def ring_id_decode(z, params: SchemeParams = SchemeParams()) -> np.ndarray:
    delta = ring_id_spacing(params)
    levels = np.rint(ring_id_readout(z, params) / delta)
    return np.clip(levels, 0, params.ring_id_alphabet - 1).astype(int)


def ring_id_errors(z, ring: KeyRing, params: SchemeParams = SchemeParams()) -> tuple[np.ndarray, np.ndarray]:
    """(min digit errors, argmin key index) per batch element."""
    if len(ring) == 0:
        raise InvalidInputError("empty KeyRing")
    digits = ring_id_decode(z, params)
    table = np.array([k.digits for k in ring])
    errors = (digits[:, None, :] != table[None, :, :]).sum(axis=2)
    best = errors.argmin(axis=1)
    return errors[np.arange(errors.shape[0]), best], best


def gs_decode_bits(z, params: SchemeParams = SchemeParams()) -> np.ndarray:
    """Majority vote over repeated elements (ties broken by the sign of the sum)."""
    z = np.asarray(z, dtype=float).reshape(-1, int(np.prod(params.latent_shape)))
    carried = _bit_of_element(params)
    m = carried >= 0
    votes = np.zeros((z.shape[0], params.n_bits))
    sums = np.zeros((z.shape[0], params.n_bits))
    np.add.at(votes.T, carried[m], (z[:, m] > 0).T.astype(float))
    np.add.at(sums.T, carried[m], z[:, m].T)
    r = params.bit_repetition
    bits = (votes > r / 2).astype(int)
    tie = votes == r / 2
    bits[tie] = (sums[tie] > 0).astype(int)
    return bits


def bit_accuracy(z, key: WatermarkKey, params: SchemeParams = SchemeParams()) -> np.ndarray:
    return (gs_decode_bits(z, params) == np.asarray(key.bits)[None, :]).mean(axis=1)


def _group_patterns(ring: KeyRing, params: SchemeParams) -> dict:
    h, w, _ = params.latent_shape
    canonical, partner = ring_bins(h, w, *params.wind_band)
    out = {}
    for k in ring:
        if k.group not in out:
            out[k.group] = _band_pattern(h, w, canonical, partner, _wind_pattern(params, k.pattern_seed))
    return out


def wind_match(z, ring: KeyRing, params: SchemeParams = SchemeParams()) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Two-stage search: group by band distance, then cosine against the group's noises.

    Returns (1 - max cosine, matched key index, matched group) per batch element.
    """
    if len(ring) == 0:
        raise InvalidInputError("empty KeyRing")
    z = np.asarray(z, dtype=float).reshape(-1, int(np.prod(params.latent_shape)))
    spec = _spectrum(z, params)
    patterns = _group_patterns(ring, params)
    groups = sorted(patterns)
    dists = np.stack([np.abs(spec[:, patterns[g][0]] - patterns[g][1]).mean(axis=1) for g in groups], axis=1)
    best_group = np.asarray(groups)[dists.argmin(axis=1)]
    noises = np.stack([wind_noise(k, params).ravel() for k in ring])
    noises /= np.linalg.norm(noises, axis=1, keepdims=True)
    cos = (z / np.linalg.norm(z, axis=1, keepdims=True)) @ noises.T
    key_groups = np.array([k.group for k in ring])
    cos = np.where(key_groups[None, :] == best_group[:, None], cos, -np.inf)
    idx = cos.argmax(axis=1)
    return 1.0 - cos[np.arange(z.shape[0]), idx], idx, best_group


def detection_statistic(scheme: str, z, keys: Union[WatermarkKey, KeyRing],
                        params: SchemeParams = SchemeParams()) -> tuple[np.ndarray, np.ndarray]:
    """(statistic, matched key index) per batch element; lower statistic = closer match
    (bit accuracy for gaussian_shading, where higher is closer)."""
    ring = keys if isinstance(keys, KeyRing) else KeyRing((keys,))
    if len(ring) == 0:
        raise InvalidInputError("empty KeyRing")
    batch = np.asarray(z, dtype=float).reshape((-1,) + tuple(params.latent_shape)).shape[0]
    if scheme == "tree_ring":
        stats = np.stack([tree_ring_statistic(z, k, params) for k in ring], axis=1)
        idx = stats.argmin(axis=1)
        return stats[np.arange(batch), idx], idx
    if scheme == "gaussian_shading":
        acc = np.stack([bit_accuracy(z, k, params) for k in ring], axis=1)
        idx = acc.argmax(axis=1)
        return acc[np.arange(batch), idx], idx
    if scheme == "ring_id":
        err, idx = ring_id_errors(z, ring, params)
        return err.astype(float), idx
    if scheme == "wind":
        stat, idx, _ = wind_match(z, ring, params)
        return stat, idx
    raise InvalidInputError(f"unknown scheme {scheme!r}")


# ---------------------------------------------------------------------------
# Detection reports and calibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectionReport:
    scheme: str
    statistic: float
    threshold: float
    decision: bool
    p_value: Optional[float] = None
    bit_accuracy: Optional[float] = None
    matched_key_id: Optional[str] = None

    def __post_init__(self):
        if (self.p_value is None) == (self.bit_accuracy is None):
            raise InvalidInputError("exactly one of p_value / bit_accuracy must be set")


@dataclass(frozen=True)
class Calibration:
    """Decision rule for one scheme and key set: a NullModel (p-value schemes) or a
    bit-accuracy threshold (gaussian_shading)."""

    scheme: str
    null: Optional[NullModel] = None
    threshold: Optional[float] = None
    level: float = P_VALUE_LEVEL

    def decide(self, stat: float) -> tuple[bool, Optional[float], float]:
        if self.scheme == "gaussian_shading":
            return bool(stat >= self.threshold), None, float(self.threshold)
        p = p_value(stat, self.null)
        return bool(p < self.level), p, float(self.level)


def detect(keys: Union[WatermarkKey, KeyRing], z_T_estimate, calibration: Calibration,
           params: SchemeParams = SchemeParams()) -> DetectionReport:
    """Match an estimated initial noise against the owner's key(s)."""
    ring = keys if isinstance(keys, KeyRing) else KeyRing((keys,))
    z = np.asarray(z_T_estimate, dtype=float)
    if z.shape != tuple(params.latent_shape):
        raise InvalidInputError(f"latent shape {z.shape} does not match {params.latent_shape}")
    scheme = calibration.scheme
    stats, idx = detection_statistic(scheme, z, ring, params)
    stat = float(stats[0])
    decision, p, threshold = calibration.decide(stat)
    key_id = ring.keys[int(idx[0])].key_id
    if scheme == "gaussian_shading":
        return DetectionReport(scheme, stat, threshold, decision, bit_accuracy=stat, matched_key_id=key_id)
    return DetectionReport(scheme, stat, threshold, decision, p_value=p, matched_key_id=key_id)


def detect_batch(keys, z_batch, calibration: Calibration, params: SchemeParams = SchemeParams()
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised detection: (statistic, p_value or bit accuracy, decision, matched index)."""
    ring = keys if isinstance(keys, KeyRing) else KeyRing((keys,))
    stats, idx = detection_statistic(calibration.scheme, z_batch, ring, params)
    if calibration.scheme == "gaussian_shading":
        return stats, stats, stats >= calibration.threshold, idx
    counts = np.searchsorted(calibration.null.samples, stats, side="right")
    p = (counts + 1) / (calibration.null.sample_count + 1)
    return stats, p, p < calibration.level, idx


def gs_threshold(n_bits: int, fpr: float) -> float:
    """Bit-accuracy threshold whose exact false-positive rate is <= fpr."""
    return binomial_threshold(n_bits, fpr) / n_bits


def null_latents(d: GmmDenoiser, s: NoiseSchedule, n: int, rng: SeededRng,
                 through: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> np.ndarray:
    """Inverted clean latents (no watermark): mixture samples, optionally routed
    through ``through`` (e.g. decode -> clamp -> encode) before inversion."""
    z0 = d.sample(rng, n)
    if through is not None:
        z0 = through(z0)
    return invert(z0, d, s)


def calibrate_threshold(scheme: str, fpr: float, n: int, rng: Optional[SeededRng] = None, *,
                        keys=None, null_z: Optional[np.ndarray] = None,
                        params: SchemeParams = SchemeParams()) -> tuple[float, Optional[NullModel]]:
    """Threshold tau at false-positive rate ``fpr``.

    gaussian_shading uses the exact binomial tail (tau is a bit accuracy);
    the other schemes take the ``fpr`` quantile of a NullModel built from
    ``null_z`` (pre-inverted null latents), returning (tau, null).
    """
    if not 0.0 < fpr < 1.0:
        raise InvalidInputError(f"fpr must lie in (0, 1), got {fpr}")
    if scheme == "gaussian_shading":
        return gs_threshold(params.n_bits, fpr), None
    if null_z is None or keys is None:
        raise InvalidInputError("p-value schemes need keys and null latents")
    if len(null_z) < 1000 or len(null_z) < n:
        raise InvalidInputError("need at least max(n, 1000) null latents")
    stats, _ = detection_statistic(scheme, null_z[:n], keys, params)
    null = NullModel(stats)
    # largest tau whose smoothed p-value stays below fpr: (#{null <= tau} + 1)/(n + 1) <= fpr
    k = int(math.floor(fpr * (null.sample_count + 1))) - 1
    tau = float(null.samples[k - 1]) if k >= 1 else -math.inf
    return tau, null


def in_watermark_region(z_0, keys, d: GmmDenoiser, s: NoiseSchedule, calibration: Calibration,
                        params: SchemeParams = SchemeParams()) -> bool:
    """Membership of a clean latent in the key's watermark region."""
    return detect(keys, invert(z_0, d, s), calibration, params).decision
