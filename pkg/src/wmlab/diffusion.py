"""Closed-form latent diffusion surrogate.

The noise predictor is the exact posterior-mean denoiser of an isotropic
Gaussian mixture, so generation and inversion are deterministic and
analytically checkable. A linear encoder/decoder pair stands in for the VAE.

Latents are ``(h, w, c)`` arrays; every function also accepts a leading batch
axis ``(B, h, w, c)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import fft as sp_fft

from .core import InvalidInputError, SeededRng, check_grid

PromptLike = Union[None, int, Sequence[Optional[int]], np.ndarray]


class DegenerateStepError(InvalidInputError):
    """Noise prediction requested at a step where alpha_bar == 1."""


# ---------------------------------------------------------------------------
# Schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray        # beta_1..beta_T
    alpha_bars: np.ndarray   # alpha_bar_0..alpha_bar_T, alpha_bar_0 = 1

    @property
    def steps(self) -> int:
        return int(self.betas.size)

    @classmethod
    def from_betas(cls, betas) -> "NoiseSchedule":
        """Build from an explicit beta sequence; zeros are allowed (identity steps)."""
        betas = np.asarray(betas, dtype=float)
        if betas.ndim != 1 or betas.size < 1:
            raise InvalidInputError("betas must be a non-empty 1-D sequence")
        if np.any(betas < 0) or np.any(betas >= 1):
            raise InvalidInputError("betas must lie in [0, 1)")
        alpha_bars = np.ones(betas.size + 1)
        for i, b in enumerate(betas):
            alpha_bars[i + 1] = alpha_bars[i] * (1.0 - b)
        return cls(betas, alpha_bars)


def make_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linear beta schedule with running-product alpha bars."""
    if T < 2:
        raise InvalidInputError(f"T must be >= 2, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise InvalidInputError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    return NoiseSchedule.from_betas(np.linspace(beta_start, beta_end, T))


# ---------------------------------------------------------------------------
# Gaussian-mixture denoiser
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GmmDenoiser:
    """Mixture of N(mu_i, data_variance * I) over latent grids."""

    means: np.ndarray          # (K, h, w, c)
    weights: np.ndarray        # (K,)
    data_variance: float
    simple: tuple = ()         # component indices flagged as "simple prompts"

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if means.ndim != 4 or means.shape[0] < 2:
            raise InvalidInputError("need at least two mixture components of shape (h, w, c)")
        if weights.shape != (means.shape[0],) or np.any(weights < 0):
            raise InvalidInputError("weights must be a non-negative vector, one per component")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidInputError(f"weights must sum to 1, got {weights.sum()!r}")
        if self.data_variance < 0:
            raise InvalidInputError("data_variance must be non-negative")
        flat = means.reshape(means.shape[0], -1)
        gaps = np.linalg.norm(flat[:, None] - flat[None], axis=-1) + np.eye(len(flat))
        if np.any(gaps == 0):
            raise InvalidInputError("mixture means must be pairwise distinct")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", weights)

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        return tuple(self.means.shape[1:])

    @property
    def n_components(self) -> int:
        return int(self.means.shape[0])

    def sample(self, rng: SeededRng, n: Optional[int] = None, component: Optional[int] = None) -> np.ndarray:
        """Draw clean latents z_0 directly from the mixture."""
        count = 1 if n is None else n
        if component is None:
            comps = rng.generator.choice(self.n_components, size=count, p=self.weights)
        else:
            comps = np.full(count, component)
        z = self.means[comps] + np.sqrt(self.data_variance) * rng.normal((count,) + self.latent_shape)
        return z[0] if n is None else z


def make_denoiser(
    rng: SeededRng,
    latent_shape: tuple[int, int, int] = (16, 16, 1),
    n_components: int = 8,
    data_variance: float = 0.3,
    mean_scale: float = 0.5,
    cutoff: float = 0.08,
    n_simple: int = 2,
    brightness_scale: float = 0.0,
) -> GmmDenoiser:
    """Mixture whose means are low-pass random fields.

    The first ``n_simple`` components use half the cutoff frequency (less
    high-frequency content) and are flagged as simple prompts. Each mean
    also gets a constant offset drawn with std ``brightness_scale`` (the
    latent counterpart of overall image brightness).
    """
    h, w, c = latent_shape
    fy = np.fft.fftfreq(h)[:, None, None]
    fx = np.fft.fftfreq(w)[None, :, None]
    radius = np.sqrt(fy**2 + fx**2)
    means = []
    for i in range(n_components):
        cut = cutoff * (0.5 if i < n_simple else 1.0)
        noise = rng.child("mean", i).normal(latent_shape)
        spec = np.fft.fft2(noise, axes=(0, 1)) * np.exp(-0.5 * (radius / cut) ** 2)
        field = np.fft.ifft2(spec, axes=(0, 1)).real
        field -= field.mean()
        means.append(mean_scale * field / field.std())
    if brightness_scale > 0:
        offsets = brightness_scale * rng.child("brightness").normal(n_components)
        means = [m + o for m, o in zip(means, offsets)]
    weights = np.full(n_components, 1.0 / n_components)
    return GmmDenoiser(np.stack(means), weights, data_variance, tuple(range(n_simple)))


def _prompt_mask(prompt: PromptLike, batch: int, k: int) -> Optional[np.ndarray]:
    """Boolean (batch, k) mask of allowed components, or None for all-empty prompts."""
    if prompt is None:
        return None
    if np.isscalar(prompt):
        prompts = np.full(batch, int(prompt))
    else:
        prompts = np.array([-1 if p is None else int(p) for p in prompt])
        if prompts.shape != (batch,):
            raise InvalidInputError(f"need one prompt per batch element, got {prompts.shape}")
    if np.any(prompts >= k) or np.any(prompts < -1):
        raise InvalidInputError(f"prompt component out of range [0, {k})")
    mask = np.ones((batch, k), dtype=bool)
    chosen = prompts >= 0
    mask[chosen] = False
    mask[np.nonzero(chosen)[0], prompts[chosen]] = True
    return mask


def _flatten(z: np.ndarray, shape: tuple) -> tuple[np.ndarray, bool]:
    if z.shape == shape:
        return z.reshape(1, -1), True
    if z.ndim == 4 and z.shape[1:] == shape:
        return z.reshape(z.shape[0], -1), False
    raise InvalidInputError(f"latent shape {z.shape} does not match {shape}")


def posterior_mean(d: GmmDenoiser, z_t, alpha_bar: float, prompt: PromptLike = None) -> np.ndarray:
    """E[z_0 | z_t] under the (prompt-restricted) mixture."""
    z = check_grid(z_t, "z_t").astype(float)
    flat, single = _flatten(z, d.latent_shape)
    mu = d.means.reshape(d.n_components, -1)
    a = float(alpha_bar)
    s2 = d.data_variance
    var_t = 1.0 - a + a * s2
    # log N(z; sqrt(a) mu_i, var_t I) up to a shared constant
    sq = (
        np.sum(flat**2, axis=1)[:, None]
        - 2.0 * np.sqrt(a) * flat @ mu.T
        + a * np.sum(mu**2, axis=1)[None, :]
    )
    with np.errstate(divide="ignore"):
        logits = np.log(d.weights)[None, :] - 0.5 * sq / var_t
    mask = _prompt_mask(prompt, flat.shape[0], d.n_components)
    if mask is not None:
        logits = np.where(mask, logits, -np.inf)
    logits -= logits.max(axis=1, keepdims=True)
    resp = np.exp(logits)
    resp /= resp.sum(axis=1, keepdims=True)
    mu_bar = resp @ mu
    gain = s2 * np.sqrt(a) / var_t
    z0 = mu_bar + gain * (flat - np.sqrt(a) * mu_bar)
    return z0.reshape(z.shape)


def predict_eps(d: GmmDenoiser, z_t, t: int, s: NoiseSchedule, p: PromptLike = None) -> np.ndarray:
    """Noise prediction implied by the exact posterior mean at step ``t``."""
    if not 1 <= t <= s.steps:
        raise InvalidInputError(f"step t={t} outside [1, {s.steps}]")
    a = float(s.alpha_bars[t])
    if a >= 1.0:
        raise DegenerateStepError(f"alpha_bar[{t}] == 1: noise is undefined")
    z = np.asarray(z_t, dtype=float)
    z0 = posterior_mean(d, z, a, p)
    return (z - np.sqrt(a) * z0) / np.sqrt(1.0 - a)


# ---------------------------------------------------------------------------
# DDIM
# ---------------------------------------------------------------------------

def ddim_denoise_step(z_t, t: int, eps, s: NoiseSchedule) -> np.ndarray:
    """z_t -> z_{t-1} (deterministic DDIM, x0-parameterised)."""
    if not 1 <= t <= s.steps:
        raise InvalidInputError(f"step t={t} outside [1, {s.steps}]")
    a_t, a_prev = s.alpha_bars[t], s.alpha_bars[t - 1]
    z_t = np.asarray(z_t, dtype=float)
    eps = np.asarray(eps, dtype=float)
    z0 = (z_t - np.sqrt(1.0 - a_t) * eps) / np.sqrt(a_t)
    return np.sqrt(a_prev) * z0 + np.sqrt(1.0 - a_prev) * eps


def ddim_invert_step(z_t, t: int, eps, s: NoiseSchedule) -> np.ndarray:
    """z_t -> z_{t+1}; the algebraic inverse of ``ddim_denoise_step(., t+1, eps)``."""
    if not 0 <= t <= s.steps - 1:
        raise InvalidInputError(f"step t={t} outside [0, {s.steps - 1}]")
    a_t, a_next = s.alpha_bars[t], s.alpha_bars[t + 1]
    z_t = np.asarray(z_t, dtype=float)
    eps = np.asarray(eps, dtype=float)
    z0 = (z_t - np.sqrt(1.0 - a_t) * eps) / np.sqrt(a_t)
    return np.sqrt(a_next) * z0 + np.sqrt(1.0 - a_next) * eps


def generate(z_T, p: PromptLike, d: GmmDenoiser, s: NoiseSchedule) -> np.ndarray:
    """Run DDIM sampling from t=T down to 0."""
    z = check_grid(z_T, "z_T").astype(float)
    _flatten(z, d.latent_shape)
    for t in range(s.steps, 0, -1):
        if s.alpha_bars[t] >= 1.0:
            continue  # identity step: z_{t-1} = z_t whatever eps is
        eps = predict_eps(d, z, t, s, p)
        z = ddim_denoise_step(z, t, eps, s)
    return z


def invert(z_0, d: GmmDenoiser, s: NoiseSchedule) -> np.ndarray:
    """Empty-prompt DDIM inversion from t=0 up to T.

    The step t -> t+1 evaluates the noise at the current latent with the
    next step's noise level, i.e. ``predict_eps(z_t, t+1)``.
    """
    z = check_grid(z_0, "z_0").astype(float)
    _flatten(z, d.latent_shape)
    for t in range(0, s.steps):
        if s.alpha_bars[t + 1] >= 1.0:
            continue
        eps = predict_eps(d, z, t + 1, s, None)
        z = ddim_invert_step(z, t, eps, s)
    return z


# ---------------------------------------------------------------------------
# Linear encoder / decoder
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearEncoder:
    """Affine map pixels -> latents with a pseudo-inverse decoder."""

    weight: np.ndarray        # (n_latent, n_pixel)
    bias: np.ndarray          # (n_latent,)
    decoder: np.ndarray       # (n_pixel, n_latent)
    pixel_shape: tuple
    latent_shape: tuple

    @property
    def condition_number(self) -> float:
        s = np.linalg.svd(self.weight, compute_uv=False)
        return float(s[0] / s[-1])

    @property
    def spectral_norm(self) -> float:
        return float(np.linalg.norm(self.weight, 2))


def _unit_rows(w: np.ndarray) -> np.ndarray:
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def _from_weight(weight: np.ndarray, bias: np.ndarray, pixel_shape, latent_shape) -> LinearEncoder:
    return LinearEncoder(weight, bias, np.linalg.pinv(weight), tuple(pixel_shape), tuple(latent_shape))


def latent_frequency_basis(latent_shape: tuple[int, int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal 2-D DCT basis of the latent space (columns) and each column's radial frequency."""
    h, w, c = latent_shape
    basis_h = sp_fft.idct(np.eye(h), type=2, norm="ortho", axis=0)  # column p = p-th cosine
    basis_w = sp_fft.idct(np.eye(w), type=2, norm="ortho", axis=0)
    cols, radii = [], []
    for p in range(h):
        for q in range(w):
            plane = np.outer(basis_h[:, p], basis_w[:, q])
            for ch in range(c):
                vec = np.zeros((h, w, c))
                vec[:, :, ch] = plane
                cols.append(vec.ravel())
                radii.append(np.hypot(p / h, q / w))
    return np.stack(cols, axis=1), np.asarray(radii)


def make_encoder(
    rng: SeededRng,
    pixel_shape: tuple[int, int, int] = (64, 64, 3),
    latent_shape: tuple[int, int, int] = (16, 16, 1),
    condition_number: float = 4.0,
) -> LinearEncoder:
    """Random encoder with unit-norm rows whose gain falls with latent frequency.

    Latent cosine modes are ranked by radial frequency and receive
    log-spaced singular values from ``condition_number`` down to 1 (then
    rescaled to unit mean square): low-frequency latent content is cheap to
    change in pixel space, high-frequency content is expensive. Each mode is
    tied to a random pixel pattern; the latent DC mode is tied to the
    constant image, so the pseudo-inverse decoder maps the zero latent back
    to mid-grey.
    """
    n_lat, n_pix = int(np.prod(latent_shape)), int(np.prod(pixel_shape))
    if n_lat > n_pix:
        raise InvalidInputError("latent dimension must not exceed pixel dimension")
    if condition_number < 1:
        raise InvalidInputError("condition_number must be >= 1")
    phi, radii = latent_frequency_basis(latent_shape)
    order = np.argsort(radii, kind="stable")
    phi = phi[:, order]
    gains = np.geomspace(condition_number, 1.0, n_lat)
    gains *= np.sqrt(n_lat / np.sum(gains**2))
    basis = rng.child("V").normal((n_pix, n_lat))
    basis[:, 0] = 1.0
    v, _ = np.linalg.qr(basis)
    v *= np.sign(v[0, 0])  # first column = +constant / sqrt(n_pix)
    a = _unit_rows(phi * gains)  # rows of W = a @ v.T have the norms of rows of a
    w = a @ v.T
    bias = -0.5 * w.sum(axis=1)
    return LinearEncoder(w, bias, v @ np.linalg.inv(a), tuple(pixel_shape), tuple(latent_shape))


def make_proxy(enc: LinearEncoder, rho: float, rng: SeededRng) -> LinearEncoder:
    """Attacker's encoder: the model encoder plus a Gaussian weight perturbation of relative size rho."""
    if rho < 0:
        raise InvalidInputError("rho must be non-negative")
    noise = rng.child("proxy").normal(enc.weight.shape)
    noise *= rho * np.linalg.norm(enc.weight) / np.linalg.norm(noise)
    w = _unit_rows(enc.weight + noise)
    return _from_weight(w, enc.bias.copy(), enc.pixel_shape, enc.latent_shape)


def _pixels_flat(e: LinearEncoder, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    shape = tuple(e.pixel_shape)
    if x.shape == shape:
        return x.reshape(1, -1), True
    if x.ndim == 4 and x.shape[1:] == shape:
        return x.reshape(x.shape[0], -1), False
    raise InvalidInputError(f"image shape {x.shape} does not match encoder input {shape}")


def _latents_flat(e: LinearEncoder, z) -> tuple[np.ndarray, bool]:
    z = np.asarray(z, dtype=float)
    shape = tuple(e.latent_shape)
    if z.shape == shape:
        return z.reshape(1, -1), True
    if z.ndim == 4 and z.shape[1:] == shape:
        return z.reshape(z.shape[0], -1), False
    raise InvalidInputError(f"latent shape {z.shape} does not match encoder output {shape}")


def encode(e: LinearEncoder, x) -> np.ndarray:
    flat, single = _pixels_flat(e, x)
    out = flat @ e.weight.T + e.bias
    return out.reshape(tuple(e.latent_shape)) if single else out.reshape((-1,) + tuple(e.latent_shape))


def decode(e: LinearEncoder, z) -> np.ndarray:
    """Pseudo-inverse of :func:`encode`; the result is not clipped to [0, 1]."""
    flat, single = _latents_flat(e, z)
    out = (flat - e.bias) @ e.decoder.T
    return out.reshape(tuple(e.pixel_shape)) if single else out.reshape((-1,) + tuple(e.pixel_shape))


def encode_pullback(e: LinearEncoder, residual) -> np.ndarray:
    """Adjoint of the encoder's linear part applied to a latent residual."""
    flat, single = _latents_flat(e, residual)
    out = flat @ e.weight
    return out.reshape(tuple(e.pixel_shape)) if single else out.reshape((-1,) + tuple(e.pixel_shape))


def to_image(x) -> np.ndarray:
    """Clamp to the [0, 1] pixel range."""
    return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
