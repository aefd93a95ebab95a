"""Perturbation attacks against initial-noise watermarks.

Every attack optimises a pixel perturbation ``delta`` so that the attacker's
proxy encoder maps the perturbed image close to a target latent:

* ``forge``       target = proxy latent of a watermarked image, plus lam * ||delta||
* ``remove``      target = proxy latent of a guide image (mean / 0.5 / real), plus lam * ||delta||
* ``forge_pgd``   same distance, ||delta||_inf <= epsilon by projection
* ``forge_dct``   delta lives on the unmasked (high-frequency) DCT coefficients

The latent distance is smoothed as ``sqrt(||e||^2 + s^2) - s`` with
``s = learning_rate * ||W||^2``; this makes the fixed step a descent step so
loss traces are monotone. The ``lam * ||delta||`` term is handled by its
proximal map (block soft-thresholding), which equals the plain subgradient
step away from zero and keeps ``delta = 0`` exactly when the penalty wins.

All attacks take a single image ``(H, W, C)`` or a batch ``(B, H, W, C)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import InvalidInputError, SeededRng, dct2, idct2
from .diffusion import LinearEncoder, encode

GUIDE_MODES = ("watermarked_image", "mean_of_target", "fixed_half", "real_image")
FIXED_GUIDE_VALUE = 0.5
MONOTONE_WINDOW = 100
MONOTONE_TOL = 1e-6


class AttackDivergenceError(RuntimeError):
    """The attack loss became non-finite or increased beyond tolerance."""


@dataclass(frozen=True)
class AttackConfig:
    lam: float = 0.4
    learning_rate: float = 0.02
    iterations: int = 2000
    epsilon: Optional[float] = None
    alpha: Optional[float] = None
    guide_mode: str = "watermarked_image"
    sign_gradient: bool = False
    debug: bool = False       # assert the l_inf budget inside the loop
    seed: int = 0

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise InvalidInputError(f"lam must be finite and >= 0, got {self.lam}")
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be > 0")
        if self.iterations < 0:
            raise InvalidInputError("iterations must be >= 0")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise InvalidInputError("epsilon must be >= 0")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise InvalidInputError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.guide_mode not in GUIDE_MODES:
            raise InvalidInputError(f"unknown guide_mode {self.guide_mode!r}")


@dataclass
class AttackResult:
    adversarial_image: np.ndarray
    delta: np.ndarray
    loss_trace: np.ndarray            # (iterations,) or (B, iterations)
    latent_distance_trace: np.ndarray
    delta_l2_trace: np.ndarray
    final_latent_distance: np.ndarray
    final_delta_l2: np.ndarray
    coefficients: Optional[np.ndarray] = None   # DCT attack: DCT(x_c) + m * delta

    def write_trace_csv(self, path, index: int = 0) -> None:
        """Loss trace as CSV: iteration, total_loss, latent_distance, delta_l2."""
        loss, dist, dl2 = (np.atleast_2d(a)[index] for a in
                           (self.loss_trace, self.latent_distance_trace, self.delta_l2_trace))
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["iteration", "total_loss", "latent_distance", "delta_l2"])
            for i in range(loss.size):
                out.writerow([i + 1, repr(float(loss[i])), repr(float(dist[i])), repr(float(dl2[i]))])


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _as_batch(x, shape, name: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.shape == tuple(shape):
        return x[None], True
    if x.ndim == 4 and x.shape[1:] == tuple(shape):
        return x, False
    raise InvalidInputError(f"{name} shape {x.shape} does not match {tuple(shape)}")


def _check_range(x: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(x)) or x.min() < 0.0 or x.max() > 1.0:
        raise InvalidInputError(f"{name} values must lie in [0, 1]")


def _smoothing(enc: LinearEncoder, lr: float) -> float:
    return lr * enc.spectral_norm ** 2


def _check_trace(trace: np.ndarray, it: int) -> None:
    """Abort on a non-finite loss or on an increase across a full window."""
    if not np.all(np.isfinite(trace[:, it])):
        raise AttackDivergenceError(f"non-finite loss at iteration {it + 1}")
    if it >= MONOTONE_WINDOW:
        prev = trace[:, it - MONOTONE_WINDOW]
        rise = trace[:, it] - prev
        if np.any(rise > MONOTONE_TOL * np.maximum(1.0, np.abs(prev))):
            raise AttackDivergenceError(
                f"loss increased by {rise.max():.3e} over iterations {it - MONOTONE_WINDOW + 1}..{it + 1}")


def _emit(x: np.ndarray, delta: np.ndarray, traces, single: bool, coefficients=None) -> AttackResult:
    loss, dist, dl2 = traces
    adv = np.clip(x + delta, 0.0, 1.0)
    final_dist = dist[:, -1] if dist.shape[1] else np.full(x.shape[0], np.nan)
    final_l2 = np.linalg.norm(delta.reshape(x.shape[0], -1), axis=1)
    pick = (lambda a: a[0]) if single else (lambda a: a)
    return AttackResult(pick(adv), pick(delta), pick(loss), pick(dist), pick(dl2),
                        pick(final_dist), pick(final_l2),
                        None if coefficients is None else pick(coefficients))


def _penalised_descent(x: np.ndarray, target: np.ndarray, enc: LinearEncoder, cfg: AttackConfig):
    """min_delta  h(E(x + delta) - target) + lam * ||delta||  by proximal gradient.

    Iterates stay in the encoder's row space (delta = a @ W), so the loop runs
    on the small Gram matrix; this is the same sequence of iterates as the
    pixel-space update.
    """
    w = enc.weight
    gram = w @ w.T
    eta, lam = cfg.learning_rate, cfg.lam
    s = _smoothing(enc, eta)
    b = x.shape[0]
    r = encode(enc, x).reshape(b, -1) - target.reshape(b, -1)
    a = np.zeros_like(r)
    iters = cfg.iterations
    loss, dist, dl2 = (np.zeros((b, iters)) for _ in range(3))
    for it in range(iters):
        err = a @ gram + r
        norm_e = np.sqrt(np.sum(err**2, axis=1, keepdims=True) + s * s)
        a = a - eta * err / norm_e
        norm_d = np.sqrt(np.maximum(np.sum(a * (a @ gram), axis=1, keepdims=True), 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            shrink = np.where(norm_d > 0, np.maximum(0.0, 1.0 - eta * lam / norm_d), 0.0)
        a = a * shrink
        norm_d = norm_d * shrink
        err = a @ gram + r
        e2 = np.sum(err**2, axis=1)
        dist[:, it] = np.sqrt(e2)
        dl2[:, it] = norm_d[:, 0]
        loss[:, it] = np.sqrt(e2 + s * s) - s + lam * norm_d[:, 0]
        _check_trace(loss, it)
    return (a @ w).reshape(x.shape), (loss, dist, dl2)


# ---------------------------------------------------------------------------
# penalised attacks
# ---------------------------------------------------------------------------

def forge(x_c, x_w, enc: LinearEncoder, cfg: AttackConfig = AttackConfig()) -> AttackResult:
    """Push a clean image towards the proxy latent of a watermarked image."""
    xc, single = _as_batch(x_c, enc.pixel_shape, "x_c")
    xw, _ = _as_batch(x_w, enc.pixel_shape, "x_w")
    if xw.shape != xc.shape:
        raise InvalidInputError("x_c and x_w must have the same shape")
    _check_range(xc, "x_c")
    _check_range(xw, "x_w")
    delta, traces = _penalised_descent(xc, encode(enc, xw), enc, cfg)
    return _emit(xc, delta, traces, single)


def guide_image(x_w: np.ndarray, mode: str, guide=None) -> np.ndarray:
    """Removal guide per mode; ``x_w`` is a batch."""
    if mode == "mean_of_target":
        return np.broadcast_to(x_w.mean(axis=(1, 2, 3), keepdims=True), x_w.shape).copy()
    if mode == "fixed_half":
        return np.full_like(x_w, FIXED_GUIDE_VALUE)
    if mode == "real_image":
        g = np.asarray(guide, dtype=float)
        g = np.broadcast_to(g, x_w.shape) if g.shape == x_w.shape[1:] else g
        if g.shape != x_w.shape:
            raise InvalidInputError(f"guide shape {g.shape} does not match {x_w.shape}")
        _check_range(g, "guide")
        return g
    raise InvalidInputError(f"guide_mode {mode!r} is not a removal guide")


def remove(x_w, enc: LinearEncoder, cfg: AttackConfig, guide=None) -> AttackResult:
    """Pull a watermarked image towards the proxy latent of a watermark-free guide."""
    xw, single = _as_batch(x_w, enc.pixel_shape, "x_w")
    _check_range(xw, "x_w")
    if (guide is not None) != (cfg.guide_mode == "real_image"):
        raise InvalidInputError("a guide image is required exactly when guide_mode = real_image")
    target = encode(enc, guide_image(xw, cfg.guide_mode, guide))
    delta, traces = _penalised_descent(xw, target, enc, cfg)
    return _emit(xw, delta, traces, single)


# ---------------------------------------------------------------------------
# budget-constrained attacks
# ---------------------------------------------------------------------------

def _budget(cfg: AttackConfig) -> float:
    if cfg.epsilon is None or not cfg.epsilon > 0:
        raise InvalidInputError(f"epsilon must be > 0, got {cfg.epsilon}")
    return float(cfg.epsilon)


def _projected_descent(x: np.ndarray, target: np.ndarray, enc: LinearEncoder, cfg: AttackConfig,
                       to_pixels, to_coeffs, mask):
    """min_v  h(E(x + to_pixels(mask * v)) - target)  s.t. ||v||_inf <= epsilon."""
    eps = _budget(cfg)
    eta = cfg.learning_rate
    s = _smoothing(enc, eta)
    w = enc.weight
    b = x.shape[0]
    tgt = target.reshape(b, -1)
    base = encode(enc, x).reshape(b, -1) - tgt
    v = np.zeros_like(x)
    err = base.copy()
    iters = cfg.iterations
    loss, dist, dl2 = (np.zeros((b, iters)) for _ in range(3))
    for it in range(iters):
        g_pix = (err / np.sqrt(np.sum(err**2, axis=1, keepdims=True) + s * s)) @ w
        grad = mask * to_coeffs(g_pix.reshape(x.shape))
        step = np.sign(grad) if cfg.sign_gradient else grad
        v = np.clip(v - eta * step, -eps, eps)
        if cfg.debug and np.max(np.abs(v)) > eps:
            raise AssertionError(f"budget violated at iteration {it + 1}")
        delta = to_pixels(mask * v)
        err = base + delta.reshape(b, -1) @ w.T
        e2 = np.sum(err**2, axis=1)
        dist[:, it] = np.sqrt(e2)
        dl2[:, it] = np.linalg.norm(delta.reshape(b, -1), axis=1)
        loss[:, it] = np.sqrt(e2 + s * s) - s
        if not cfg.sign_gradient:
            _check_trace(loss, it)
        elif not np.all(np.isfinite(loss[:, it])):
            raise AttackDivergenceError(f"non-finite loss at iteration {it + 1}")
    return v, (loss, dist, dl2)


def forge_pgd(x_c, x_w, enc: LinearEncoder, cfg: AttackConfig) -> AttackResult:
    """Forgery under an l_inf budget, by projected gradient descent."""
    _budget(cfg)
    xc, single = _as_batch(x_c, enc.pixel_shape, "x_c")
    xw, _ = _as_batch(x_w, enc.pixel_shape, "x_w")
    if xw.shape != xc.shape:
        raise InvalidInputError("x_c and x_w must have the same shape")
    _check_range(xc, "x_c")
    _check_range(xw, "x_w")
    ident = lambda a: a  # noqa: E731
    delta, traces = _projected_descent(xc, encode(enc, xw), enc, cfg, ident, ident, 1.0)
    return _emit(xc, delta, traces, single)


def build_frequency_mask(n: int, alpha: float) -> np.ndarray:
    """Binary N x N mask: 0 on the low-frequency triangle i + j < floor(N - alpha * N)."""
    if n < 2:
        raise InvalidInputError(f"N must be >= 2, got {n}")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1], got {alpha}")
    bound = math.floor(n * (1.0 - alpha) + 1e-9)  # guards e.g. 10 * 0.7 = 6.999...
    i, j = np.indices((n, n))
    return (i + j >= bound).astype(float)


def forge_dct(x_c, x_w, enc: LinearEncoder, cfg: AttackConfig) -> AttackResult:
    """Forgery restricted to unmasked DCT coefficients, under an l_inf budget on them.

    ``coefficients`` in the result is ``DCT(x_c) + m * delta``; its masked
    entries are bit-identical to ``DCT(x_c)``.
    """
    _budget(cfg)
    if cfg.alpha is None:
        raise InvalidInputError("forge_dct requires alpha")
    xc, single = _as_batch(x_c, enc.pixel_shape, "x_c")
    xw, _ = _as_batch(x_w, enc.pixel_shape, "x_w")
    h, w_, c = enc.pixel_shape
    if h != w_:
        raise InvalidInputError(f"forge_dct needs square images, got {h}x{w_}")
    if xw.shape != xc.shape:
        raise InvalidInputError("x_c and x_w must have the same shape")
    _check_range(xc, "x_c")
    _check_range(xw, "x_w")
    mask = build_frequency_mask(h, cfg.alpha)[None, :, :, None]
    v, traces = _projected_descent(xc, encode(enc, xw), enc, cfg, idct2, dct2, mask)
    coeffs = dct2(xc) + mask * v
    delta = idct2(mask * v)
    return _emit(xc, delta, traces, single, coefficients=coeffs)


# ---------------------------------------------------------------------------
# latent-direction experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Hyperplane:
    normal: np.ndarray
    offset: float
    train_accuracy: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise InvalidInputError("hyperplane normal must have unit norm")
        object.__setattr__(self, "normal", n)

    def signed_distance(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        flat = z.reshape(-1, self.normal.size) if z.size != self.normal.size else z.reshape(1, -1)
        out = flat @ self.normal.ravel() + self.offset
        return out if z.size != self.normal.size else float(out[0])


def fit_linear_svm(latents, labels, rng: Optional[SeededRng] = None, *, reg: float = 1e-3,
                   iterations: int = 2000, step: float = 0.5) -> Hyperplane:
    """Soft-margin linear SVM by full-batch subgradient descent on the hinge loss.

    Objective ``reg/2 ||w||^2 + mean(max(0, 1 - y (w.z + b)))`` with step
    ``step / sqrt(k)``; the iterate with the lowest objective is returned.
    Full-batch updates make the fit independent of ``rng`` and exactly
    antisymmetric under a label flip.
    """
    z = np.asarray(latents, dtype=float)
    z = z.reshape(z.shape[0], -1)
    y = np.asarray(labels, dtype=float).ravel()
    if y.size != z.shape[0]:
        raise InvalidInputError("one label per latent required")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidInputError("labels must be +1 / -1")
    if np.all(y == y[0]):
        raise InvalidInputError("both classes must be present")
    n, dim = z.shape
    w, b = np.zeros(dim), 0.0
    best = (math.inf, w, b)
    for k in range(1, iterations + 1):
        margin = y * (z @ w + b)
        active = margin < 1.0
        obj = 0.5 * reg * w @ w + np.mean(np.maximum(0.0, 1.0 - margin))
        if obj < best[0]:
            best = (obj, w.copy(), b)
        gw = reg * w - (y[active] @ z[active]) / n
        gb = -np.sum(y[active]) / n
        eta = step / math.sqrt(k)
        w = w - eta * gw
        b = b - eta * gb
    _, w, b = best
    norm = np.linalg.norm(w)
    if norm == 0:
        raise InvalidInputError("SVM did not move from zero; data may be degenerate")
    acc = float(np.mean(np.sign(z @ w + b) == y))
    return Hyperplane(w / norm, float(b / norm), acc)


def traverse(z, h: Hyperplane, s: float) -> np.ndarray:
    """Move a latent (or batch) by ``s`` along the hyperplane normal."""
    z = np.asarray(z, dtype=float)
    if z.size % h.normal.size:
        raise InvalidInputError("latent dimension does not match the hyperplane")
    return z + s * h.normal.reshape(z.shape[-3:] if z.ndim >= 3 else z.shape[-1:])
