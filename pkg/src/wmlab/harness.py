"""Experiment orchestration: configuration, lab construction, dataset synthesis, sweeps.

A :class:`Lab` holds everything derived from an :class:`ExperimentConfig`
(denoiser, schedule, model and proxy encoders, key ring, detection
calibration). All of it is a deterministic function of the config, so a
config file plus its seed fully identifies an experiment.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import attacks as atk
from . import metrics
from .core import InvalidInputError, SeededRng
from .diffusion import (
    GmmDenoiser,
    LinearEncoder,
    NoiseSchedule,
    decode,
    encode,
    generate,
    invert,
    make_denoiser,
    make_encoder,
    make_proxy,
    make_schedule,
    to_image,
)
from .watermarks import (
    P_VALUE_LEVEL,
    SCHEMES,
    Calibration,
    KeyRing,
    SchemeParams,
    calibrate_threshold,
    detect_batch,
    embed,
    gs_threshold,
    make_key_ring,
)

ROLES = ("forgery", "removal")
METHODS = ("penalised", "pgd", "dct")
CSV_COLUMNS = ("trial", "role", "scheme", "lambda", "epsilon", "alpha", "decision_pre", "decision_post",
               "statistic", "p_value", "bit_accuracy", "l2", "linf", "psnr", "ssim", "wall_ms", "error")


def _sec(name: str, default, **kw):
    return field(default=default, metadata={"section": name}, **kw)


@dataclass(frozen=True)
class ExperimentConfig:
    """Every knob of an experiment; round-trips through :meth:`to_text` / :meth:`from_text`."""

    seed: int = _sec("experiment", 0)
    trial_count: int = _sec("experiment", 200)
    out_dir: str = _sec("experiment", "out")
    p_level: float = _sec("experiment", P_VALUE_LEVEL)
    gs_fpr: float = _sec("experiment", 1e-6)
    null_samples: int = _sec("experiment", 1000)
    procedural_fraction: float = _sec("experiment", 0.25)
    timing: bool = _sec("experiment", False)

    latent_shape: tuple = _sec("diffusion", (16, 16, 1))
    steps: int = _sec("diffusion", 50)
    beta_start: float = _sec("diffusion", 1e-4)
    beta_end: float = _sec("diffusion", 0.2)
    components: int = _sec("diffusion", 8)
    data_variance: float = _sec("diffusion", 0.3)
    mean_scale: float = _sec("diffusion", 0.5)
    mean_cutoff: float = _sec("diffusion", 0.08)
    simple_components: int = _sec("diffusion", 2)
    brightness_scale: float = _sec("diffusion", 0.0)

    pixel_shape: tuple = _sec("encoder", (64, 64, 3))
    condition_number: float = _sec("encoder", 4.0)
    proxy_rho: float = _sec("encoder", 0.1)

    scheme: str = _sec("scheme", "tree_ring")
    statistic: str = _sec("scheme", "l1")
    normalize: bool = _sec("scheme", True)
    tree_ring_bands: tuple = _sec("scheme", ((3.0, 4.0), (4.0, 5.0), (5.0, 6.0)))
    ring_id_bands: tuple = _sec("scheme", ((3.0, 4.0), (4.0, 5.0), (5.0, 6.0), (6.0, 7.0)))
    ring_id_keys: int = _sec("scheme", 8)
    n_bits: int = _sec("scheme", 256)
    wind_groups: int = _sec("scheme", 8)
    wind_band: tuple = _sec("scheme", (3.0, 6.0))
    wind_candidates: int = _sec("scheme", 16)

    role: str = _sec("attack", "forgery")
    method: str = _sec("attack", "penalised")
    lambdas: tuple = _sec("attack", (1.0, 0.4, 0.2))
    learning_rate: float = _sec("attack", 0.02)
    iterations: int = _sec("attack", 2000)
    epsilon: float = _sec("attack", 0.1)
    alpha: float = _sec("attack", 300 / 512)
    guide_mode: str = _sec("attack", "mean_of_target")
    sign_gradient: bool = _sec("attack", False)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidInputError(f"unknown scheme {self.scheme!r}")
        if self.role not in ROLES:
            raise InvalidInputError(f"role must be one of {ROLES}, got {self.role!r}")
        if self.method not in METHODS:
            raise InvalidInputError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.trial_count < 1:
            raise InvalidInputError("trial_count must be >= 1")
        if self.null_samples < 1000:
            raise InvalidInputError("null_samples must be >= 1000")
        if not 0.0 <= self.procedural_fraction <= 1.0:
            raise InvalidInputError("procedural_fraction must lie in [0, 1]")
        if not 0 <= self.simple_components <= self.components:
            raise InvalidInputError("simple_components must lie in [0, components]")
        if self.role == "removal" and self.method != "penalised":
            raise InvalidInputError("removal supports only the penalised method")
        if self.role == "removal" and self.guide_mode not in ("mean_of_target", "fixed_half"):
            raise InvalidInputError("sweep removal guide must be mean_of_target or fixed_half")
        if len(self.lambdas) < 1:
            raise InvalidInputError("at least one lambda is required")
        self.scheme_params()  # validates band geometry

    # -- text form ---------------------------------------------------------
    def to_text(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        for f in dataclasses.fields(self):
            sec = f.metadata["section"]
            if not parser.has_section(sec):
                parser.add_section(sec)
            parser.set(sec, f.name, _format_value(getattr(self, f.name)))
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise InvalidInputError(f"malformed config: {exc}") from None
        known = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for sec in parser.sections():
            for name, raw in parser.items(sec):
                if name not in known:
                    raise InvalidInputError(f"unknown config key [{sec}] {name}")
                if known[name].metadata["section"] != sec:
                    raise InvalidInputError(f"config key {name} belongs in [{known[name].metadata['section']}]")
                values[name] = _parse_value(raw, known[name].default, name)
        return cls(**values)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        p = Path(path)
        if not p.is_file():
            raise InvalidInputError(f"config file not found: {p}")
        return cls.from_text(p.read_text())

    def with_(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # -- derived -----------------------------------------------------------
    def scheme_params(self) -> SchemeParams:
        return SchemeParams(latent_shape=tuple(self.latent_shape), statistic=self.statistic,
                            normalize=self.normalize, tree_ring_bands=tuple(self.tree_ring_bands),
                            ring_id_bands=tuple(self.ring_id_bands), ring_id_keys=self.ring_id_keys,
                            n_bits=self.n_bits, wind_groups=self.wind_groups, wind_band=tuple(self.wind_band),
                            wind_candidates=self.wind_candidates)

    def attack_config(self, lam: Optional[float] = None) -> atk.AttackConfig:
        return atk.AttackConfig(lam=self.lambdas[0] if lam is None else lam, learning_rate=self.learning_rate,
                                iterations=self.iterations, epsilon=self.epsilon, alpha=self.alpha,
                                guide_mode=self.guide_mode, sign_gradient=self.sign_gradient, seed=self.seed)


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join(":".join(repr(float(x)) for x in pair) for pair in v)
        return ", ".join(repr(x) for x in v)
    return str(v)


def _parse_value(raw: str, default, name: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false"):
                raise ValueError(raw)
            return raw.lower() == "true"
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            if default and isinstance(default[0], tuple):
                return tuple(tuple(float(x) for x in p.split(":")) for p in parts)
            kind = type(default[0]) if default else float
            return tuple(kind(p) for p in parts)
        return raw
    except ValueError:
        raise InvalidInputError(f"bad value for {name}: {raw!r}") from None


# ---------------------------------------------------------------------------
# Lab
# ---------------------------------------------------------------------------

@dataclass
class Lab:
    cfg: ExperimentConfig
    params: SchemeParams
    denoiser: GmmDenoiser
    schedule: NoiseSchedule
    encoder: LinearEncoder
    proxy: LinearEncoder
    ring: KeyRing
    calibration: Calibration
    rng: SeededRng

    @classmethod
    def build(cls, cfg: ExperimentConfig, calibrate: bool = True) -> "Lab":
        rng = SeededRng(cfg.seed)
        params = cfg.scheme_params()
        d = make_denoiser(rng.child("denoiser"), tuple(cfg.latent_shape), cfg.components, cfg.data_variance,
                          cfg.mean_scale, cfg.mean_cutoff, cfg.simple_components,
                          cfg.brightness_scale)
        s = make_schedule(cfg.steps, cfg.beta_start, cfg.beta_end)
        enc = make_encoder(rng.child("encoder"), tuple(cfg.pixel_shape), tuple(cfg.latent_shape),
                           cfg.condition_number)
        proxy = make_proxy(enc, cfg.proxy_rho, rng.child("proxy"))
        ring = make_key_ring(cfg.scheme, rng.child("keys", cfg.scheme), params)
        lab = cls(cfg, params, d, s, enc, proxy, ring, Calibration(cfg.scheme, threshold=0.0), rng)
        if calibrate:
            lab.calibration = lab.calibrate(ring)
        return lab

    # -- pipeline pieces -----------------------------------------------------
    def roundtrip(self, z0: np.ndarray) -> np.ndarray:
        """Clean latent -> emitted image -> model encoder."""
        return encode(self.encoder, to_image(decode(self.encoder, z0)))

    def null_latents(self, n: int, label: str = "null") -> np.ndarray:
        z0 = self.denoiser.sample(self.rng.child(label), n)
        return invert(self.roundtrip(z0), self.denoiser, self.schedule)

    def calibrate(self, ring: KeyRing, n: Optional[int] = None) -> Calibration:
        cfg = self.cfg
        if cfg.scheme == "gaussian_shading":
            return Calibration(cfg.scheme, threshold=gs_threshold(self.params.n_bits, cfg.gs_fpr), level=cfg.p_level)
        n = n or cfg.null_samples
        _, null = calibrate_threshold(cfg.scheme, cfg.p_level, n, keys=ring,
                                      null_z=self.null_latents(n), params=self.params)
        return Calibration(cfg.scheme, null=null, level=cfg.p_level)

    def invert_images(self, x: np.ndarray) -> np.ndarray:
        return invert(encode(self.encoder, x), self.denoiser, self.schedule)

    def detect_images(self, x: np.ndarray, target: Optional[np.ndarray] = None):
        """(statistic, p_value or bit accuracy, decision, matched index) per image.

        With ``target`` (key indices), a decision only counts when the
        matched key is the target key.
        """
        stats, score, dec, idx = detect_batch(self.ring, self.invert_images(np.asarray(x)), self.calibration,
                                              self.params)
        if target is not None:
            dec = dec & (idx == np.asarray(target))
        return stats, score, dec, idx


# ---------------------------------------------------------------------------
# Dataset synthesis
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    watermarked: np.ndarray      # (n, H, W, C)
    key_index: np.ndarray        # key used for each watermarked image
    prompts: np.ndarray          # mixture component per watermarked image
    clean: np.ndarray            # (n, H, W, C)
    clean_kind: tuple            # "mixture" or a texture name per clean image


def procedural_texture(rng: SeededRng, shape) -> tuple[np.ndarray, str]:
    """Gradient, checkerboard or stripe image with random colours, inside [0.1, 0.9]."""
    h, w, c = shape
    kind = ("gradient", "checkerboard", "stripes")[int(rng.integers(0, 3))]
    lo, hi = rng.uniform(0.1, 0.9, size=c), rng.uniform(0.1, 0.9, size=c)
    yy, xx = np.mgrid[0:h, 0:w] / max(h - 1, 1)
    if kind == "gradient":
        theta = rng.uniform(0, 2 * np.pi)
        t = np.cos(theta) * xx + np.sin(theta) * yy
        t = (t - t.min()) / max(t.max() - t.min(), 1e-12)
    elif kind == "checkerboard":
        period = int(rng.integers(4, 17))
        t = ((np.arange(h)[:, None] // period + np.arange(w)[None, :] // period) % 2).astype(float)
    else:
        period = int(rng.integers(3, 13))
        t = ((np.arange(w)[None, :] // period) % 2 * np.ones((h, 1))).astype(float)
    img = lo[None, None, :] + (hi - lo)[None, None, :] * t[..., None]
    return img, kind


def synth_dataset(lab: Lab, n: Optional[int] = None, simple_only: Optional[bool] = None) -> Dataset:
    """Watermarked images from seeded prompts and clean images (mixture samples plus textures).

    Forgery experiments take their watermarked references from the simple
    prompts by default.
    """
    cfg = lab.cfg
    n = cfg.trial_count if n is None else n
    if n < 1:
        raise InvalidInputError("dataset size must be >= 1")
    simple_only = (cfg.role == "forgery") if simple_only is None else simple_only
    rng = lab.rng.child("dataset")
    pool = np.array(lab.denoiser.simple if simple_only and lab.denoiser.simple else range(cfg.components))
    prompts = pool[rng.child("prompts").integers(0, pool.size, n)]
    key_index = np.arange(n) % len(lab.ring)
    z_T = np.stack([embed(lab.ring.keys[k], rng.child("wm", i), lab.params) for i, k in enumerate(key_index)])
    x_w = to_image(decode(lab.encoder, generate(z_T, list(prompts), lab.denoiser, lab.schedule)))

    z_c = lab.denoiser.sample(rng.child("clean"), n)
    x_c = to_image(decode(lab.encoder, z_c))
    kinds = ["mixture"] * n
    n_tex = int(round(cfg.procedural_fraction * n))
    tex_slots = np.linspace(0, n, n_tex, endpoint=False).astype(int) if n_tex else []
    for i in tex_slots:
        x_c[i], kinds[i] = procedural_texture(rng.child("texture", int(i)), tuple(cfg.pixel_shape))
    return Dataset(x_w, key_index, prompts, x_c, tuple(kinds))


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass
class TrialRecord:
    trial: int
    role: str
    scheme: str
    lam: Optional[float]
    epsilon: Optional[float]
    alpha: Optional[float]
    decision_pre: bool
    decision_post: bool
    statistic: float
    p_value: Optional[float]
    bit_accuracy: Optional[float]
    report: Optional[metrics.MetricReport]
    wall_ms: Optional[float] = None
    error: str = ""

    @property
    def success(self) -> bool:
        return self.decision_post if self.role == "forgery" else not self.decision_post


def run_attack(lab: Lab, method: str, role: str, sources: np.ndarray, targets: Optional[np.ndarray],
               acfg: atk.AttackConfig) -> atk.AttackResult:
    if role == "removal":
        return atk.remove(sources, lab.proxy, acfg)
    if method == "penalised":
        return atk.forge(sources, targets, lab.proxy, acfg)
    if method == "pgd":
        return atk.forge_pgd(sources, targets, lab.proxy, acfg)
    return atk.forge_dct(sources, targets, lab.proxy, acfg)


def _attack_isolated(lab: Lab, method, role, sources, targets, acfg):
    """Batched attack; on failure, retry image by image so one bad trial cannot sink the rest."""
    try:
        res = run_attack(lab, method, role, sources, targets, acfg)
        return res.adversarial_image, [""] * len(sources)
    except Exception:
        advs, errors = [], []
        for i in range(len(sources)):
            try:
                res = run_attack(lab, method, role, sources[i], None if targets is None else targets[i], acfg)
                advs.append(res.adversarial_image)
                errors.append("")
            except Exception as exc:  # recorded per row, the sweep continues
                advs.append(sources[i])
                errors.append(f"{type(exc).__name__}: {exc}".replace("\n", " "))
        return np.stack(advs), errors


def sweep_records(lab: Lab, values: Sequence[float], data: Optional[Dataset] = None) -> list[TrialRecord]:
    """One attempt per pair for every sweep value (lambda, or epsilon for pgd/dct)."""
    cfg = lab.cfg
    if len(values) < 1:
        raise InvalidInputError("at least one sweep value is required")
    data = data or synth_dataset(lab)
    n = len(data.clean)
    if cfg.role == "forgery":
        sources, targets, target_idx = data.clean, data.watermarked, data.key_index
    else:
        sources, targets, target_idx = data.watermarked, None, None
    stat0, score0, dec0, _ = lab.detect_images(sources, target_idx)
    records = []
    for v in values:
        if cfg.method == "penalised":
            acfg = dataclasses.replace(cfg.attack_config(v))
            lam, eps, alpha = float(v), None, None
        else:
            acfg = dataclasses.replace(cfg.attack_config(), epsilon=float(v))
            lam, eps = None, float(v)
            alpha = cfg.alpha if cfg.method == "dct" else None
        t0 = time.perf_counter()
        adv, errors = _attack_isolated(lab, cfg.method, cfg.role, sources, targets, acfg)
        per_trial_ms = 1000.0 * (time.perf_counter() - t0) / n
        stat, score, dec, _ = lab.detect_images(adv, target_idx)
        for i in range(n):
            gs = cfg.scheme == "gaussian_shading"
            records.append(TrialRecord(
                trial=i, role=cfg.role, scheme=cfg.scheme, lam=lam, epsilon=eps, alpha=alpha,
                decision_pre=bool(dec0[i]), decision_post=bool(dec[i]), statistic=float(stat[i]),
                p_value=None if gs else float(score[i]), bit_accuracy=float(score[i]) if gs else None,
                report=metrics.report(adv[i], sources[i]),
                wall_ms=per_trial_ms if cfg.timing else None, error=errors[i]))
    return records


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def aggregate(records: Sequence[TrialRecord]) -> list[dict]:
    """One summary per sweep value: ASR, pre-attack success rate, mean metrics, error count."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.lam, r.epsilon, r.alpha), []).append(r)
    out = []
    for (lam, eps, alpha), rs in groups.items():
        ok = [r for r in rs if not r.error]
        mean = (lambda xs: float(np.mean(xs)) if xs else None)
        pre = [r.decision_pre if r.role == "forgery" else not r.decision_pre for r in ok]
        out.append(dict(role=rs[0].role, scheme=rs[0].scheme, lam=lam, epsilon=eps, alpha=alpha, trials=len(rs),
                        asr=mean([r.success for r in ok]), pre_rate=mean(pre),
                        detect_pre=mean([r.decision_pre for r in ok]), detect_post=mean([r.decision_post for r in ok]),
                        l2=mean([r.report.l2 for r in ok]), linf=mean([r.report.linf for r in ok]),
                        psnr=mean([r.report.psnr for r in ok]), ssim=mean([r.report.ssim for r in ok]),
                        wall_ms=mean([r.wall_ms for r in ok]) if ok and ok[0].wall_ms is not None else None,
                        errors=len(rs) - len(ok)))
    return out


def records_to_csv(records: Sequence[TrialRecord], timing: bool = False) -> str:
    """Trial rows (sorted by sweep value order, then trial id) followed by one aggregate row per value.

    Aggregate rows carry ``trial = aggregate``; their decision columns hold
    the fraction of true decisions and ``error`` holds the count of failed
    trials. ``wall_ms`` is present only when timing is enabled, because
    timings would break byte-identical reruns.
    """
    cols = [c for c in CSV_COLUMNS if timing or c != "wall_ms"]
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(cols)
    order = {}
    for r in records:
        order.setdefault((r.lam, r.epsilon, r.alpha), len(order))
    rows = sorted(records, key=lambda r: (order[(r.lam, r.epsilon, r.alpha)], r.trial))
    for r in rows:
        m = r.report
        vals = dict(trial=r.trial, role=r.role, scheme=r.scheme, **{"lambda": r.lam}, epsilon=r.epsilon,
                    alpha=r.alpha, decision_pre=r.decision_pre, decision_post=r.decision_post,
                    statistic=r.statistic, p_value=r.p_value, bit_accuracy=r.bit_accuracy,
                    l2=m.l2 if m else None, linf=m.linf if m else None, psnr=m.psnr if m else None,
                    ssim=m.ssim if m else None, wall_ms=r.wall_ms, error=r.error)
        out.writerow([_fmt(vals[c]) for c in cols])
    for a in aggregate(records):
        vals = {"trial": "aggregate", "role": a["role"], "scheme": a["scheme"], "lambda": a["lam"],
                "epsilon": a["epsilon"], "alpha": a["alpha"], "decision_pre": a["detect_pre"],
                "decision_post": a["detect_post"], "statistic": None, "p_value": None, "bit_accuracy": None,
                "l2": a["l2"], "linf": a["linf"], "psnr": a["psnr"], "ssim": a["ssim"], "wall_ms": a["wall_ms"],
                "error": a["errors"]}
        out.writerow([_fmt(vals[c]) for c in cols])
    return buf.getvalue()


SUMMARY_COLUMNS = ("role", "scheme", "lambda", "epsilon", "alpha", "trials", "asr", "pre_rate",
                   "l2", "linf", "psnr", "ssim", "errors")


def summary_to_csv(records: Sequence[TrialRecord]) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(SUMMARY_COLUMNS)
    for a in aggregate(records):
        a = dict(a, **{"lambda": a["lam"]})
        out.writerow([_fmt(a[c]) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def run_sweep(cfg: ExperimentConfig, values: Optional[Sequence[float]] = None, lab: Optional[Lab] = None,
              data: Optional[Dataset] = None) -> str:
    """Full sweep; returns the trial CSV text (lambda values for penalised attacks, epsilons otherwise)."""
    lab = lab or Lab.build(cfg)
    if values is None:
        values = cfg.lambdas if cfg.method == "penalised" else (cfg.epsilon,)
    return records_to_csv(sweep_records(lab, values, data), cfg.timing)


# ---------------------------------------------------------------------------
# Latent-direction experiment
# ---------------------------------------------------------------------------

@dataclass
class SvmExperiment:
    hyperplane: atk.Hyperplane
    steps: np.ndarray
    detection_rate: np.ndarray


def svm_experiment(lab: Lab, n_train: int = 1000, n_traverse: int = 50, n_steps: int = 11) -> SvmExperiment:
    """Fit a hyperplane between watermarked and clean latents, then walk clean latents along its normal.

    The walk spans the gap between the two classes' median signed distances.
    """
    rng = lab.rng.child("svm")
    key_index = np.arange(n_train) % len(lab.ring)
    prompts = rng.child("prompts").integers(0, lab.cfg.components, n_train)
    z_T = np.stack([embed(lab.ring.keys[k], rng.child("wm", i), lab.params) for i, k in enumerate(key_index)])
    z_w = lab.roundtrip(generate(z_T, list(prompts), lab.denoiser, lab.schedule))
    z_c = lab.roundtrip(lab.denoiser.sample(rng.child("clean"), n_train))
    h = atk.fit_linear_svm(np.concatenate([z_w, z_c]), np.r_[np.ones(n_train), -np.ones(n_train)], rng)
    gap = float(np.median(h.signed_distance(z_w)) - np.median(h.signed_distance(z_c)))
    steps = np.linspace(0.0, max(gap, 0.0), n_steps)
    base = lab.roundtrip(lab.denoiser.sample(rng.child("traverse"), n_traverse))
    rates = []
    for s in steps:
        z = lab.roundtrip(atk.traverse(base, h, float(s)))
        _, _, dec, _ = detect_batch(lab.ring, invert(z, lab.denoiser, lab.schedule), lab.calibration, lab.params)
        rates.append(float(np.mean(dec)))
    return SvmExperiment(h, steps, np.asarray(rates))
