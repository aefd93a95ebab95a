"""Command-line interface.

    wmlab [--config PATH] [--seed N] [--out DIR] <command> [options]

Commands: generate, attack, detect, calibrate, sweep, svm.
Exit status: 0 success, 1 invalid input, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import attacks as atk
from . import io as wio
from .core import InvalidInputError
from .harness import (
    ExperimentConfig,
    Lab,
    records_to_csv,
    summary_to_csv,
    svm_experiment,
    sweep_records,
    synth_dataset,
)
from .watermarks import KeyRing


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wmlab", description="Initial-noise watermark attack laboratory")
    p.add_argument("--config", help="experiment config file (key = value with [sections])")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    g = sub.add_parser("generate", help="synthesise watermarked and clean images")
    g.add_argument("--count", type=int, help="number of pairs (default: trial_count)")

    a = sub.add_parser("attack", help="run one attack on image files")
    a.add_argument("--role", choices=("forgery", "removal"), default=None)
    a.add_argument("--method", choices=("penalised", "pgd", "dct"), default=None)
    a.add_argument("--source", required=True, help="image to perturb (clean for forgery, watermarked for removal)")
    a.add_argument("--target", help="watermarked reference image (forgery)")
    a.add_argument("--guide", help="real guide image (removal with guide_mode real_image)")
    a.add_argument("--guide-mode", choices=atk.GUIDE_MODES[1:], default=None)
    a.add_argument("--lam", type=float)
    a.add_argument("--epsilon", type=float)
    a.add_argument("--alpha", type=float)
    a.add_argument("--iterations", type=int)

    d = sub.add_parser("detect", help="check an image against a key file")
    d.add_argument("--image", required=True)
    d.add_argument("--keys", help="key file (default: the config's key ring)")
    d.add_argument("--null", help="null-model file from `calibrate` (default: calibrate now)")

    c = sub.add_parser("calibrate", help="write the key ring and null model / threshold")
    c.add_argument("--samples", type=int, help="null samples (default: null_samples)")

    s = sub.add_parser("sweep", help="attack sweep over lambda (or epsilon) values")
    s.add_argument("--values", type=float, nargs="+", help="sweep values (default: config lambdas / epsilon)")

    v = sub.add_parser("svm", help="hyperplane fit plus traversal sweep")
    v.add_argument("--train", type=int, default=1000, help="latents per class")
    v.add_argument("--traverse", type=int, default=50, help="clean latents walked along the normal")
    v.add_argument("--steps", type=int, default=11)
    return p


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    return cfg.with_(**changes) if changes else cfg


def _out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_image(path, cfg: ExperimentConfig) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise InvalidInputError(f"image file not found: {p}")
    x = wio.read_any_image(p)
    if x.shape != tuple(cfg.pixel_shape):
        raise InvalidInputError(f"{p}: image shape {x.shape} does not match pixel_shape {tuple(cfg.pixel_shape)}")
    return x


def _save_image(out: Path, stem: str, x: np.ndarray) -> None:
    wio.write_image(out / f"{stem}.ppm" if x.shape[2] == 3 else out / f"{stem}.pgm", x)
    wio.write_float_image(out / f"{stem}.wmlz", x)


def cmd_generate(args, cfg) -> int:
    lab = Lab.build(cfg, calibrate=False)
    data = synth_dataset(lab, args.count)
    out = _out(cfg)
    (out / "config.ini").write_text(cfg.to_text())
    wio.write_keys(out / "keys.txt", lab.ring)
    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "watermarked", "key_id", "prompt", "clean", "clean_kind"])
        for i in range(len(data.watermarked)):
            _save_image(out, f"wm_{i:04d}", data.watermarked[i])
            _save_image(out, f"clean_{i:04d}", data.clean[i])
            w.writerow([i, f"wm_{i:04d}.wmlz", lab.ring.keys[data.key_index[i]].key_id, int(data.prompts[i]),
                        f"clean_{i:04d}.wmlz", data.clean_kind[i]])
    print(f"wrote {len(data.watermarked)} watermarked and clean images to {out}")
    return 0


def cmd_attack(args, cfg) -> int:
    changes = {k: v for k, v in dict(role=args.role, method=args.method, guide_mode=args.guide_mode,
                                      epsilon=args.epsilon, alpha=args.alpha, iterations=args.iterations).items()
               if v is not None}
    if args.guide is not None and args.guide_mode is None:
        changes["guide_mode"] = "real_image"
    if changes.get("guide_mode") == "real_image":
        cfg = dataclasses.replace(cfg, **{k: v for k, v in changes.items() if k != "guide_mode"})
    else:
        cfg = cfg.with_(**changes)
    acfg = cfg.attack_config(args.lam)
    if changes.get("guide_mode") == "real_image":
        acfg = dataclasses.replace(acfg, guide_mode="real_image")
    lab = Lab.build(cfg, calibrate=False)
    src = _load_image(args.source, cfg)
    if cfg.role == "forgery":
        if args.target is None:
            raise InvalidInputError("forgery needs --target")
        tgt = _load_image(args.target, cfg)
        fn = {"penalised": atk.forge, "pgd": atk.forge_pgd, "dct": atk.forge_dct}[cfg.method]
        res = fn(src, tgt, lab.proxy, acfg)
    else:
        guide = _load_image(args.guide, cfg) if args.guide else None
        res = atk.remove(src, lab.proxy, acfg, guide)
    out = _out(cfg)
    _save_image(out, "adversarial", res.adversarial_image)
    res.write_trace_csv(out / "loss_trace.csv")
    print(f"final_latent_distance={float(res.final_latent_distance):.6g} "
          f"final_delta_l2={float(res.final_delta_l2):.6g} out={out}")
    return 0


def cmd_detect(args, cfg) -> int:
    lab = Lab.build(cfg, calibrate=False)
    ring = lab.ring
    if args.keys:
        if not Path(args.keys).is_file():
            raise InvalidInputError(f"key file not found: {args.keys}")
        keys = wio.read_keys(args.keys)
        if not keys or any(k.scheme != cfg.scheme for k in keys):
            raise InvalidInputError(f"key file must hold {cfg.scheme} keys")
        ring = KeyRing(tuple(keys))
    lab.ring = ring
    if args.null and cfg.scheme != "gaussian_shading":
        if not Path(args.null).is_file():
            raise InvalidInputError(f"null-model file not found: {args.null}")
        from .watermarks import Calibration
        lab.calibration = Calibration(cfg.scheme, null=wio.read_null(args.null), level=cfg.p_level)
    else:
        lab.calibration = lab.calibrate(ring)
    x = _load_image(args.image, cfg)
    stat, score, dec, idx = lab.detect_images(x[None])
    kind = "bit_accuracy" if cfg.scheme == "gaussian_shading" else "p_value"
    print(f"decision={'true' if dec[0] else 'false'} {kind}={float(score[0]):.6g} "
          f"statistic={float(stat[0]):.6g} matched_key_id={ring.keys[int(idx[0])].key_id}")
    return 0


def cmd_calibrate(args, cfg) -> int:
    lab = Lab.build(cfg, calibrate=False)
    cal = lab.calibrate(lab.ring, args.samples)
    out = _out(cfg)
    wio.write_keys(out / "keys.txt", lab.ring)
    if cal.null is not None:
        wio.write_null(out / "null.wmnl", cal.null)
        k = int(np.floor(cfg.p_level * (cal.null.sample_count + 1))) - 1
        tau = float(cal.null.samples[k - 1]) if k >= 1 else float("-inf")
        print(f"scheme={cfg.scheme} null_samples={cal.null.sample_count} level={cfg.p_level} tau={tau:.6g}")
    else:
        print(f"scheme={cfg.scheme} bit_accuracy_threshold={cal.threshold:.6g} fpr={cfg.gs_fpr}")
    return 0


def cmd_sweep(args, cfg) -> int:
    lab = Lab.build(cfg)
    values = args.values or (cfg.lambdas if cfg.method == "penalised" else (cfg.epsilon,))
    records = sweep_records(lab, values)
    out = _out(cfg)
    (out / "sweep.csv").write_text(records_to_csv(records, cfg.timing))
    (out / "summary.csv").write_text(summary_to_csv(records))
    print(summary_to_csv(records), end="")
    return 0


def cmd_svm(args, cfg) -> int:
    lab = Lab.build(cfg)
    res = svm_experiment(lab, args.train, args.traverse, args.steps)
    out = _out(cfg)
    with open(out / "svm.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "detection_rate"])
        for s, r in zip(res.steps, res.detection_rate):
            w.writerow([repr(float(s)), repr(float(r))])
    print(f"train_accuracy={res.hyperplane.train_accuracy} offset={res.hyperplane.offset:.6g} out={out}")
    return 0


COMMANDS = {"generate": cmd_generate, "attack": cmd_attack, "detect": cmd_detect,
            "calibrate": cmd_calibrate, "sweep": cmd_sweep, "svm": cmd_svm}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "wmlab: error: a command is required")
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (InvalidInputError, FileNotFoundError) as exc:
        print(f"wmlab: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is a bug or an environment failure
        print(f"wmlab: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
