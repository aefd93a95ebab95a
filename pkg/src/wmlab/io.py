"""File formats: raw float latents ("WMLZ"), null models ("WMNL"), PPM/PGM images, key text."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import InvalidInputError, NullModel
from .watermarks import SCHEMES, WatermarkKey

LATENT_MAGIC = b"WMLZ"
NULL_MAGIC = b"WMNL"
KEY_VERSION = "wmkey-1"


# ---------------------------------------------------------------------------
# raw float grids
# ---------------------------------------------------------------------------

def write_latent(path, z) -> None:
    """16-byte header (magic, u32 h, w, c) then little-endian float32 values, row-major."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 3:
        raise InvalidInputError(f"expected (h, w, c), got {z.shape}")
    header = LATENT_MAGIC + struct.pack("<3I", *z.shape)
    Path(path).write_bytes(header + z.astype("<f4").tobytes())


def read_latent(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != LATENT_MAGIC:
        raise InvalidInputError(f"{path}: not a WMLZ latent file")
    h, w, c = struct.unpack("<3I", data[4:16])
    body = np.frombuffer(data[16:], dtype="<f4")
    if body.size != h * w * c:
        raise InvalidInputError(f"{path}: expected {h * w * c} values, found {body.size}")
    return body.astype(float).reshape(h, w, c)


def write_null(path, null: NullModel) -> None:
    """Null samples as magic "WMNL", u32 count, u32 0, u32 0, then float64 values."""
    header = NULL_MAGIC + struct.pack("<3I", null.sample_count, 0, 0)
    Path(path).write_bytes(header + null.samples.astype("<f8").tobytes())


def read_null(path) -> NullModel:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != NULL_MAGIC:
        raise InvalidInputError(f"{path}: not a WMNL null-model file")
    (n, _, _) = struct.unpack("<3I", data[4:16])
    body = np.frombuffer(data[16:], dtype="<f8")
    if body.size != n:
        raise InvalidInputError(f"{path}: expected {n} samples, found {body.size}")
    return NullModel(body.astype(float))


# ---------------------------------------------------------------------------
# 8-bit images
# ---------------------------------------------------------------------------

def write_image(path, x) -> None:
    """Binary PPM (3 channels) or PGM (1 channel), 8-bit; values clamped to [0, 1]."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[2] not in (1, 3):
        raise InvalidInputError(f"need (H, W, 1) or (H, W, 3), got {x.shape}")
    h, w, c = x.shape
    px = np.rint(np.clip(x, 0.0, 1.0) * 255.0).astype(np.uint8)
    magic = b"P6" if c == 3 else b"P5"
    Path(path).write_bytes(magic + f"\n{w} {h}\n255\n".encode() + px.tobytes())


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out, pos = [], 0
    while len(out) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InvalidInputError("truncated image header")
        out.append(data[start:pos])
    return out, pos + 1  # one whitespace byte ends the header


def read_image(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (magic, w, h, maxval), pos = _tokens(data, 4)
    if magic not in (b"P5", b"P6"):
        raise InvalidInputError(f"{path}: only binary PGM (P5) / PPM (P6) are supported")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise InvalidInputError(f"{path}: only 8-bit images are supported")
    c = 3 if magic == b"P6" else 1
    body = np.frombuffer(data[pos:pos + h * w * c], dtype=np.uint8)
    if body.size != h * w * c:
        raise InvalidInputError(f"{path}: truncated pixel data")
    return body.reshape(h, w, c).astype(float) / 255.0


def write_float_image(path, x) -> None:
    """Lossless image storage in the raw float format."""
    write_latent(path, x)


def read_any_image(path) -> np.ndarray:
    """PPM/PGM or raw float image, chosen by the file's magic bytes."""
    head = Path(path).read_bytes()[:4]
    return read_latent(path) if head == LATENT_MAGIC else read_image(path)


# ---------------------------------------------------------------------------
# keys
# ---------------------------------------------------------------------------

def _payload(key: WatermarkKey) -> bytes:
    if key.scheme == "tree_ring":
        return np.array([[v.real, v.imag] for v in key.values], dtype="<f8").tobytes()
    if key.scheme == "ring_id":
        return bytes(key.digits)
    if key.scheme == "gaussian_shading":
        return np.packbits(np.asarray(key.bits, dtype=np.uint8)).tobytes() + struct.pack("<I", len(key.bits))
    return struct.pack("<IQQ", key.group, key.pattern_seed, key.noise_seed)


def key_to_text(key: WatermarkKey) -> str:
    return (f"version={KEY_VERSION}; scheme={key.scheme}; id={key.key_id}; seed={key.seed}; "
            f"payload_hex={_payload(key).hex()}")


def key_from_text(line: str) -> WatermarkKey:
    fields = {}
    for part in line.strip().split(";"):
        if "=" not in part:
            raise InvalidInputError(f"malformed key field {part!r}")
        k, v = part.split("=", 1)
        fields[k.strip()] = v.strip()
    if fields.get("version") != KEY_VERSION:
        raise InvalidInputError(f"unsupported key version {fields.get('version')!r}")
    scheme = fields.get("scheme")
    if scheme not in SCHEMES:
        raise InvalidInputError(f"unknown scheme {scheme!r}")
    try:
        raw = bytes.fromhex(fields["payload_hex"])
        key_id, seed = fields["id"], int(fields["seed"])
    except (KeyError, ValueError) as exc:
        raise InvalidInputError(f"malformed key line: {exc}") from None
    if scheme == "tree_ring":
        pairs = np.frombuffer(raw, dtype="<f8").reshape(-1, 2)
        return WatermarkKey(scheme, key_id, seed, values=tuple(complex(a, b) for a, b in pairs))
    if scheme == "ring_id":
        return WatermarkKey(scheme, key_id, seed, digits=tuple(raw))
    if scheme == "gaussian_shading":
        (n,) = struct.unpack("<I", raw[-4:])
        bits = np.unpackbits(np.frombuffer(raw[:-4], dtype=np.uint8))[:n]
        return WatermarkKey(scheme, key_id, seed, bits=tuple(int(b) for b in bits))
    group, pattern_seed, noise_seed = struct.unpack("<IQQ", raw)
    return WatermarkKey(scheme, key_id, seed, group=group, pattern_seed=pattern_seed, noise_seed=noise_seed)


def write_keys(path, keys) -> None:
    Path(path).write_text("".join(key_to_text(k) + "\n" for k in keys))


def read_keys(path) -> list[WatermarkKey]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    return [key_from_text(ln) for ln in lines]
