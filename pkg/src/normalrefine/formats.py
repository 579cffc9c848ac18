"""PFM, 16-bit PNG depth and intrinsics text files, plus the RGB normal preview."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image

from .grid import DEPTH, CameraIntrinsics, DepthGrid, NormalMap


class PfmParseError(ValueError):
    """Malformed PFM data; ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ImageFormatError(ValueError):
    pass


_WS = b" \t\r\n"


def _token(buf: bytes, pos: int):
    """Next whitespace-delimited token and the offset just past it."""
    while pos < len(buf) and buf[pos] in _WS:
        pos += 1
    start = pos
    while pos < len(buf) and buf[pos] not in _WS:
        pos += 1
    return buf[start:pos], start, pos


def parse_pfm(buf: bytes):
    """Decode PFM bytes to a float32 array ``(H, W)`` or ``(H, W, 3)``, top row first."""
    if len(buf) < 2 or buf[0:1] != b"P":
        raise PfmParseError("missing 'P' magic", 0)
    if buf[1:2] == b"f":
        channels = 1
    elif buf[1:2] == b"F":
        channels = 3
    else:
        raise PfmParseError(f"unsupported PFM type {buf[1:2]!r}", 1)
    pos = 2
    if pos >= len(buf) or buf[pos] not in _WS:
        raise PfmParseError("expected whitespace after magic", pos)

    dims = []
    for what in ("width", "height"):
        tok, start, pos = _token(buf, pos)
        if not tok.isdigit() or int(tok) == 0:
            raise PfmParseError(f"bad {what} {tok!r}", start)
        dims.append(int(tok))
    tok, start, pos = _token(buf, pos)
    try:
        scale = float(tok)
    except ValueError:
        raise PfmParseError(f"bad scale {tok!r}", start) from None
    if scale == 0 or not np.isfinite(scale):
        raise PfmParseError(f"scale must be finite and non-zero, got {tok!r}", start)
    if pos >= len(buf) or buf[pos] not in _WS:
        raise PfmParseError("expected a single whitespace byte after scale", pos)
    pos += 1

    w, h = dims
    need = w * h * channels * 4
    if len(buf) - pos < need:
        raise PfmParseError(f"truncated payload: need {need} bytes, have {len(buf) - pos}", len(buf))
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(buf, dtype=dtype, count=w * h * channels, offset=pos)
    shape = (h, w) if channels == 1 else (h, w, 3)
    # rows are stored bottom to top
    return data.reshape(shape)[::-1].astype(np.float32)


def read_pfm(path):
    """Load a PFM as a :class:`DepthGrid` (``Pf``) or :class:`NormalMap` (``PF``).

    Negative, zero and non-finite depth is masked.  Normal pixels are valid
    when finite and non-zero.
    """
    arr = parse_pfm(Path(path).read_bytes())
    if arr.ndim == 2:
        vals = arr.astype(np.float64)
        mask = np.isfinite(vals) & (vals > 0)
        return DepthGrid(np.where(mask, vals, np.nan), mask, DEPTH)
    n = arr.astype(np.float64)
    mask = np.all(np.isfinite(n), axis=-1) & np.any(n != 0, axis=-1)
    return NormalMap(np.where(mask[..., None], n, 0.0), mask)


def encode_pfm(obj) -> bytes:
    if isinstance(obj, NormalMap):
        data = np.where(obj.mask[..., None], obj.normals, np.nan)
        magic = b"PF"
    elif isinstance(obj, DepthGrid):
        data = np.where(obj.mask, obj.values, np.nan)
        magic = b"Pf"
    else:
        raise TypeError(f"cannot write {type(obj).__name__} as PFM")
    h, w = data.shape[:2]
    header = magic + f"\n{w} {h}\n-1.0\n".encode("ascii")
    return header + np.ascontiguousarray(data[::-1], dtype="<f4").tobytes()


def write_pfm(obj, path):
    """Write little-endian PFM; masked pixels become NaN."""
    path = Path(path)
    try:
        path.write_bytes(encode_pfm(obj))
    except OSError as exc:
        raise OSError(f"cannot write PFM {path}: {exc.strerror or exc}") from exc


def read_depth_png16(path, scale: float = 0.001) -> DepthGrid:
    """16-bit single-channel PNG to depth; raw value 0 marks a missing reading."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    with Image.open(path) as img:
        if img.mode not in ("I;16", "I;16B", "I;16L", "I"):
            raise ImageFormatError(f"{path}: expected 16-bit single-channel PNG, got mode {img.mode}")
        raw = np.array(img)
    if raw.ndim != 2:
        raise ImageFormatError(f"{path}: expected one channel, got shape {raw.shape}")
    if raw.dtype != np.uint16:
        # mode "I" is 32-bit; accept it only when it fits in 16 bits
        if raw.min() < 0 or raw.max() > 65535:
            raise ImageFormatError(f"{path}: values outside the 16-bit range")
    raw = raw.astype(np.float64)
    mask = raw > 0
    return DepthGrid(np.where(mask, raw * scale, np.nan), mask, DEPTH)


def write_depth_png16(grid: DepthGrid, path, scale: float = 0.001):
    raw = np.where(grid.mask, np.rint(np.where(grid.mask, grid.values, 0) / scale), 0)
    if raw.max() > 65535:
        raise ValueError("depth does not fit in 16 bits at this scale")
    Image.fromarray(raw.astype(np.uint16)).save(path)


def read_intrinsics(path) -> CameraIntrinsics:
    text = Path(path).read_text()
    parts = text.split()
    if len(parts) != 4:
        raise ValueError(f"{path}: expected 4 numbers 'fu fv cu cv', found {len(parts)}")
    try:
        fu, fv, cu, cv = (float(x) for x in parts)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return CameraIntrinsics(fu, fv, cu, cv)


def write_intrinsics(k: CameraIntrinsics, path):
    Path(path).write_text(f"{k.fu!r} {k.fv!r} {k.cu!r} {k.cv!r}\n")


def normal_to_rgb(nmap: NormalMap) -> np.ndarray:
    """``uint8`` image with ``round(255 (c + 1) / 2)`` per channel, black where masked."""
    # floor(x + 0.5) rounds halves up, so 127.5 maps to 128
    rgb = np.floor(255.0 * (np.clip(nmap.normals, -1.0, 1.0) + 1.0) / 2.0 + 0.5)
    rgb[~nmap.mask] = 0
    return rgb.astype(np.uint8)


def write_rgb(nmap: NormalMap, path):
    Image.fromarray(normal_to_rgb(nmap), mode="RGB").save(path)


def load_depth(path, png_scale: float = 0.001) -> DepthGrid:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pfm":
        obj = read_pfm(path)
        if not isinstance(obj, DepthGrid):
            raise ImageFormatError(f"{path}: expected a 1-channel depth PFM")
        return obj
    if suffix == ".png":
        return read_depth_png16(path, png_scale)
    raise ImageFormatError(f"{path}: unsupported depth format {suffix!r} (use .pfm or .png)")


_SAFE = re.compile(r"[^A-Za-z0-9_.=-]+")


def safe_stem(text: str) -> str:
    """File-name friendly version of a scene or run label."""
    return _SAFE.sub("_", text).strip("_") or "run"
