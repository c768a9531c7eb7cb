"""Dataset ingestion: binary PGM images, CIFAR-10 batches, patch streams.

Images are converted to float64 grayscale in [0, 1], resized to 40x40 with
bilinear interpolation, and split into four 20x20 quadrant patches that are
flattened row-major into length-400 vectors. Patch order is image-major,
quadrant-minor (TL, TR, BL, BR), so streams are reproducible.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GRID_SIDE = 40
PATCH_SIDE = 20
PATCH_LEN = PATCH_SIDE * PATCH_SIDE
PATCH_CACHE_MAGIC = b"PTCH"


class DataFormatError(Exception):
    """Base class for dataset parsing failures."""


class UnsupportedFormatError(DataFormatError):
    """File exists but is not in a supported format."""


class TruncatedDataError(DataFormatError):
    """Payload is shorter than its header declares."""


class InvalidHeaderError(DataFormatError):
    """Header fields are out of range (zero dimensions, bad maxval, ...)."""


@dataclass
class GrayImage:
    """Grayscale image, pixels row-major float64 in [0, 1]."""

    width: int
    height: int
    pixels: np.ndarray  # shape (height, width)


@dataclass
class PatchStream:
    """Ordered patch vectors plus their (image index, quadrant index) origins."""

    patches: list
    source_ids: list


def _next_pgm_int(data: bytes, pos: int):
    # whitespace-separated ASCII integer; '#' comments run to end of line
    n = len(data)
    while pos < n:
        c = data[pos]
        if c in b"#":
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
        elif c in b" \t\r\n\x0b\x0c":
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise TruncatedDataError("PGM header ended before all fields were read")
    return int(data[start:pos]), pos


def load_pgm(path) -> GrayImage:
    """Read a binary PGM (P5) file; pixels are scaled to [0, 1] by maxval."""
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise UnsupportedFormatError(f"not a binary PGM (P5) file: magic {data[:2]!r}")
    pos = 2
    width, pos = _next_pgm_int(data, pos)
    height, pos = _next_pgm_int(data, pos)
    maxval, pos = _next_pgm_int(data, pos)
    if width < 1 or height < 1:
        raise InvalidHeaderError(f"image dimensions must be positive, got {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise InvalidHeaderError(f"maxval must be in 1..65535, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    two_byte = maxval > 255
    need = width * height * (2 if two_byte else 1)
    raster = data[pos : pos + need]
    if len(raster) < need:
        raise TruncatedDataError(f"raster needs {need} bytes, file has {len(raster)}")
    samples = np.frombuffer(raster, dtype=">u2" if two_byte else np.uint8)
    pixels = samples.reshape(height, width).astype(np.float64) / maxval
    return GrayImage(width=width, height=height, pixels=pixels)


def write_pgm(path, gray_u8: np.ndarray) -> None:
    """Write a 2-D uint8 array as binary PGM (P5, maxval 255)."""
    arr = np.ascontiguousarray(gray_u8, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError("write_pgm expects a 2-D array")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def load_cifar10_batch(path) -> list:
    """Read a CIFAR-10 binary batch into grayscale images; labels discarded.

    Each 3073-byte record is 1 label byte plus 3x1024 channel bytes (32x32,
    row-major, R then G then B). Grayscale is 0.299 R + 0.587 G + 0.114 B
    on channels scaled to [0, 1].
    """
    raw = Path(path).read_bytes()
    if len(raw) % 3073 != 0:
        raise TruncatedDataError(
            f"CIFAR-10 batch length {len(raw)} is not a multiple of 3073"
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3073)
    images = []
    for rec in records:
        r = rec[1:1025].reshape(32, 32).astype(np.float64) / 255.0
        g = rec[1025:2049].reshape(32, 32).astype(np.float64) / 255.0
        b = rec[2049:3073].reshape(32, 32).astype(np.float64) / 255.0
        gray = 0.299 * r + 0.587 * g + 0.114 * b
        images.append(GrayImage(width=32, height=32, pixels=gray))
    return images


def _bilinear(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = pixels.shape
    # pixel-center convention: src = (dst + 0.5) * in/out - 0.5, clamped
    xs = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    ys = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = xs - x0
    fy = (ys - y0)[:, None]
    p00 = pixels[np.ix_(y0, x0)]
    p01 = pixels[np.ix_(y0, x1)]
    p10 = pixels[np.ix_(y1, x0)]
    p11 = pixels[np.ix_(y1, x1)]
    # lerp form keeps constant regions and the identity case exact
    top = p00 + fx * (p01 - p00)
    bot = p10 + fx * (p11 - p10)
    return np.clip(top + fy * (bot - top), 0.0, 1.0)


def resize_to_40(img: GrayImage) -> GrayImage:
    """Bilinear resize to 40x40 with pixel-center alignment."""
    if img.width < 1 or img.height < 1:
        raise ValueError("image must be non-empty")
    out = _bilinear(np.asarray(img.pixels, dtype=np.float64), GRID_SIDE, GRID_SIDE)
    return GrayImage(width=GRID_SIDE, height=GRID_SIDE, pixels=out)


def extract_patches(img: GrayImage) -> list:
    """Split a 40x40 image into four 20x20 quadrants (TL, TR, BL, BR).

    Each quadrant is flattened row-major into a length-400 vector.
    """
    if img.width != GRID_SIDE or img.height != GRID_SIDE:
        raise ValueError(f"extract_patches needs a 40x40 image, got {img.width}x{img.height}")
    p = np.asarray(img.pixels, dtype=np.float64)
    s = PATCH_SIDE
    return [
        p[:s, :s].flatten(),
        p[:s, s:].flatten(),
        p[s:, :s].flatten(),
        p[s:, s:].flatten(),
    ]


def assemble_patches(patches) -> np.ndarray:
    """Inverse of extract_patches: four length-400 vectors back to 40x40."""
    if len(patches) != 4:
        raise ValueError("assemble_patches needs exactly four patches")
    s = PATCH_SIDE
    out = np.empty((GRID_SIDE, GRID_SIDE))
    out[:s, :s] = np.asarray(patches[0]).reshape(s, s)
    out[:s, s:] = np.asarray(patches[1]).reshape(s, s)
    out[s:, :s] = np.asarray(patches[2]).reshape(s, s)
    out[s:, s:] = np.asarray(patches[3]).reshape(s, s)
    return out


def build_patch_stream(images) -> PatchStream:
    """Resize each image to 40x40 and emit its four patches, image-major."""
    patches = []
    ids = []
    for i, img in enumerate(images):
        for q, vec in enumerate(extract_patches(resize_to_40(img))):
            patches.append(vec)
            ids.append((i, q))
    return PatchStream(patches=patches, source_ids=ids)


def load_pgm_dir(path) -> list:
    """Load all *.pgm files in a directory, ordered by file name."""
    files = sorted(Path(path).glob("*.pgm"))
    if not files:
        raise DataFormatError(f"no .pgm files found in {path}")
    return [load_pgm(f) for f in files]


def write_patch_cache(path, patches) -> None:
    """Write patches to the binary cache: magic 'PTCH', u32 count, 400 f64 each."""
    with open(path, "wb") as fh:
        fh.write(PATCH_CACHE_MAGIC)
        fh.write(struct.pack("<I", len(patches)))
        for p in patches:
            vec = np.ascontiguousarray(p, dtype=np.float64)
            if vec.shape != (PATCH_LEN,):
                raise ValueError(f"patches must have length {PATCH_LEN}, got {vec.shape}")
            fh.write(vec.astype("<f8").tobytes())


def load_patch_cache(path) -> PatchStream:
    """Read a patch cache; source ids are synthesized as (i // 4, i % 4)."""
    raw = Path(path).read_bytes()
    if raw[:4] != PATCH_CACHE_MAGIC:
        raise UnsupportedFormatError(f"not a patch cache: magic {raw[:4]!r}")
    if len(raw) < 8:
        raise TruncatedDataError("patch cache header is incomplete")
    (count,) = struct.unpack("<I", raw[4:8])
    need = 8 + count * PATCH_LEN * 8
    if len(raw) < need:
        raise TruncatedDataError(f"patch cache needs {need} bytes, file has {len(raw)}")
    body = np.frombuffer(raw[8:need], dtype="<f8").reshape(count, PATCH_LEN)
    patches = [np.ascontiguousarray(body[i]) for i in range(count)]
    ids = [(i // 4, i % 4) for i in range(count)]
    return PatchStream(patches=patches, source_ids=ids)
