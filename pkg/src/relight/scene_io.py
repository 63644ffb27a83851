"""Scene maps, point lights, and their on-disk formats.

Float images travel as PFM (portable float map) files and live in memory as
float64 arrays; PFM is an IEEE-754 single-precision container, so file
round-trips are bit-exact for any float32-representable payload. Light sets
are JSON arrays serialized at full float precision. Preview output is plain
8-bit PNG.

All writes go through a temp-file-then-rename path so a crash can never
leave a torn file at the destination.
"""

from __future__ import annotations

import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, ValidationError

_NORMAL_RENORM_TOL = 1e-2  # reject normals whose length deviates more than this


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    """Write ``payload`` to ``path`` via a same-directory temp file + rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp_name = tempfile.mkstemp(dir=directory, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


@dataclass
class ImageF:
    """Floating-point image: (height, width, channels) float64 array.

    ``channels`` is 1 (grayscale / depth / mask) or 3 (color). Row 0 is the
    top row. Values are unbounded unless a caller-specific contract says
    otherwise; file loaders reject NaN/Inf.
    """

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ValidationError(f"channels must be 1 or 3, got {self.channels}")
        if self.width < 0 or self.height < 0:
            raise ValidationError(f"negative image dimensions {self.width}x{self.height}")
        arr = np.asarray(self.data, dtype=np.float64)
        expected = self.width * self.height * self.channels
        if arr.size != expected:
            raise ValidationError(
                f"data has {arr.size} values, expected {expected} "
                f"({self.width}x{self.height}x{self.channels})"
            )
        self.data = arr.reshape(self.height, self.width, self.channels)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageF":
        """Build from an (H, W) or (H, W, C) array."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValidationError(f"expected 2D or 3D array, got shape {arr.shape}")
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, data=arr)

    def validate(self) -> None:
        """Check the stricter contract required before writing to disk."""
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"zero-sized image {self.width}x{self.height}")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("image contains NaN or Inf values")

    def copy(self) -> "ImageF":
        return ImageF(self.width, self.height, self.channels, self.data.copy())

    def sample_bilinear(self, x: float, y: float) -> np.ndarray:
        """Sample at normalized coordinates with pixel centers at (i+0.5)/size.

        Coordinates are clamped to the pixel-center lattice, so queries at or
        beyond the border return border values. Returns a (channels,) array.
        """
        fx = min(max(x * self.width - 0.5, 0.0), self.width - 1.0)
        fy = min(max(y * self.height - 0.5, 0.0), self.height - 1.0)
        c0 = int(np.floor(fx))
        r0 = int(np.floor(fy))
        c1 = min(c0 + 1, self.width - 1)
        r1 = min(r0 + 1, self.height - 1)
        tx = fx - c0
        ty = fy - r0
        top = (1.0 - tx) * self.data[r0, c0] + tx * self.data[r0, c1]
        bot = (1.0 - tx) * self.data[r1, c0] + tx * self.data[r1, c1]
        return (1.0 - ty) * top + ty * bot


@dataclass
class PointLight:
    """One parametric point light.

    ``position`` = (x, y, z) with x, y in [0, 1] image-normalized coordinates
    (x right, y down, matching pixel centers at (col+0.5)/width) and z in
    [0, 1] depth units. ``ellipsoid_ratio`` scales only the y-component of
    the unnormalized light vector; ``diffuse_exponent`` is the falloff power
    applied to the Euclidean pixel-to-light distance.
    """

    color: tuple[float, float, float]
    position: tuple[float, float, float]
    intensity: float
    ellipsoid_ratio: float = 1.0
    diffuse_exponent: float = 1.0

    def __post_init__(self):
        self.color = _check_triple("color", self.color, 0.0, 1.0)
        self.position = _check_triple("position", self.position, 0.0, 1.0)
        self.intensity = float(self.intensity)
        self.ellipsoid_ratio = float(self.ellipsoid_ratio)
        self.diffuse_exponent = float(self.diffuse_exponent)
        if not (np.isfinite(self.intensity) and self.intensity >= 0.0):
            raise ValidationError(f"intensity must be >= 0, got {self.intensity}")
        if not (np.isfinite(self.ellipsoid_ratio) and self.ellipsoid_ratio > 0.0):
            raise ValidationError(f"ellipsoid_ratio must be > 0, got {self.ellipsoid_ratio}")
        if not (np.isfinite(self.diffuse_exponent) and self.diffuse_exponent > 0.0):
            raise ValidationError(f"diffuse_exponent must be > 0, got {self.diffuse_exponent}")


def _check_triple(name, value, lo, hi) -> tuple[float, float, float]:
    try:
        vals = tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} must be a 3-vector of numbers, got {value!r}") from exc
    if len(vals) != 3:
        raise ValidationError(f"{name} must have 3 components, got {len(vals)}")
    for v in vals:
        if not (np.isfinite(v) and lo <= v <= hi):
            raise ValidationError(f"{name} component {v} outside [{lo}, {hi}]")
    return vals


@dataclass
class SceneMaps:
    """Per-pixel albedo, unit surface normals, and normalized depth.

    Construction validates that all maps share one resolution, albedo and
    depth sit in [0, 1], and normal lengths deviate from 1 by less than 1e-2
    (they are renormalized to exactly unit length; detector outputs are only
    approximately unit).
    """

    albedo: ImageF
    normal: ImageF
    depth: ImageF
    width: int = field(init=False)
    height: int = field(init=False)

    def __post_init__(self):
        a, n, d = self.albedo, self.normal, self.depth
        if a.channels != 3 or n.channels != 3 or d.channels != 1:
            raise ValidationError("scene maps need 3ch albedo, 3ch normal, 1ch depth")
        if not (a.width == n.width == d.width and a.height == n.height == d.height):
            raise ValidationError(
                f"scene map dimensions differ: albedo {a.width}x{a.height}, "
                f"normal {n.width}x{n.height}, depth {d.width}x{d.height}"
            )
        if a.width < 1 or a.height < 1:
            raise ValidationError("scene maps must be at least 1x1")
        if not (np.all(a.data >= 0.0) and np.all(a.data <= 1.0)):
            raise ValidationError("albedo values must lie in [0, 1]")
        if not (np.all(d.data >= 0.0) and np.all(d.data <= 1.0)):
            raise ValidationError("depth values must lie in [0, 1]")
        lengths = np.sqrt(np.sum(n.data * n.data, axis=2))
        if not np.all(np.abs(lengths - 1.0) < _NORMAL_RENORM_TOL):
            worst = float(np.nanmax(np.abs(lengths - 1.0)))
            raise ValidationError(f"normal lengths deviate from 1 by up to {worst:.4g}")
        self.normal = ImageF(n.width, n.height, 3, n.data / lengths[:, :, None])
        self.width = a.width
        self.height = a.height


# --------------------------------------------------------------------------
# PFM float maps

def load_float_map(path: str | Path) -> ImageF:
    """Load a PFM file; rows are returned top-row-first.

    PFM stores rows bottom-to-top; the sign of the scale line selects the
    payload endianness (negative = little-endian).
    """
    raw = Path(path).read_bytes()
    magic, offset = _read_header_line(raw, 0)
    if magic == "PF":
        channels = 3
    elif magic == "Pf":
        channels = 1
    else:
        raise FormatError(f"{path}: not a PFM file (magic {magic!r})")
    dims, offset = _read_header_line(raw, offset)
    parts = dims.split()
    if len(parts) != 2:
        raise FormatError(f"{path}: bad dimensions line {dims!r}")
    try:
        width, height = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise FormatError(f"{path}: bad dimensions line {dims!r}") from exc
    if width < 1 or height < 1:
        raise FormatError(f"{path}: non-positive dimensions {width}x{height}")
    scale_line, offset = _read_header_line(raw, offset)
    try:
        scale = float(scale_line)
    except ValueError as exc:
        raise FormatError(f"{path}: bad scale line {scale_line!r}") from exc
    if scale == 0.0:
        raise FormatError(f"{path}: scale must be nonzero")
    payload = raw[offset:]
    expected = width * height * channels * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload has {len(payload)} bytes, expected {expected} "
            f"for {width}x{height}x{channels}"
        )
    dtype = "<f4" if scale < 0 else ">f4"
    arr = np.frombuffer(payload, dtype=dtype).reshape(height, width, channels)
    arr = np.flipud(arr).astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{path}: payload contains NaN or Inf")
    return ImageF(width, height, channels, arr)


def _read_header_line(raw: bytes, offset: int) -> tuple[str, int]:
    end = raw.find(b"\n", offset)
    if end < 0:
        raise FormatError("truncated PFM header")
    try:
        line = raw[offset:end].decode("ascii").strip()
    except UnicodeDecodeError as exc:
        raise FormatError("non-ASCII PFM header") from exc
    return line, end + 1


def save_float_map(img: ImageF, path: str | Path) -> None:
    """Write a little-endian PFM (scale -1.0), rows stored bottom-to-top."""
    img.validate()
    magic = "PF" if img.channels == 3 else "Pf"
    header = f"{magic}\n{img.width} {img.height}\n-1.0\n".encode("ascii")
    payload = np.flipud(img.data).astype("<f4").tobytes()
    atomic_write_bytes(path, header + payload)


# --------------------------------------------------------------------------
# PNG previews

def save_preview_png(img: ImageF, path: str | Path) -> None:
    """Write an 8-bit preview: clamp to [0, 1], scale by 255, round half-to-even."""
    img.validate()
    scaled = np.rint(np.clip(img.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    if img.channels == 1:
        pil = Image.fromarray(scaled[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(scaled, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


# --------------------------------------------------------------------------
# Light set JSON

_LIGHT_KEYS = ("color", "position", "intensity", "ellipsoid_ratio", "diffuse_exponent")


def save_lights(lights: list[PointLight], path: str | Path) -> None:
    """Write a JSON array of light records at full float precision."""
    records = [
        {
            "color": list(l.color),
            "position": list(l.position),
            "intensity": l.intensity,
            "ellipsoid_ratio": l.ellipsoid_ratio,
            "diffuse_exponent": l.diffuse_exponent,
        }
        for l in lights
    ]
    atomic_write_bytes(path, (json.dumps(records, indent=2) + "\n").encode("ascii"))


def load_lights(path: str | Path) -> list[PointLight]:
    try:
        parsed = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(parsed, list):
        raise ValidationError(f"{path}: expected a JSON array of light records")
    lights = []
    for i, rec in enumerate(parsed):
        if not isinstance(rec, dict):
            raise ValidationError(f"{path}: record {i} is not an object")
        missing = [k for k in _LIGHT_KEYS if k not in rec]
        if missing:
            raise ValidationError(f"{path}: record {i} missing keys {missing}")
        lights.append(
            PointLight(
                color=rec["color"],
                position=rec["position"],
                intensity=rec["intensity"],
                ellipsoid_ratio=rec["ellipsoid_ratio"],
                diffuse_exponent=rec["diffuse_exponent"],
            )
        )
    return lights
